#pragma once

#include <stdexcept>
#include <string>

namespace esvt {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor extents do not line up (matmul inner dims, kernel vs input, ...).
struct ShapeError : Error {
    using Error::Error;
};

// Bad argument value: invalid axis, out-of-range class index, window < 1, ...
struct ValueError : Error {
    using Error::Error;
};

// A forward op produced NaN/Inf from finite inputs, or was fed non-finite data.
struct NumericError : Error {
    using Error::Error;
};

// Malformed input file; message carries file/line or byte-offset context.
struct IngestionError : Error {
    using Error::Error;
};

// Cross-validation protocol violated (single subject, empty train set, ...).
struct ProtocolError : Error {
    using Error::Error;
};

// Weight checkpoint unreadable or inconsistent with the model config.
struct CheckpointError : Error {
    using Error::Error;
};

// Training diverged (non-finite gradient/loss); names the offending parameter.
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace esvt
