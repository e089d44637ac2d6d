#pragma once

#include <complex>
#include <string>
#include <vector>

#include "esvt/error.hpp"
#include "esvt/signal.hpp"

namespace esvt {

enum class WindowFn { hann, rectangular };

struct StftConfig {
    int win_len = 64;  // M, samples per frame
    int hop = 16;
    WindowFn window = WindowFn::hann;
    int fft_len = 64;  // >= win_len, power of two

    void validate() const;
    std::string hash() const;  // stable fingerprint for image provenance
};

// One-sided short-time spectrum: bins x frames, frame l covering samples
// [l*hop, l*hop + M), zero-padded from M to fft_len before the transform.
struct StftResult {
    int bins = 0;
    int frames = 0;
    double sampling_rate_hz = 0.0;
    int hop = 0;
    std::vector<std::complex<double>> v;  // row-major bins x frames

    std::complex<double>& at(int k, int l) { return v[static_cast<size_t>(k) * frames + l]; }
    const std::complex<double>& at(int k, int l) const { return v[static_cast<size_t>(k) * frames + l]; }
};

struct PowerSpectrogram {
    int bins = 0;
    int frames = 0;
    double freq_resolution_hz = 0.0;
    double frame_hop_s = 0.0;
    std::vector<double> p;  // row-major bins x frames, squared magnitudes

    double& at(int k, int l) { return p[static_cast<size_t>(k) * frames + l]; }
    double at(int k, int l) const { return p[static_cast<size_t>(k) * frames + l]; }
};

// Periodic Hann, w[m] = 0.5 - 0.5 cos(2 pi m / M).
std::vector<double> make_window(WindowFn fn, int len);

StftResult stft(const std::vector<float>& samples, const StftConfig& cfg, double sampling_rate_hz = 0.0);
StftResult stft(const Segment& segment, const StftConfig& cfg);

// Squared magnitude of every bin.
PowerSpectrogram power(const StftResult& s);

}  // namespace esvt
