#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esvt/error.hpp"

namespace esvt {

// Half-open sample range [start, end) carrying one raw label.
struct LabelInterval {
    int64_t start = 0;
    int64_t end = 0;
    std::string label;
};

struct EcgRecord {
    std::string subject_id;
    double sampling_rate_hz = 0.0;
    std::vector<float> samples;  // millivolts by convention, not enforced
    std::vector<LabelInterval> labels;

    void validate() const;
};

enum class LabelMode { three_class, binary };

// Maps raw dataset labels to class indices; "DROP" discards a raw label.
struct LabelScheme {
    LabelMode mode = LabelMode::three_class;
    std::vector<std::string> class_names;
    std::map<std::string, std::string> mapping;  // raw label -> class name or "DROP"

    int num_classes() const { return static_cast<int>(class_names.size()); }

    // nullopt when the raw label maps to DROP; IngestionError when unmapped.
    std::optional<int> class_index(const std::string& raw) const;
};

struct Segment {
    std::string id;
    std::string subject_id;
    double sampling_rate_hz = 0.0;
    std::vector<float> samples;
    int label = -1;
    int64_t source_offset = 0;
};

struct Fold {
    std::string held_out_subject;
    std::vector<size_t> train_segment_ids;
    std::vector<size_t> test_segment_ids;
};

enum class RecordFormat { csv, raw_f32 };

// CSV: header row with columns `t` (optional), `ecg`, `label`; sampling rate
// comes from the caller. raw_f32: little-endian floats plus a JSON sidecar at
// <path>.json with {subject_id, sampling_rate_hz, intervals}.
EcgRecord load_record(const std::string& path, RecordFormat format, const std::string& subject_id = "",
                      double sampling_rate_hz = 0.0);

// Fixed windows of round(window_s * fs) samples, advanced by round(hop_s * fs).
// A window is emitted only when all of its samples carry one raw label that
// maps to a class; windows over label boundaries, unlabeled gaps, or DROP
// labels are skipped, as is a tail shorter than the window.
std::vector<Segment> segment_record(const EcgRecord& record, double window_s, double hop_s,
                                    const LabelScheme& scheme, const std::string& id_prefix = "");

// One fold per subject, ordered by subject id.
std::vector<Fold> losocv_folds(const std::vector<Segment>& segments);

}  // namespace esvt
