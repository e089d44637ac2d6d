#pragma once

#include <map>
#include <string>
#include <vector>

#include "esvt/signal.hpp"

namespace esvt {

// JSON dataset description:
// {
//   "window_s": 1.0, "hop_s": 1.0,
//   "default_labels": "three",
//   "label_schemes": {
//     "three":  {"classes": [...], "map": {"raw": "class-or-DROP", ...}},
//     "binary": {"classes": [...], "map": {...}}
//   },
//   "records": [
//     {"path": "s1.csv", "format": "csv", "subject_id": "s1", "sampling_rate_hz": 256.0},
//     {"path": "s2.f32", "format": "raw_f32"}
//   ]
// }
// Record paths are resolved against the manifest's directory. raw_f32 records
// read subject/rate/intervals from their "<path>.json" sidecar.
struct DatasetManifest {
    double window_s = 1.0;
    double hop_s = 1.0;
    std::string default_labels = "three";
    std::map<std::string, LabelScheme> label_schemes;

    struct RecordRef {
        std::string path;
        RecordFormat format = RecordFormat::csv;
        std::string subject_id;
        double sampling_rate_hz = 0.0;
    };
    std::vector<RecordRef> records;
    std::string base_dir;
};

struct Dataset {
    std::vector<Segment> segments;
    LabelScheme scheme;
    double window_s = 0.0;
    double hop_s = 0.0;
};

DatasetManifest load_manifest(const std::string& path);

// labels_choice selects a label scheme by key ("three"/"binary"); empty uses
// the manifest default.
Dataset load_dataset(const DatasetManifest& manifest, const std::string& labels_choice = "");

}  // namespace esvt
