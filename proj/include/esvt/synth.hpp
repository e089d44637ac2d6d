#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esvt/manifest.hpp"
#include "esvt/signal.hpp"

namespace esvt {

// Procedural ECG-like records for demos and end-to-end checks: a spiky
// heartbeat carrier plus a class-specific gated tone burst, with per-subject
// gain, rate, frequency jitter, and noise.
struct SynthConfig {
    int subjects = 4;
    int classes = 3;
    double seconds_per_class = 24.0;
    double block_s = 4.0;  // labels rotate in blocks of this length
    double sampling_rate_hz = 256.0;
    double noise = 0.03;
    double tone_amp = 1.5;
    // band centers kept clear of the heartbeat's low-frequency clutter
    std::vector<double> class_tone_hz{16.0, 44.0, 88.0};
    uint64_t seed = 7;
};

std::vector<std::string> synth_class_names(const SynthConfig& cfg);

std::vector<EcgRecord> synth_records(const SynthConfig& cfg);

// In-memory dataset (records already segmented), for tests.
Dataset synth_dataset(const SynthConfig& cfg, double window_s = 1.0, double hop_s = 1.0);

// Writes one file per subject (CSV, last subject raw_f32 when there are
// several) plus manifest.json; returns the manifest path.
std::string write_synth_dataset(const std::string& dir, const SynthConfig& cfg);

}  // namespace esvt
