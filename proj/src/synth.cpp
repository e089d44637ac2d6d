#include "esvt/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "esvt/rng.hpp"

namespace esvt {

std::vector<std::string> synth_class_names(const SynthConfig& cfg) {
    static const char* base[] = {"low", "medium", "high"};
    std::vector<std::string> names;
    for (int c = 0; c < cfg.classes; ++c)
        names.push_back(c < 3 ? base[c] : "class" + std::to_string(c));
    return names;
}

std::vector<EcgRecord> synth_records(const SynthConfig& cfg) {
    if (cfg.subjects < 1 || cfg.classes < 2 || static_cast<int>(cfg.class_tone_hz.size()) < cfg.classes)
        throw ValueError("synth: need >= 1 subject, >= 2 classes, and a tone per class");
    const auto names = synth_class_names(cfg);
    const double fs = cfg.sampling_rate_hz;
    const int64_t block_len = static_cast<int64_t>(std::llround(cfg.block_s * fs));
    const int blocks_per_class = static_cast<int>(std::ceil(cfg.seconds_per_class / cfg.block_s));
    const int total_blocks = blocks_per_class * cfg.classes;

    std::vector<EcgRecord> records;
    for (int s = 0; s < cfg.subjects; ++s) {
        Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(s)));
        const double gain = 0.85 + 0.3 * rng.uniform();
        const double heart_rate = 1.0 + 0.4 * rng.uniform();  // beats per second
        const double jitter = 0.95 + 0.1 * rng.uniform();     // shared tone-frequency shift
        const double wander_hz = 0.3 + 0.4 * rng.uniform();   // baseline drift band
        const double wander_amp = 0.6 + 0.4 * rng.uniform();
        const double wander_phase = rng.uniform(0.0, 2.0 * M_PI);
        std::vector<double> phases(static_cast<size_t>(cfg.classes));
        for (auto& p : phases) p = rng.uniform(0.0, 2.0 * M_PI);

        EcgRecord rec;
        rec.subject_id = "s" + std::string(s + 1 < 10 ? "0" : "") + std::to_string(s + 1);
        rec.sampling_rate_hz = fs;
        rec.samples.resize(static_cast<size_t>(block_len) * total_blocks);

        for (int b = 0; b < total_blocks; ++b) {
            const int cls = b % cfg.classes;
            const double tone_hz = cfg.class_tone_hz[static_cast<size_t>(cls)] * jitter;
            const int64_t start = static_cast<int64_t>(b) * block_len;
            for (int64_t i = 0; i < block_len; ++i) {
                const double t = static_cast<double>(start + i) / fs;
                // heartbeat: narrow gaussian spike around each beat
                const double beat_phase = t * heart_rate - std::floor(t * heart_rate);
                const double dt = (beat_phase > 0.5 ? beat_phase - 1.0 : beat_phase) / heart_rate;
                const double spike = std::exp(-dt * dt / (2.0 * 0.012 * 0.012));
                // class tone, gated 150 ms on / 100 ms off
                const double gate = std::fmod(t, 0.25) < 0.15 ? 1.0 : 0.0;
                const double tone = cfg.tone_amp * gate *
                                    std::sin(2.0 * M_PI * tone_hz * t + phases[static_cast<size_t>(cls)]);
                const double wander = wander_amp * std::sin(2.0 * M_PI * wander_hz * t + wander_phase);
                const double v = gain * (spike + tone + wander) + cfg.noise * rng.normal();
                rec.samples[static_cast<size_t>(start + i)] = static_cast<float>(v);
            }
            rec.labels.push_back({start, start + block_len, names[static_cast<size_t>(cls)]});
        }
        records.push_back(std::move(rec));
    }
    return records;
}

namespace {

LabelScheme synth_three_scheme(const std::vector<std::string>& names) {
    LabelScheme s;
    s.mode = LabelMode::three_class;
    s.class_names = names;
    for (const auto& n : names) s.mapping[n] = n;
    return s;
}

}  // namespace

Dataset synth_dataset(const SynthConfig& cfg, double window_s, double hop_s) {
    Dataset ds;
    ds.scheme = synth_three_scheme(synth_class_names(cfg));
    ds.window_s = window_s;
    ds.hop_s = hop_s;
    auto records = synth_records(cfg);
    for (size_t ri = 0; ri < records.size(); ++ri) {
        auto segs = segment_record(records[ri], window_s, hop_s, ds.scheme,
                                   records[ri].subject_id + "_r" + std::to_string(ri));
        for (auto& s : segs) ds.segments.push_back(std::move(s));
    }
    return ds;
}

std::string write_synth_dataset(const std::string& dir, const SynthConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto names = synth_class_names(cfg);
    auto records = synth_records(cfg);

    nlohmann::json manifest;
    manifest["window_s"] = 1.0;
    manifest["hop_s"] = 1.0;
    manifest["default_labels"] = "three";
    nlohmann::json three_map, binary_map;
    for (size_t i = 0; i < names.size(); ++i) {
        three_map[names[i]] = names[i];
        binary_map[names[i]] = i == 0 ? "no_stress" : "stress";
    }
    manifest["label_schemes"]["three"] = {{"classes", names}, {"map", three_map}};
    manifest["label_schemes"]["binary"] = {{"classes", {"no_stress", "stress"}}, {"map", binary_map}};
    manifest["records"] = nlohmann::json::array();

    for (size_t ri = 0; ri < records.size(); ++ri) {
        const auto& rec = records[ri];
        const bool as_raw = records.size() > 1 && ri + 1 == records.size();
        if (as_raw) {
            const std::string name = rec.subject_id + ".f32";
            std::ofstream os((fs::path(dir) / name), std::ios::binary);
            os.write(reinterpret_cast<const char*>(rec.samples.data()),
                     static_cast<std::streamsize>(rec.samples.size() * sizeof(float)));
            nlohmann::json side;
            side["subject_id"] = rec.subject_id;
            side["sampling_rate_hz"] = rec.sampling_rate_hz;
            side["intervals"] = nlohmann::json::array();
            for (const auto& iv : rec.labels)
                side["intervals"].push_back({{"start", iv.start}, {"end", iv.end}, {"label", iv.label}});
            std::ofstream js((fs::path(dir) / (name + ".json")));
            js << side.dump(2) << "\n";
            manifest["records"].push_back({{"path", name}, {"format", "raw_f32"}});
        } else {
            const std::string name = rec.subject_id + ".csv";
            std::ofstream os(fs::path(dir) / name);
            os << "t,ecg,label\n";
            size_t iv_at = 0;
            for (size_t i = 0; i < rec.samples.size(); ++i) {
                while (iv_at < rec.labels.size() && static_cast<int64_t>(i) >= rec.labels[iv_at].end) ++iv_at;
                os << static_cast<double>(i) / rec.sampling_rate_hz << "," << rec.samples[i] << ","
                   << rec.labels[iv_at].label << "\n";
            }
            manifest["records"].push_back({{"path", name},
                                           {"format", "csv"},
                                           {"subject_id", rec.subject_id},
                                           {"sampling_rate_hz", rec.sampling_rate_hz}});
        }
    }

    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    std::ofstream ms(manifest_path);
    ms << manifest.dump(2) << "\n";
    if (!ms) throw Error("cannot write '" + manifest_path + "'");
    return manifest_path;
}

}  // namespace esvt
