#include "esvt/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace esvt {

namespace {

LabelScheme parse_scheme(const nlohmann::json& j, const std::string& key) {
    LabelScheme s;
    s.mode = key == "binary" ? LabelMode::binary : LabelMode::three_class;
    try {
        for (const auto& c : j.at("classes")) s.class_names.push_back(c.get<std::string>());
        for (const auto& [raw, cls] : j.at("map").items()) s.mapping[raw] = cls.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("label scheme '" + key + "': " + e.what());
    }
    if (s.class_names.size() < 2) throw IngestionError("label scheme '" + key + "' needs at least 2 classes");
    for (const auto& [raw, cls] : s.mapping) {
        if (cls == "DROP") continue;
        if (std::find(s.class_names.begin(), s.class_names.end(), cls) == s.class_names.end())
            throw IngestionError("label scheme '" + key + "': '" + raw + "' maps to unknown class '" + cls + "'");
    }
    return s;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IngestionError("cannot open manifest '" + path + "'");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("manifest '" + path + "': " + e.what());
    }

    DatasetManifest m;
    m.base_dir = std::filesystem::path(path).parent_path().string();
    try {
        m.window_s = j.value("window_s", 1.0);
        m.hop_s = j.value("hop_s", 1.0);
        m.default_labels = j.value("default_labels", std::string("three"));
        if (!j.contains("label_schemes") || !j["label_schemes"].is_object() || j["label_schemes"].empty())
            throw IngestionError("manifest '" + path + "' has no label_schemes");
        for (const auto& [key, scheme] : j["label_schemes"].items())
            m.label_schemes[key] = parse_scheme(scheme, key);
        if (!j.contains("records") || !j["records"].is_array())
            throw IngestionError("manifest '" + path + "' has no records array");
        for (const auto& r : j["records"]) {
            DatasetManifest::RecordRef ref;
            ref.path = r.at("path").get<std::string>();
            const std::string fmt = r.value("format", std::string("csv"));
            if (fmt == "csv")
                ref.format = RecordFormat::csv;
            else if (fmt == "raw_f32")
                ref.format = RecordFormat::raw_f32;
            else
                throw IngestionError("manifest '" + path + "': unknown record format '" + fmt + "'");
            ref.subject_id = r.value("subject_id", std::string());
            ref.sampling_rate_hz = r.value("sampling_rate_hz", 0.0);
            m.records.push_back(std::move(ref));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("manifest '" + path + "': " + e.what());
    }
    return m;
}

Dataset load_dataset(const DatasetManifest& manifest, const std::string& labels_choice) {
    const std::string key = labels_choice.empty() ? manifest.default_labels : labels_choice;
    auto it = manifest.label_schemes.find(key);
    if (it == manifest.label_schemes.end())
        throw IngestionError("manifest defines no label scheme '" + key + "'");

    Dataset ds;
    ds.scheme = it->second;
    ds.window_s = manifest.window_s;
    ds.hop_s = manifest.hop_s;
    for (size_t ri = 0; ri < manifest.records.size(); ++ri) {
        const auto& ref = manifest.records[ri];
        std::filesystem::path p(ref.path);
        if (p.is_relative() && !manifest.base_dir.empty())
            p = std::filesystem::path(manifest.base_dir) / p;
        EcgRecord rec = load_record(p.string(), ref.format, ref.subject_id, ref.sampling_rate_hz);
        const std::string prefix = rec.subject_id + "_r" + std::to_string(ri);
        auto segs = segment_record(rec, manifest.window_s, manifest.hop_s, ds.scheme, prefix);
        for (auto& s : segs) ds.segments.push_back(std::move(s));
    }
    return ds;
}

}  // namespace esvt
