#include "esvt/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace esvt {

void EcgRecord::validate() const {
    if (!(sampling_rate_hz > 0.0))
        throw IngestionError("record '" + subject_id + "': sampling rate must be positive");
    if (samples.empty()) throw IngestionError("record '" + subject_id + "': no samples");
    const int64_t n = static_cast<int64_t>(samples.size());
    for (const auto& iv : labels) {
        if (iv.start < 0 || iv.end > n || iv.start >= iv.end)
            throw IngestionError("record '" + subject_id + "': interval [" + std::to_string(iv.start) + ", " +
                                 std::to_string(iv.end) + ") outside 0.." + std::to_string(n));
    }
}

std::optional<int> LabelScheme::class_index(const std::string& raw) const {
    auto it = mapping.find(raw);
    if (it == mapping.end())
        throw IngestionError("raw label '" + raw + "' is not covered by the label mapping");
    if (it->second == "DROP") return std::nullopt;
    for (size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == it->second) return static_cast<int>(i);
    throw IngestionError("label '" + raw + "' maps to unknown class '" + it->second + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    size_t b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

EcgRecord load_csv(const std::string& path, const std::string& subject_id, double fs) {
    std::ifstream is(path);
    if (!is) throw IngestionError("cannot open '" + path + "'");
    if (!(fs > 0.0))
        throw IngestionError("'" + path + "': CSV records need a sampling rate from the manifest");

    std::string line;
    if (!std::getline(is, line) || trim(line).empty())
        throw IngestionError("'" + path + "': empty file, expected a header row");
    auto header = split_csv_line(line);
    int ecg_col = -1, label_col = -1;
    for (size_t i = 0; i < header.size(); ++i) {
        const std::string h = trim(header[i]);
        if (h == "ecg") ecg_col = static_cast<int>(i);
        if (h == "label") label_col = static_cast<int>(i);
    }
    if (ecg_col < 0 || label_col < 0)
        throw IngestionError("'" + path + "' line 1: header must contain 'ecg' and 'label' columns");

    EcgRecord rec;
    rec.subject_id = subject_id;
    rec.sampling_rate_hz = fs;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cols = split_csv_line(line);
        if (static_cast<int>(cols.size()) <= std::max(ecg_col, label_col))
            throw IngestionError("'" + path + "' line " + std::to_string(line_no) + ": too few columns");
        const std::string ecg_str = trim(cols[static_cast<size_t>(ecg_col)]);
        float v;
        try {
            size_t pos = 0;
            v = std::stof(ecg_str, &pos);
            if (pos != ecg_str.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw IngestionError("'" + path + "' line " + std::to_string(line_no) + ": bad ecg value '" +
                                 ecg_str + "'");
        }
        const std::string label = trim(cols[static_cast<size_t>(label_col)]);
        if (label.empty())
            throw IngestionError("'" + path + "' line " + std::to_string(line_no) + ": empty label");
        const int64_t idx = static_cast<int64_t>(rec.samples.size());
        rec.samples.push_back(v);
        if (!rec.labels.empty() && rec.labels.back().label == label && rec.labels.back().end == idx) {
            rec.labels.back().end = idx + 1;
        } else {
            rec.labels.push_back({idx, idx + 1, label});
        }
    }
    if (rec.samples.empty()) throw IngestionError("'" + path + "': no data rows");
    rec.validate();
    return rec;
}

EcgRecord load_raw_f32(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestionError("cannot open '" + path + "'");
    is.seekg(0, std::ios::end);
    const std::streamoff bytes = is.tellg();
    is.seekg(0);
    if (bytes < 0 || bytes % 4 != 0)
        throw IngestionError("'" + path + "': byte length " + std::to_string(bytes) +
                             " is not a multiple of 4");
    EcgRecord rec;
    rec.samples.resize(static_cast<size_t>(bytes / 4));
    if (bytes > 0 && !is.read(reinterpret_cast<char*>(rec.samples.data()), bytes))
        throw IngestionError("'" + path + "': short read");

    const std::string sidecar = path + ".json";
    std::ifstream js(sidecar);
    if (!js) throw IngestionError("missing sidecar '" + sidecar + "'");
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("'" + sidecar + "': " + e.what());
    }
    try {
        rec.subject_id = j.at("subject_id").get<std::string>();
        rec.sampling_rate_hz = j.at("sampling_rate_hz").get<double>();
        for (const auto& iv : j.at("intervals")) {
            LabelInterval li;
            li.start = iv.at("start").get<int64_t>();
            li.end = iv.at("end").get<int64_t>();
            const auto& lab = iv.at("label");
            li.label = lab.is_string() ? lab.get<std::string>() : lab.dump();
            rec.labels.push_back(li);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("'" + sidecar + "': " + e.what());
    }
    rec.validate();
    return rec;
}

}  // namespace

EcgRecord load_record(const std::string& path, RecordFormat format, const std::string& subject_id,
                      double sampling_rate_hz) {
    switch (format) {
        case RecordFormat::csv:
            return load_csv(path, subject_id, sampling_rate_hz);
        case RecordFormat::raw_f32:
            return load_raw_f32(path);
    }
    throw ValueError("unknown record format");
}

namespace {

// Sorted, overlap-free intervals with adjacent equal labels merged, so a
// window is judged by label value rather than by interval identity.
std::vector<LabelInterval> normalized_intervals(const EcgRecord& record) {
    std::vector<LabelInterval> ivs = record.labels;
    std::sort(ivs.begin(), ivs.end(),
              [](const LabelInterval& a, const LabelInterval& b) { return a.start < b.start; });
    std::vector<LabelInterval> out;
    for (const auto& iv : ivs) {
        if (!out.empty() && iv.start < out.back().end)
            throw IngestionError("record '" + record.subject_id + "': overlapping label intervals at sample " +
                                 std::to_string(iv.start));
        if (!out.empty() && out.back().end == iv.start && out.back().label == iv.label)
            out.back().end = iv.end;
        else
            out.push_back(iv);
    }
    return out;
}

}  // namespace

std::vector<Segment> segment_record(const EcgRecord& record, double window_s, double hop_s,
                                    const LabelScheme& scheme, const std::string& id_prefix) {
    record.validate();
    const int64_t win = static_cast<int64_t>(std::llround(window_s * record.sampling_rate_hz));
    const int64_t hop = static_cast<int64_t>(std::llround(hop_s * record.sampling_rate_hz));
    if (win < 8) throw ValueError("window of " + std::to_string(win) + " samples is below the 8-sample minimum");
    if (hop < 1) throw ValueError("hop must cover at least one sample");

    const std::vector<LabelInterval> intervals = normalized_intervals(record);
    std::vector<Segment> out;
    const int64_t n = static_cast<int64_t>(record.samples.size());
    for (int64_t start = 0; start + win <= n; start += hop) {
        const int64_t end = start + win;
        const LabelInterval* cover = nullptr;
        for (const auto& iv : intervals) {
            if (iv.start <= start && end <= iv.end) {
                cover = &iv;
                break;
            }
        }
        if (!cover) continue;
        auto cls = scheme.class_index(cover->label);
        if (!cls) continue;
        Segment seg;
        seg.subject_id = record.subject_id;
        seg.sampling_rate_hz = record.sampling_rate_hz;
        seg.samples.assign(record.samples.begin() + start, record.samples.begin() + end);
        seg.label = *cls;
        seg.source_offset = start;
        seg.id = (id_prefix.empty() ? record.subject_id : id_prefix) + "_o" + std::to_string(start);
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<Fold> losocv_folds(const std::vector<Segment>& segments) {
    std::set<std::string> subjects;
    for (const auto& s : segments) subjects.insert(s.subject_id);
    if (subjects.size() < 2)
        throw ProtocolError("leave-one-subject-out needs at least 2 subjects, got " +
                            std::to_string(subjects.size()));
    std::vector<Fold> folds;
    for (const auto& subject : subjects) {
        Fold f;
        f.held_out_subject = subject;
        for (size_t i = 0; i < segments.size(); ++i) {
            if (segments[i].subject_id == subject)
                f.test_segment_ids.push_back(i);
            else
                f.train_segment_ids.push_back(i);
        }
        folds.push_back(std::move(f));
    }
    return folds;
}

}  // namespace esvt
