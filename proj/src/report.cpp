#include "esvt/report.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>

namespace esvt {

namespace {

nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json j;
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["confusion"] = m.confusion;
    j["support"] = m.support;
    j["per_class"] = {{"precision", m.class_precision}, {"recall", m.class_recall}, {"f1", m.class_f1}};
    j["macro"] = {{"precision", m.macro.precision}, {"recall", m.macro.recall}, {"f1", m.macro.f1}};
    j["weighted"] = {{"precision", m.weighted.precision}, {"recall", m.weighted.recall}, {"f1", m.weighted.f1}};
    return j;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
    return buf;
}

}  // namespace

std::string report_to_json(const RunReport& report, const std::string& config_snapshot_json) {
    nlohmann::json j;
    j["model"] = report.model_kind;
    j["seed"] = report.seed;
    j["version"] = report.version;
    j["averaging"] = report.averaging == Averaging::macro ? "macro" : "weighted";
    j["num_classes"] = report.num_classes;
    j["classes"] = report.class_names;
    if (!config_snapshot_json.empty()) j["config"] = nlohmann::json::parse(config_snapshot_json);
    j["folds"] = nlohmann::json::array();
    for (const auto& f : report.folds) {
        nlohmann::json jf;
        jf["subject"] = f.held_out_subject;
        jf["metrics"] = metrics_to_json(f.metrics);
        jf["curve"] = f.curve;
        j["folds"].push_back(jf);
    }
    j["average"] = {{"accuracy", report.average.accuracy},
                    {"precision", report.average.precision},
                    {"recall", report.average.recall},
                    {"f1", report.average.f1}};
    return j.dump(2) + "\n";
}

std::string report_to_table(const RunReport& report) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Testing Sub", "Accuracy", "Precision", "Recall", "F1 Score"});
    for (const auto& f : report.folds)
        rows.push_back({f.held_out_subject, pct(f.metrics.accuracy), pct(f.metrics.precision),
                        pct(f.metrics.recall), pct(f.metrics.f1)});
    rows.push_back({"Average", pct(report.average.accuracy), pct(report.average.precision),
                    pct(report.average.recall), pct(report.average.f1)});

    std::vector<size_t> widths(rows[0].size(), 0);
    for (const auto& r : rows)
        for (size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());

    std::string out;
    for (size_t ri = 0; ri < rows.size(); ++ri) {
        for (size_t c = 0; c < rows[ri].size(); ++c) {
            std::string cell = rows[ri][c];
            cell.resize(widths[c], ' ');
            out += cell;
            if (c + 1 < rows[ri].size()) out += " | ";
        }
        out += "\n";
        if (ri == 0 || ri + 2 == rows.size()) {
            size_t total = 0;
            for (size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c + 1 < widths.size() ? 3 : 0);
            out += std::string(total, '-') + "\n";
        }
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw Error("write failed for '" + path + "'");
}

}  // namespace esvt
