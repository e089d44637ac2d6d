#pragma once

#include <string>

#include "esvt/train.hpp"

namespace esvt {

// Deterministic JSON serialization; carries no timestamps so reruns with the
// same seed and config are byte-identical.
std::string report_to_json(const RunReport& report, const std::string& config_snapshot_json);

// Aligned text table, one row per held-out subject plus the Average row,
// percentages with two decimals:
//   Testing Sub | Accuracy | Precision | Recall | F1 Score
std::string report_to_table(const RunReport& report);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace esvt
