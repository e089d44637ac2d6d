#pragma once

#include <cstdint>
#include <vector>

#include "esvt/error.hpp"

namespace esvt {

enum class Averaging { macro, weighted };

struct AggregateMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct Metrics {
    // headline values under the requested averaging
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    std::vector<std::vector<int64_t>> confusion;  // [truth][predicted]
    std::vector<int64_t> support;                 // samples per true class
    std::vector<double> class_precision, class_recall, class_f1;
    AggregateMetrics macro, weighted;
};

// One-vs-rest per-class precision/recall/F1 with 0/0 defined as 0; accuracy
// over all samples; macro and weighted aggregates both computed, the
// `averaging` argument picks the headline.
Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels, int num_classes,
                        Averaging averaging = Averaging::macro);

}  // namespace esvt
