#include "esvt/metrics.hpp"

#include <string>

namespace esvt {

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels, int num_classes,
                        Averaging averaging) {
    if (predictions.empty() || predictions.size() != labels.size())
        throw ValueError("compute_metrics needs equal-length, non-empty prediction and label lists");
    if (num_classes < 2) throw ValueError("compute_metrics needs at least 2 classes");

    Metrics m;
    m.confusion.assign(static_cast<size_t>(num_classes), std::vector<int64_t>(static_cast<size_t>(num_classes), 0));
    for (size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i], t = labels[i];
        if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
            throw ValueError("class index outside [0, " + std::to_string(num_classes) + ") at sample " +
                             std::to_string(i));
        m.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)]++;
    }

    const double total = static_cast<double>(predictions.size());
    int64_t trace = 0;
    m.support.assign(static_cast<size_t>(num_classes), 0);
    for (int c = 0; c < num_classes; ++c) {
        trace += m.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
        for (int o = 0; o < num_classes; ++o) m.support[static_cast<size_t>(c)] += m.confusion[static_cast<size_t>(c)][static_cast<size_t>(o)];
    }
    m.accuracy = static_cast<double>(trace) / total;

    m.class_precision.resize(static_cast<size_t>(num_classes));
    m.class_recall.resize(static_cast<size_t>(num_classes));
    m.class_f1.resize(static_cast<size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        const int64_t tp = m.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
        int64_t fp = 0, fn = 0;
        for (int o = 0; o < num_classes; ++o) {
            if (o == c) continue;
            fp += m.confusion[static_cast<size_t>(o)][static_cast<size_t>(c)];
            fn += m.confusion[static_cast<size_t>(c)][static_cast<size_t>(o)];
        }
        const double p = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double r = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double f = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        m.class_precision[static_cast<size_t>(c)] = p;
        m.class_recall[static_cast<size_t>(c)] = r;
        m.class_f1[static_cast<size_t>(c)] = f;
        m.macro.precision += p / num_classes;
        m.macro.recall += r / num_classes;
        m.macro.f1 += f / num_classes;
        const double w = static_cast<double>(m.support[static_cast<size_t>(c)]) / total;
        m.weighted.precision += p * w;
        m.weighted.recall += r * w;
        m.weighted.f1 += f * w;
    }

    const AggregateMetrics& pick = averaging == Averaging::macro ? m.macro : m.weighted;
    m.precision = pick.precision;
    m.recall = pick.recall;
    m.f1 = pick.f1;
    return m;
}

}  // namespace esvt
