#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "esvt/error.hpp"
#include "esvt/metrics.hpp"
#include "esvt/rng.hpp"
#include "esvt/signal.hpp"
#include "esvt/tensor.hpp"

namespace esvt {

struct TrainConfig {
    double lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 0.005;
    int batch_size = 16;
    int epochs = 20;
    uint64_t seed = 0;
    bool shuffle = true;
    int patience = 5;  // stop after this many epochs without train-loss improvement; 0 disables

    void validate() const {
        if (lr < 0.0 || momentum < 0.0 || weight_decay < 0.0)
            throw ValueError("train config values must be non-negative");
        if (batch_size < 1) throw ValueError("batch_size must be >= 1");
        if (epochs < 0 || patience < 0) throw ValueError("epochs/patience must be >= 0");
    }
};

// One input ready for a model: a spectrogram image or a raw snippet.
struct Example {
    Shape input_shape;
    std::vector<float> input;
    int label = -1;
    std::string subject;
    std::string id;
};

// SGD with classical momentum and L2 folded into the gradient:
//   v <- momentum * v + g + weight_decay * w;  w <- w - lr * v
template <typename S>
struct SgdState {
    std::vector<std::vector<S>> velocity;
};

template <typename S>
void sgd_step(std::vector<std::pair<std::string, Tensor<S>>>& params, SgdState<S>& state,
              const TrainConfig& cfg) {
    if (state.velocity.empty()) {
        state.velocity.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i)
            state.velocity[i].assign(static_cast<size_t>(params[i].second.size()), S(0));
    }
    if (state.velocity.size() != params.size()) throw ValueError("sgd state does not match parameter list");
    for (size_t i = 0; i < params.size(); ++i) {
        auto& [name, w] = params[i];
        if (!w.has_grad()) continue;
        const auto& g = w.grad();
        auto& v = state.velocity[i];
        S* wd = w.data();
        for (size_t j = 0; j < g.size(); ++j) {
            if (!std::isfinite(g[j]))
                throw TrainingError("non-finite gradient in parameter '" + name + "'");
            v[j] = static_cast<S>(cfg.momentum) * v[j] + g[j] + static_cast<S>(cfg.weight_decay) * wd[j];
            wd[j] -= static_cast<S>(cfg.lr) * v[j];
        }
    }
}

namespace detail {

// Deterministic index order for (seed, epoch).
inline std::vector<size_t> epoch_order(size_t n, const TrainConfig& cfg, int epoch) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    if (cfg.shuffle) {
        Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
        rng.shuffle(idx);
    }
    return idx;
}

template <typename S>
Tensor<S> example_input(const Example& ex) {
    std::vector<S> data(ex.input.size());
    for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<S>(ex.input[i]);
    return Tensor<S>::from_data(ex.input_shape, std::move(data));
}

}  // namespace detail

// Minibatch SGD over the fold's training examples; returns the mean
// cross-entropy per epoch. Model must expose `scalar_type`,
// `logits(const Example&) -> Tensor<scalar_type>` and `parameters()`.
template <typename Model>
std::vector<double> train_fold(Model& model, const std::vector<Example>& train, const TrainConfig& cfg) {
    using S = typename Model::scalar_type;
    cfg.validate();
    if (train.empty()) throw ProtocolError("train_fold: empty training set");
    auto params = model.parameters();
    SgdState<S> state;
    std::vector<double> curve;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = detail::epoch_order(train.size(), cfg, epoch);
        double epoch_loss = 0.0;
        for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch_size)) {
            const size_t stop = std::min(order.size(), at + static_cast<size_t>(cfg.batch_size));
            std::vector<Tensor<S>> logits;
            std::vector<int> targets;
            logits.reserve(stop - at);
            for (size_t i = at; i < stop; ++i) {
                logits.push_back(model.logits(train[order[i]]));
                targets.push_back(train[order[i]].label);
            }
            auto loss = cross_entropy(concat_rows(logits), targets);
            for (auto& [name, w] : params) w.zero_grad();
            backward(loss);
            sgd_step(params, state, cfg);
            epoch_loss += static_cast<double>(loss.item()) * static_cast<double>(stop - at);
        }
        epoch_loss /= static_cast<double>(train.size());
        curve.push_back(epoch_loss);
        if (cfg.patience > 0) {
            if (epoch_loss < best - 1e-12) {
                best = epoch_loss;
                stale = 0;
            } else if (++stale >= cfg.patience) {
                break;
            }
        }
    }
    return curve;
}

template <typename Model>
std::vector<int> predict(Model& model, const std::vector<Example>& examples) {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        auto logits = model.logits(ex);
        const auto* d = logits.data();
        int best = 0;
        for (int64_t j = 1; j < logits.size(); ++j)
            if (d[j] > d[best]) best = static_cast<int>(j);
        out.push_back(best);
    }
    return out;
}

struct FoldReport {
    std::string held_out_subject;
    Metrics metrics;
    std::vector<double> curve;
};

struct AverageRow {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RunReport {
    std::string model_kind;
    uint64_t seed = 0;
    std::string version;
    Averaging averaging = Averaging::macro;
    int num_classes = 0;
    std::vector<std::string> class_names;
    std::vector<FoldReport> folds;
    AverageRow average;  // arithmetic mean over folds
};

// Trains one freshly initialized model per fold (seed xor subject hash) and
// evaluates on the held-out subject. `make_model(fold_seed)` builds the
// model; `fold_hook(fold_index, model)` runs after each fold's evaluation
// (e.g. to save the trained weights). Folds are independent and may run on
// separate threads.
template <typename MakeModel, typename FoldHook>
RunReport run_losocv(const std::vector<Example>& examples, const std::vector<Fold>& folds, int num_classes,
                     const TrainConfig& cfg, MakeModel make_model, Averaging averaging, int max_threads,
                     FoldHook fold_hook) {
    cfg.validate();
    if (folds.size() < 2) throw ProtocolError("leave-one-subject-out needs at least 2 folds");
    RunReport report;
    report.seed = cfg.seed;
    report.averaging = averaging;
    report.num_classes = num_classes;
    report.folds.resize(folds.size());

    auto run_one = [&](size_t fi) {
        const Fold& fold = folds[fi];
        // defense in depth: the held-out subject must not appear in training
        for (size_t id : fold.train_segment_ids)
            if (examples[id].subject == fold.held_out_subject)
                throw ProtocolError("fold '" + fold.held_out_subject + "' leaks its subject into training");
        if (fold.train_segment_ids.empty()) throw ProtocolError("fold '" + fold.held_out_subject + "' has no training data");

        std::vector<Example> train, test;
        train.reserve(fold.train_segment_ids.size());
        test.reserve(fold.test_segment_ids.size());
        for (size_t id : fold.train_segment_ids) train.push_back(examples[id]);
        for (size_t id : fold.test_segment_ids) test.push_back(examples[id]);

        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = cfg.seed ^ fnv1a64(fold.held_out_subject);
        auto model = make_model(fold_cfg.seed);

        FoldReport fr;
        fr.held_out_subject = fold.held_out_subject;
        fr.curve = train_fold(model, train, fold_cfg);
        std::vector<int> labels;
        labels.reserve(test.size());
        for (const auto& ex : test) labels.push_back(ex.label);
        fr.metrics = compute_metrics(predict(model, test), labels, num_classes, averaging);
        report.folds[fi] = std::move(fr);
        fold_hook(fi, model);
    };

    const int workers = std::max(1, std::min<int>(max_threads, static_cast<int>(folds.size())));
    if (workers == 1) {
        for (size_t fi = 0; fi < folds.size(); ++fi) run_one(fi);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (size_t fi = next.fetch_add(1); fi < folds.size(); fi = next.fetch_add(1)) run_one(fi);
                } catch (...) {
                    errors[static_cast<size_t>(t)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    for (const auto& fr : report.folds) {
        report.average.accuracy += fr.metrics.accuracy / static_cast<double>(folds.size());
        report.average.precision += fr.metrics.precision / static_cast<double>(folds.size());
        report.average.recall += fr.metrics.recall / static_cast<double>(folds.size());
        report.average.f1 += fr.metrics.f1 / static_cast<double>(folds.size());
    }
    return report;
}

template <typename MakeModel>
RunReport run_losocv(const std::vector<Example>& examples, const std::vector<Fold>& folds, int num_classes,
                     const TrainConfig& cfg, MakeModel make_model, Averaging averaging = Averaging::macro,
                     int max_threads = 1) {
    return run_losocv(examples, folds, num_classes, cfg, make_model, averaging, max_threads,
                      [](size_t, auto&) {});
}

}  // namespace esvt
