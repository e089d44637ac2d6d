#pragma once

#include <string>
#include <utility>
#include <vector>

#include "esvt/checkpoint.hpp"
#include "esvt/error.hpp"
#include "esvt/rng.hpp"
#include "esvt/tensor.hpp"

namespace esvt {

struct CnnStage {
    int out_channels = 0;
    int kernel = 0;
};

// Three conv stages (5 kernels of 1x5, 10 of 1x5, 10 of 1x4), each followed
// by 1x2 max pooling, then a hidden fully connected layer and the
// classification layer. Stage widths are configurable for toy setups.
struct Cnn1dConfig {
    int input_len = 256;
    std::vector<CnnStage> stages{{5, 5}, {10, 5}, {10, 4}};
    int pool = 2;
    int fc_width = 64;
    int num_classes = 3;

    void validate() const {
        if (input_len < 1 || pool < 1 || fc_width < 1 || num_classes < 2 || stages.empty())
            throw ValueError("cnn1d: bad config");
        shape_trace();  // throws if any stage collapses
    }

    // Length after each conv and each pool, starting from input_len.
    std::vector<int> shape_trace() const {
        std::vector<int> lens{input_len};
        int len = input_len;
        for (const auto& st : stages) {
            if (st.kernel > len)
                throw ValueError("cnn1d: kernel " + std::to_string(st.kernel) + " exceeds stage input " +
                                 std::to_string(len));
            len = (len - st.kernel) + 1;
            lens.push_back(len);
            len = len / pool;
            if (len < 1) throw ValueError("cnn1d: pooling collapsed the signal");
            lens.push_back(len);
        }
        return lens;
    }

    int flatten_size() const {
        auto t = shape_trace();
        return stages.back().out_channels * t.back();
    }
};

template <typename S>
struct CnnStageParams {
    Tensor<S> weight;  // [c_out x c_in x k]
    Tensor<S> bias;    // [c_out]
};

template <typename S>
struct CnnParams {
    std::vector<CnnStageParams<S>> stages;
    Tensor<S> fc_weight;  // [flatten x fc_width]
    Tensor<S> fc_bias;
    Tensor<S> head_weight;  // [fc_width x classes]
    Tensor<S> head_bias;

    std::vector<std::pair<std::string, Tensor<S>>> named() {
        std::vector<std::pair<std::string, Tensor<S>>> out;
        for (size_t i = 0; i < stages.size(); ++i) {
            out.emplace_back("conv" + std::to_string(i) + ".weight", stages[i].weight);
            out.emplace_back("conv" + std::to_string(i) + ".bias", stages[i].bias);
        }
        out.emplace_back("fc.weight", fc_weight);
        out.emplace_back("fc.bias", fc_bias);
        out.emplace_back("head.weight", head_weight);
        out.emplace_back("head.bias", head_bias);
        return out;
    }
};

// snippet [1 x input_len] -> logits [1 x classes]; ReLU after every conv and
// after the hidden fully connected layer.
template <typename S>
Tensor<S> cnn_forward(const Tensor<S>& snippet, const CnnParams<S>& params, const Cnn1dConfig& cfg) {
    if (snippet.rank() != 2 || snippet.dim(0) != 1 || snippet.dim(1) != cfg.input_len)
        throw ShapeError("cnn_forward: expected snippet [1 x " + std::to_string(cfg.input_len) + "], got " +
                         shape_str(snippet.shape()));
    Tensor<S> x = snippet;
    for (size_t i = 0; i < cfg.stages.size(); ++i) {
        x = conv1d(x, params.stages[i].weight, 1);
        x = add_colvec(x, params.stages[i].bias);
        x = relu(x);
        x = max_pool1d(x, cfg.pool);
    }
    auto flat = reshape(x, {1, x.size()});
    auto hidden = relu(add_rowvec(matmul(flat, params.fc_weight), params.fc_bias));
    return add_rowvec(matmul(hidden, params.head_weight), params.head_bias);
}

// Kaiming-style uniform fan-in init for conv/fc weights, zero biases.
template <typename S>
CnnParams<S> init_cnn_params(const Cnn1dConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    auto uniform_fan = [&rng](Shape shape, int fan_in) {
        auto t = Tensor<S>::zeros(std::move(shape), true);
        const double bound = std::sqrt(1.0 / fan_in);
        for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
        return t;
    };
    CnnParams<S> p;
    int c_in = 1;
    for (const auto& st : cfg.stages) {
        CnnStageParams<S> sp;
        sp.weight = uniform_fan({st.out_channels, c_in, st.kernel}, c_in * st.kernel);
        sp.bias = Tensor<S>::zeros({st.out_channels}, true);
        p.stages.push_back(std::move(sp));
        c_in = st.out_channels;
    }
    const int flat = cfg.flatten_size();
    p.fc_weight = uniform_fan({flat, cfg.fc_width}, flat);
    p.fc_bias = Tensor<S>::zeros({cfg.fc_width}, true);
    p.head_weight = uniform_fan({cfg.fc_width, cfg.num_classes}, cfg.fc_width);
    p.head_bias = Tensor<S>::zeros({cfg.num_classes}, true);
    return p;
}

template <typename S>
void save_cnn_params(const std::string& path, CnnParams<S>& params) {
    std::vector<CheckpointEntry> entries;
    for (auto& [name, tensor] : params.named()) entries.push_back(to_entry(name, tensor));
    write_checkpoint(path, entries);
}

template <typename S>
CnnParams<S> load_cnn_params(const std::string& path, const Cnn1dConfig& cfg) {
    auto entries = read_checkpoint(path);
    CnnParams<S> params = init_cnn_params<S>(cfg, 0);
    load_named_params(path, entries, params.named());
    return params;
}

}  // namespace esvt
