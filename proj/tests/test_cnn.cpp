#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "esvt/cnn1d.hpp"
#include "testutil.hpp"

using esvt::Cnn1dConfig;
using esvt::Tensor;

namespace {

// valid-conv / pool length arithmetic, written independently of the config
std::vector<int> trace_oracle(int len, const std::vector<std::pair<int, int>>& stages, int pool) {
    std::vector<int> out{len};
    for (auto [channels, kernel] : stages) {
        (void)channels;
        len = len - kernel + 1;
        out.push_back(len);
        len /= pool;
        out.push_back(len);
    }
    return out;
}

}  // namespace

TEST_CASE("shape trace for the 1x256 snippet: 252 126 122 61 58 29, flatten 290") {
    Cnn1dConfig cfg;
    auto expect = trace_oracle(256, {{5, 5}, {10, 5}, {10, 4}}, 2);
    CHECK(cfg.shape_trace() == expect);
    CHECK(expect == std::vector<int>{256, 252, 126, 122, 61, 58, 29});
    CHECK(cfg.flatten_size() == 290);

    auto params = esvt::init_cnn_params<float>(cfg, 1);
    CHECK(params.fc_weight.shape() == esvt::Shape{290, 64});
    esvt::Rng rng(61);
    std::vector<float> x(256);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto logits = esvt::cnn_forward(Tensor<float>::from_data({1, 256}, x), params, cfg);
    CHECK(logits.shape() == esvt::Shape{1, 3});
}

TEST_CASE("changed input length re-derives a consistent trace") {
    Cnn1dConfig cfg;
    cfg.input_len = 512;
    auto expect = trace_oracle(512, {{5, 5}, {10, 5}, {10, 4}}, 2);
    CHECK(cfg.shape_trace() == expect);
    auto params = esvt::init_cnn_params<float>(cfg, 2);
    std::vector<float> x(512, 0.1f);
    CHECK(esvt::cnn_forward(Tensor<float>::from_data({1, 512}, x), params, cfg).shape() ==
          esvt::Shape{1, 3});
}

TEST_CASE("zero input with zero biases gives zero logits") {
    Cnn1dConfig cfg;
    auto params = esvt::init_cnn_params<float>(cfg, 3);  // biases start at zero
    auto logits = esvt::cnn_forward(Tensor<float>::zeros({1, 256}), params, cfg);
    for (int64_t i = 0; i < logits.size(); ++i) CHECK(logits.data()[i] == 0.0f);
}

TEST_CASE("toy single-kernel stages match a hand-rolled forward") {
    Cnn1dConfig cfg;
    cfg.input_len = 16;
    cfg.stages = {{1, 3}, {1, 3}};
    cfg.fc_width = 2;
    cfg.num_classes = 2;
    auto params = esvt::init_cnn_params<double>(cfg, 4);
    esvt::Rng rng(62);
    std::vector<double> x(16);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);

    auto logits = esvt::cnn_forward(Tensor<double>::from_data({1, 16}, x), params, cfg);

    // reference: conv3 -> +bias -> relu -> pool2, twice, then two dense layers
    auto stage = [&](const std::vector<double>& in, const std::vector<double>& k, double bias) {
        std::vector<double> conv(in.size() - k.size() + 1);
        for (size_t j = 0; j < conv.size(); ++j) {
            double acc = bias;
            for (size_t t = 0; t < k.size(); ++t) acc += in[j + t] * k[t];
            conv[j] = std::max(acc, 0.0);
        }
        std::vector<double> pooled(conv.size() / 2);
        for (size_t j = 0; j < pooled.size(); ++j) pooled[j] = std::max(conv[2 * j], conv[2 * j + 1]);
        return pooled;
    };
    auto h1 = stage(x, params.stages[0].weight.values(), params.stages[0].bias.data()[0]);
    auto h2 = stage(h1, params.stages[1].weight.values(), params.stages[1].bias.data()[0]);
    std::vector<double> hidden(2);
    for (int j = 0; j < 2; ++j) {
        double acc = params.fc_bias.data()[j];
        for (size_t i = 0; i < h2.size(); ++i) acc += h2[i] * params.fc_weight.data()[i * 2 + j];
        hidden[static_cast<size_t>(j)] = std::max(acc, 0.0);
    }
    for (int j = 0; j < 2; ++j) {
        double acc = params.head_bias.data()[j];
        for (int i = 0; i < 2; ++i) acc += hidden[static_cast<size_t>(i)] * params.head_weight.data()[i * 2 + j];
        CHECK(logits.data()[j] == doctest::Approx(acc).epsilon(1e-6));
    }
}

TEST_CASE("wrong snippet length is a shape error") {
    Cnn1dConfig cfg;
    auto params = esvt::init_cnn_params<float>(cfg, 5);
    CHECK_THROWS_AS(esvt::cnn_forward(Tensor<float>::zeros({1, 100}), params, cfg), esvt::ShapeError);
}

TEST_CASE("collapsing config rejected") {
    Cnn1dConfig cfg;
    cfg.input_len = 8;  // pools collapse the third stage
    CHECK_THROWS_AS(cfg.validate(), esvt::ValueError);
}

TEST_CASE("cnn gradients match finite differences on a toy config") {
    Cnn1dConfig cfg;
    cfg.input_len = 16;
    cfg.stages = {{2, 3}, {2, 3}};
    cfg.fc_width = 4;
    cfg.num_classes = 3;
    auto params = esvt::init_cnn_params<double>(cfg, 6);
    // push every pre-activation away from the relu kink so the +-1e-3
    // probe stays on one side of it
    for (auto& st : params.stages)
        for (int64_t i = 0; i < st.bias.size(); ++i) st.bias.data()[i] = 0.15 + 0.05 * static_cast<double>(i);
    for (int64_t i = 0; i < params.fc_bias.size(); ++i) params.fc_bias.data()[i] = 0.2 + 0.05 * static_cast<double>(i);
    esvt::Rng rng(63);
    std::vector<double> x(16);
    for (auto& v : x) v = rng.uniform(0.1, 1.0);
    auto input = Tensor<double>::from_data({1, 16}, x);

    auto build_loss = [&]() { return esvt::cross_entropy(esvt::cnn_forward(input, params, cfg), {2}); };
    std::string failure;
    const bool ok = testutil::fd_params_agree(build_loss, params.named(), 1e-3, 1e-4, 1e-6, &failure);
    INFO(failure);
    CHECK(ok);
}

TEST_CASE("cnn checkpoint round trip and mismatch reporting") {
    testutil::TempDir dir("cnn_ckpt");
    Cnn1dConfig cfg;
    cfg.input_len = 32;
    cfg.stages = {{2, 3}};
    cfg.fc_width = 4;
    auto params = esvt::init_cnn_params<float>(cfg, 7);
    esvt::save_cnn_params(dir.file("c.esvt"), params);
    auto loaded = esvt::load_cnn_params<float>(dir.file("c.esvt"), cfg);
    CHECK(loaded.fc_weight.values() == params.fc_weight.values());

    Cnn1dConfig more = cfg;
    more.stages = {{2, 3}, {2, 3}};
    try {
        esvt::load_cnn_params<float>(dir.file("c.esvt"), more);
        FAIL("expected CheckpointError");
    } catch (const esvt::CheckpointError& e) {
        CHECK(std::string(e.what()).find("conv1") != std::string::npos);
    }
}
