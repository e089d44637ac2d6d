#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "esvt/tensor.hpp"

namespace testutil {

// Self-cleaning unique directory under the system temp root.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("esvt_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    os << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

// Central finite differences over every element of every parameter tensor,
// compared against backward() grads at relative `rel` with floor `abs_floor`.
// `build_loss` must rebuild the graph from the (mutated) parameter tensors.
template <typename BuildLoss>
bool fd_params_agree(BuildLoss build_loss, std::vector<std::pair<std::string, esvt::Tensor<double>>> params,
                     double h = 1e-3, double rel = 1e-4, double abs_floor = 1e-6,
                     std::string* failure = nullptr) {
    for (auto& [name, p] : params) p.zero_grad();
    auto loss = build_loss();
    esvt::backward(loss);
    for (auto& [name, p] : params) {
        for (int64_t i = 0; i < p.size(); ++i) {
            const double v = p.data()[i];
            p.data()[i] = v + h;
            const double fp = build_loss().item();
            p.data()[i] = v - h;
            const double fm = build_loss().item();
            p.data()[i] = v;
            const double fd = (fp - fm) / (2.0 * h);
            const double bp = p.grad()[static_cast<size_t>(i)];
            if (std::abs(fd - bp) > abs_floor + rel * std::max(std::abs(fd), std::abs(bp))) {
                if (failure) {
                    std::ostringstream os;
                    os << name << "[" << i << "]: fd=" << fd << " backward=" << bp;
                    *failure = os.str();
                }
                return false;
            }
        }
    }
    return true;
}

}  // namespace testutil
