#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "esvt/error.hpp"

namespace esvt {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

namespace detail {
inline std::atomic<uint64_t>& node_counter() {
    static std::atomic<uint64_t> counter{0};
    return counter;
}
}  // namespace detail

// One node of the recorded computation. Nodes are created in execution order,
// so ids increase along every parent -> child edge.
template <typename S>
struct TensorNode {
    Shape shape;
    std::vector<S> data;
    std::vector<S> grad;  // allocated lazily, same length as data
    bool requires_grad = false;
    uint64_t id = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    TensorNode(Shape s, std::vector<S> d)
        : shape(std::move(s)), data(std::move(d)), id(detail::node_counter().fetch_add(1)) {}

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), S(0));
    }
};

// Value-semantic handle over a shared graph node. Ops are free functions that
// return fresh tensors and record a backward rule when a parent requires grad.
template <typename S>
class Tensor {
public:
    using scalar_type = S;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), S(0), requires_grad);
    }

    static Tensor full(Shape shape, S value, bool requires_grad = false) {
        const int64_t n = shape_numel(shape);
        if (n < 0) throw ShapeError("negative tensor extent in " + shape_str(shape));
        Tensor t;
        t.node = std::make_shared<TensorNode<S>>(std::move(shape), std::vector<S>(static_cast<size_t>(n), value));
        t.node->requires_grad = requires_grad;
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<S> data, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                             shape_str(shape));
        Tensor t;
        t.node = std::make_shared<TensorNode<S>>(std::move(shape), std::move(data));
        t.node->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(S v, bool requires_grad = false) {
        return from_data(Shape{}, std::vector<S>{v}, requires_grad);
    }

    bool defined() const { return node != nullptr; }
    const Shape& shape() const { return node->shape; }
    int rank() const { return static_cast<int>(node->shape.size()); }
    int64_t dim(int i) const { return node->shape[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(node->data.size()); }

    S* data() { return node->data.data(); }
    const S* data() const { return node->data.data(); }
    std::vector<S>& values() { return node->data; }
    const std::vector<S>& values() const { return node->data; }

    S item() const {
        if (size() != 1) throw ValueError("item() on tensor of size " + std::to_string(size()));
        return node->data[0];
    }

    // 2D convenience accessors (row-major)
    S operator()(int64_t i, int64_t j) const { return node->data[static_cast<size_t>(i * dim(1) + j)]; }
    S& operator()(int64_t i, int64_t j) { return node->data[static_cast<size_t>(i * dim(1) + j)]; }

    bool requires_grad() const { return node->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        node->requires_grad = rg;
        return *this;
    }

    bool has_grad() const { return node->grad.size() == node->data.size(); }
    const std::vector<S>& grad() const {
        if (!has_grad()) throw ValueError("grad accessed before backward()");
        return node->grad;
    }
    void zero_grad() {
        if (node) node->grad.assign(node->data.size(), S(0));
    }

    uint64_t id() const { return node->id; }

    std::shared_ptr<TensorNode<S>> node;
};

namespace detail {

template <typename S>
inline void check_finite(const std::vector<S>& v, const char* op) {
    for (S x : v) {
        if (!std::isfinite(x))
            throw NumericError(std::string(op) + " produced a non-finite value");
    }
}

template <typename S>
inline bool any_requires_grad(std::initializer_list<const Tensor<S>*> ts) {
    for (const Tensor<S>* t : ts)
        if (t->node->requires_grad) return true;
    return false;
}

// Attach parents + backward rule to `out` when some parent needs a gradient.
template <typename S, typename Fn>
inline void record(Tensor<S>& out, const char* op, std::initializer_list<const Tensor<S>*> parents, Fn&& fn) {
    out.node->op = op;
    check_finite(out.node->data, op);
    if (!any_requires_grad<S>(parents)) return;
    out.node->requires_grad = true;
    for (const Tensor<S>* p : parents) out.node->parents.push_back(p->node);
    out.node->backward_fn = std::forward<Fn>(fn);
}

template <typename S>
inline std::vector<S>* parent_grad(TensorNode<S>& self, size_t i) {
    auto& p = *self.parents[i];
    if (!p.requires_grad) return nullptr;
    p.ensure_grad();
    return &p.grad;
}

template <typename S>
using EigenMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<const EigenMat<S>>;
template <typename S>
using MutMap = Eigen::Map<EigenMat<S>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// Core ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul expects rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::zeros({m, n});
    detail::MutMap<S>(out.data(), m, n).noalias() =
        detail::MatMap<S>(a.data(), m, k) * detail::MatMap<S>(b.data(), k, n);
    detail::record<S>(out, "matmul", {&a, &b}, [m, k, n](TensorNode<S>& self) {
        detail::MatMap<S> g(self.grad.data(), m, n);
        detail::MatMap<S> av(self.parents[0]->data.data(), m, k);
        detail::MatMap<S> bv(self.parents[1]->data.data(), k, n);
        if (auto* ga = detail::parent_grad(self, 0))
            detail::MutMap<S>(ga->data(), m, k).noalias() += g * bv.transpose();
        if (auto* gb = detail::parent_grad(self, 1))
            detail::MutMap<S>(gb->data(), k, n).noalias() += av.transpose() * g;
    });
    return out;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
    if (a.rank() != 2) throw ShapeError("transpose expects a rank-2 tensor");
    const int64_t r = a.dim(0), c = a.dim(1);
    Tensor<S> out = Tensor<S>::zeros({c, r});
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out.data()[j * r + i] = a.data()[i * c + j];
    detail::record<S>(out, "transpose", {&a}, [r, c](TensorNode<S>& self) {
        if (auto* ga = detail::parent_grad(self, 0)) {
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) (*ga)[static_cast<size_t>(i * c + j)] += self.grad[static_cast<size_t>(j * r + i)];
        }
    });
    return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    detail::record<S>(out, "add", {&a, &b}, [](TensorNode<S>& self) {
        for (size_t p = 0; p < 2; ++p)
            if (auto* g = detail::parent_grad(self, p))
                for (size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    });
    return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    detail::record<S>(out, "mul", {&a, &b}, [](TensorNode<S>& self) {
        auto& av = self.parents[0]->data;
        auto& bv = self.parents[1]->data;
        if (auto* ga = detail::parent_grad(self, 0))
            for (size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * bv[i];
        if (auto* gb = detail::parent_grad(self, 1))
            for (size_t i = 0; i < self.grad.size(); ++i) (*gb)[i] += self.grad[i] * av[i];
    });
    return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
    detail::record<S>(out, "scale", {&a}, [c](TensorNode<S>& self) {
        if (auto* ga = detail::parent_grad(self, 0))
            for (size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * c;
    });
    return out;
}

// v added to every row of a; len(v) == cols(a)
template <typename S>
Tensor<S> add_rowvec(const Tensor<S>& a, const Tensor<S>& v) {
    if (a.rank() != 2 || v.size() != a.dim(1))
        throw ShapeError("add_rowvec: " + shape_str(a.shape()) + " with vector of length " +
                         std::to_string(v.size()));
    const int64_t r = a.dim(0), c = a.dim(1);
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out.data()[i * c + j] = a.data()[i * c + j] + v.data()[j];
    detail::record<S>(out, "add_rowvec", {&a, &v}, [r, c](TensorNode<S>& self) {
        if (auto* ga = detail::parent_grad(self, 0))
            for (size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
        if (auto* gv = detail::parent_grad(self, 1))
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) (*gv)[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(i * c + j)];
    });
    return out;
}

// v added to every column of a; len(v) == rows(a)
template <typename S>
Tensor<S> add_colvec(const Tensor<S>& a, const Tensor<S>& v) {
    if (a.rank() != 2 || v.size() != a.dim(0))
        throw ShapeError("add_colvec: " + shape_str(a.shape()) + " with vector of length " +
                         std::to_string(v.size()));
    const int64_t r = a.dim(0), c = a.dim(1);
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out.data()[i * c + j] = a.data()[i * c + j] + v.data()[i];
    detail::record<S>(out, "add_colvec", {&a, &v}, [r, c](TensorNode<S>& self) {
        if (auto* ga = detail::parent_grad(self, 0))
            for (size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
        if (auto* gv = detail::parent_grad(self, 1))
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) (*gv)[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i * c + j)];
    });
    return out;
}

namespace detail {
struct AxisSplit {
    int64_t outer, extent, inner;
};
inline AxisSplit split_axis(const Shape& shape, int axis) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw ValueError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    AxisSplit s{1, shape[static_cast<size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}
}  // namespace detail

// Numerically stabilized by max subtraction per slice.
template <typename S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
    const auto sp = detail::split_axis(x.shape(), axis);
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    for (int64_t o = 0; o < sp.outer; ++o) {
        for (int64_t in = 0; in < sp.inner; ++in) {
            const int64_t base = o * sp.extent * sp.inner + in;
            S mx = x.data()[base];
            for (int64_t e = 1; e < sp.extent; ++e) mx = std::max(mx, x.data()[base + e * sp.inner]);
            S denom = S(0);
            for (int64_t e = 0; e < sp.extent; ++e) {
                const S v = std::exp(x.data()[base + e * sp.inner] - mx);
                out.data()[base + e * sp.inner] = v;
                denom += v;
            }
            for (int64_t e = 0; e < sp.extent; ++e) out.data()[base + e * sp.inner] /= denom;
        }
    }
    detail::record<S>(out, "softmax", {&x}, [sp](TensorNode<S>& self) {
        auto* gx = detail::parent_grad(self, 0);
        if (!gx) return;
        // dx = y * (dy - sum(dy * y)) per slice
        for (int64_t o = 0; o < sp.outer; ++o) {
            for (int64_t in = 0; in < sp.inner; ++in) {
                const int64_t base = o * sp.extent * sp.inner + in;
                S dot = S(0);
                for (int64_t e = 0; e < sp.extent; ++e) {
                    const size_t i = static_cast<size_t>(base + e * sp.inner);
                    dot += self.grad[i] * self.data[i];
                }
                for (int64_t e = 0; e < sp.extent; ++e) {
                    const size_t i = static_cast<size_t>(base + e * sp.inner);
                    (*gx)[i] += self.data[i] * (self.grad[i] - dot);
                }
            }
        }
    });
    return out;
}

// Normalizes the last axis; gamma/beta have that axis's extent.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, S eps = S(1e-6)) {
    if (x.rank() < 1) throw ShapeError("layer_norm needs rank >= 1");
    const int64_t n = x.shape().back();
    if (gamma.size() != n || beta.size() != n)
        throw ShapeError("layer_norm gamma/beta length must equal last-axis extent " + std::to_string(n));
    if (!(eps > S(0))) throw ValueError("layer_norm eps must be positive");
    const int64_t rows = x.size() / n;
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    std::vector<S> inv_std(static_cast<size_t>(rows)), means(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const S* xr = x.data() + r * n;
        S mean = S(0);
        for (int64_t j = 0; j < n; ++j) mean += xr[j];
        mean /= static_cast<S>(n);
        S var = S(0);
        for (int64_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<S>(n);
        const S istd = S(1) / std::sqrt(var + eps);
        means[static_cast<size_t>(r)] = mean;
        inv_std[static_cast<size_t>(r)] = istd;
        for (int64_t j = 0; j < n; ++j)
            out.data()[r * n + j] = gamma.data()[j] * (xr[j] - mean) * istd + beta.data()[j];
    }
    detail::record<S>(out, "layer_norm", {&x, &gamma, &beta},
                      [n, rows, means = std::move(means), inv_std = std::move(inv_std)](TensorNode<S>& self) {
        auto& xv = self.parents[0]->data;
        auto& gv = self.parents[1]->data;
        auto* gx = detail::parent_grad(self, 0);
        auto* gg = detail::parent_grad(self, 1);
        auto* gb = detail::parent_grad(self, 2);
        for (int64_t r = 0; r < rows; ++r) {
            const S mean = means[static_cast<size_t>(r)];
            const S istd = inv_std[static_cast<size_t>(r)];
            const S* xr = xv.data() + r * n;
            const S* dy = self.grad.data() + r * n;
            if (gg || gb) {
                for (int64_t j = 0; j < n; ++j) {
                    const S xhat = (xr[j] - mean) * istd;
                    if (gg) (*gg)[static_cast<size_t>(j)] += dy[j] * xhat;
                    if (gb) (*gb)[static_cast<size_t>(j)] += dy[j];
                }
            }
            if (gx) {
                // dx = istd/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
                S sum_dxhat = S(0), sum_dxhat_xhat = S(0);
                for (int64_t j = 0; j < n; ++j) {
                    const S dxhat = dy[j] * gv[static_cast<size_t>(j)];
                    const S xhat = (xr[j] - mean) * istd;
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
                for (int64_t j = 0; j < n; ++j) {
                    const S dxhat = dy[j] * gv[static_cast<size_t>(j)];
                    const S xhat = (xr[j] - mean) * istd;
                    (*gx)[static_cast<size_t>(r * n + j)] +=
                        istd / static_cast<S>(n) *
                        (static_cast<S>(n) * dxhat - sum_dxhat - xhat * sum_dxhat_xhat);
                }
            }
        }
    });
    return out;
}

// Exact x * Phi(x) form.
template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
        const S v = x.data()[i];
        out.data()[i] = v * S(0.5) * (S(1) + std::erf(v * S(M_SQRT1_2)));
    }
    detail::record<S>(out, "gelu", {&x}, [](TensorNode<S>& self) {
        auto* gx = detail::parent_grad(self, 0);
        if (!gx) return;
        auto& xv = self.parents[0]->data;
        const S inv_sqrt_2pi = S(1) / std::sqrt(S(2) * S(M_PI));
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const S v = xv[i];
            const S cdf = S(0.5) * (S(1) + std::erf(v * S(M_SQRT1_2)));
            const S pdf = inv_sqrt_2pi * std::exp(-v * v / S(2));
            (*gx)[i] += self.grad[i] * (cdf + v * pdf);
        }
    });
    return out;
}

// tanh approximation, selectable via model config
template <typename S>
Tensor<S> gelu_tanh(const Tensor<S>& x) {
    const S c = std::sqrt(S(2) / S(M_PI));
    const S a = S(0.044715);
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) {
        const S v = x.data()[i];
        out.data()[i] = S(0.5) * v * (S(1) + std::tanh(c * (v + a * v * v * v)));
    }
    detail::record<S>(out, "gelu_tanh", {&x}, [c, a](TensorNode<S>& self) {
        auto* gx = detail::parent_grad(self, 0);
        if (!gx) return;
        auto& xv = self.parents[0]->data;
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const S v = xv[i];
            const S u = c * (v + a * v * v * v);
            const S t = std::tanh(u);
            const S sech2 = S(1) - t * t;
            (*gx)[i] += self.grad[i] * (S(0.5) * (S(1) + t) + S(0.5) * v * sech2 * c * (S(1) + S(3) * a * v * v));
        }
    });
    return out;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] > S(0) ? x.data()[i] : S(0);
    detail::record<S>(out, "relu", {&x}, [](TensorNode<S>& self) {
        auto* gx = detail::parent_grad(self, 0);
        if (!gx) return;
        auto& xv = self.parents[0]->data;
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (xv[i] > S(0)) (*gx)[i] += self.grad[i];
    });
    return out;
}

// Cross-correlation over valid positions (no kernel flip).
// x: [c_in x len], kernels: [c_out x c_in x k] -> [c_out x len']
template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& kernels, int stride = 1) {
    if (x.rank() != 2 || kernels.rank() != 3)
        throw ShapeError("conv1d expects x[c_in x len], kernels[c_out x c_in x k]");
    const int64_t c_in = x.dim(0), len = x.dim(1);
    const int64_t c_out = kernels.dim(0), kc_in = kernels.dim(1), k = kernels.dim(2);
    if (kc_in != c_in)
        throw ShapeError("conv1d channel mismatch: input has " + std::to_string(c_in) + ", kernels expect " +
                         std::to_string(kc_in));
    if (k > len) throw ShapeError("conv1d kernel length " + std::to_string(k) + " exceeds input length " +
                                  std::to_string(len));
    if (stride < 1) throw ValueError("conv1d stride must be >= 1");
    const int64_t out_len = (len - k) / stride + 1;
    Tensor<S> out = Tensor<S>::zeros({c_out, out_len});
    for (int64_t o = 0; o < c_out; ++o)
        for (int64_t j = 0; j < out_len; ++j) {
            S acc = S(0);
            for (int64_t i = 0; i < c_in; ++i)
                for (int64_t t = 0; t < k; ++t)
                    acc += x.data()[i * len + j * stride + t] * kernels.data()[(o * c_in + i) * k + t];
            out.data()[o * out_len + j] = acc;
        }
    detail::record<S>(out, "conv1d", {&x, &kernels},
                      [c_in, len, c_out, k, stride, out_len](TensorNode<S>& self) {
        auto& xv = self.parents[0]->data;
        auto& kv = self.parents[1]->data;
        auto* gx = detail::parent_grad(self, 0);
        auto* gk = detail::parent_grad(self, 1);
        for (int64_t o = 0; o < c_out; ++o)
            for (int64_t j = 0; j < out_len; ++j) {
                const S g = self.grad[static_cast<size_t>(o * out_len + j)];
                for (int64_t i = 0; i < c_in; ++i)
                    for (int64_t t = 0; t < k; ++t) {
                        if (gx) (*gx)[static_cast<size_t>(i * len + j * stride + t)] += g * kv[static_cast<size_t>((o * c_in + i) * k + t)];
                        if (gk) (*gk)[static_cast<size_t>((o * c_in + i) * k + t)] += g * xv[static_cast<size_t>(i * len + j * stride + t)];
                    }
            }
    });
    return out;
}

// Non-overlapping windows (stride == window); a short tail is dropped.
template <typename S>
Tensor<S> max_pool1d(const Tensor<S>& x, int window) {
    if (x.rank() != 2) throw ShapeError("max_pool1d expects x[c x len]");
    if (window < 1) throw ValueError("max_pool1d window must be >= 1");
    const int64_t c = x.dim(0), len = x.dim(1);
    const int64_t out_len = len / window;
    if (out_len < 1) throw ShapeError("max_pool1d window larger than input");
    Tensor<S> out = Tensor<S>::zeros({c, out_len});
    std::vector<int64_t> argmax(static_cast<size_t>(c * out_len));
    for (int64_t i = 0; i < c; ++i)
        for (int64_t j = 0; j < out_len; ++j) {
            int64_t best = j * window;
            for (int64_t t = 1; t < window; ++t)
                if (x.data()[i * len + j * window + t] > x.data()[i * len + best]) best = j * window + t;
            out.data()[i * out_len + j] = x.data()[i * len + best];
            argmax[static_cast<size_t>(i * out_len + j)] = best;
        }
    detail::record<S>(out, "max_pool1d", {&x}, [c, len, out_len, argmax = std::move(argmax)](TensorNode<S>& self) {
        auto* gx = detail::parent_grad(self, 0);
        if (!gx) return;
        for (int64_t i = 0; i < c; ++i)
            for (int64_t j = 0; j < out_len; ++j)
                (*gx)[static_cast<size_t>(i * len + argmax[static_cast<size_t>(i * out_len + j)])] +=
                    self.grad[static_cast<size_t>(i * out_len + j)];
    });
    return out;
}

// Mean over the batch of -log softmax(logits)[target].
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets) {
    if (logits.rank() != 2) throw ShapeError("cross_entropy expects logits[batch x classes]");
    const int64_t batch = logits.dim(0), classes = logits.dim(1);
    if (static_cast<int64_t>(targets.size()) != batch)
        throw ShapeError("cross_entropy needs one target per batch row");
    for (int t : targets)
        if (t < 0 || t >= classes)
            throw ValueError("cross_entropy target " + std::to_string(t) + " outside [0, " +
                             std::to_string(classes) + ")");
    std::vector<S> probs(static_cast<size_t>(batch * classes));
    S loss = S(0);
    for (int64_t b = 0; b < batch; ++b) {
        const S* row = logits.data() + b * classes;
        S mx = row[0];
        for (int64_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
        S denom = S(0);
        for (int64_t j = 0; j < classes; ++j) {
            const S e = std::exp(row[j] - mx);
            probs[static_cast<size_t>(b * classes + j)] = e;
            denom += e;
        }
        for (int64_t j = 0; j < classes; ++j) probs[static_cast<size_t>(b * classes + j)] /= denom;
        loss -= std::log(probs[static_cast<size_t>(b * classes + targets[static_cast<size_t>(b)])]);
    }
    loss /= static_cast<S>(batch);
    Tensor<S> out = Tensor<S>::scalar(loss);
    detail::record<S>(out, "cross_entropy", {&logits},
                      [batch, classes, targets, probs = std::move(probs)](TensorNode<S>& self) {
        auto* gl = detail::parent_grad(self, 0);
        if (!gl) return;
        const S g = self.grad[0] / static_cast<S>(batch);
        for (int64_t b = 0; b < batch; ++b)
            for (int64_t j = 0; j < classes; ++j) {
                const size_t i = static_cast<size_t>(b * classes + j);
                (*gl)[i] += g * (probs[i] - (j == targets[static_cast<size_t>(b)] ? S(1) : S(0)));
            }
    });
    return out;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
    S acc = S(0);
    for (int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    Tensor<S> out = Tensor<S>::scalar(acc);
    detail::record<S>(out, "sum", {&x}, [](TensorNode<S>& self) {
        if (auto* gx = detail::parent_grad(self, 0))
            for (auto& g : *gx) g += self.grad[0];
    });
    return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
    const S n = static_cast<S>(x.size());
    S acc = S(0);
    for (int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    Tensor<S> out = Tensor<S>::scalar(acc / n);
    detail::record<S>(out, "mean", {&x}, [n](TensorNode<S>& self) {
        if (auto* gx = detail::parent_grad(self, 0))
            for (auto& g : *gx) g += self.grad[0] / n;
    });
    return out;
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        throw ShapeError("reshape to " + shape_str(shape) + " changes element count");
    Tensor<S> out = Tensor<S>::from_data(std::move(shape), x.values());
    detail::record<S>(out, "reshape", {&x}, [](TensorNode<S>& self) {
        if (auto* gx = detail::parent_grad(self, 0))
            for (size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
    });
    return out;
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& x, int64_t start, int64_t count) {
    if (x.rank() != 2) throw ShapeError("slice_rows expects a rank-2 tensor");
    const int64_t r = x.dim(0), c = x.dim(1);
    if (start < 0 || count < 0 || start + count > r)
        throw ValueError("slice_rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside 0.." + std::to_string(r));
    Tensor<S> out = Tensor<S>::zeros({count, c});
    std::copy_n(x.data() + start * c, count * c, out.data());
    detail::record<S>(out, "slice_rows", {&x}, [start, c](TensorNode<S>& self) {
        if (auto* gx = detail::parent_grad(self, 0))
            for (size_t i = 0; i < self.grad.size(); ++i)
                (*gx)[static_cast<size_t>(start * c) + i] += self.grad[i];
    });
    return out;
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& x, int64_t start, int64_t count) {
    if (x.rank() != 2) throw ShapeError("slice_cols expects a rank-2 tensor");
    const int64_t r = x.dim(0), c = x.dim(1);
    if (start < 0 || count < 0 || start + count > c)
        throw ValueError("slice_cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside 0.." + std::to_string(c));
    Tensor<S> out = Tensor<S>::zeros({r, count});
    for (int64_t i = 0; i < r; ++i)
        std::copy_n(x.data() + i * c + start, count, out.data() + i * count);
    detail::record<S>(out, "slice_cols", {&x}, [r, c, start, count](TensorNode<S>& self) {
        if (auto* gx = detail::parent_grad(self, 0))
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < count; ++j)
                    (*gx)[static_cast<size_t>(i * c + start + j)] += self.grad[static_cast<size_t>(i * count + j)];
    });
    return out;
}

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
    if (parts.empty()) throw ValueError("concat_rows needs at least one tensor");
    const int64_t c = parts[0].dim(1);
    int64_t rows = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(1) != c) throw ShapeError("concat_rows column mismatch");
        rows += p.dim(0);
    }
    Tensor<S> out = Tensor<S>::zeros({rows, c});
    int64_t at = 0;
    bool rg = false;
    for (const auto& p : parts) {
        std::copy_n(p.data(), p.size(), out.data() + at);
        at += p.size();
        rg = rg || p.requires_grad();
    }
    out.node->op = "concat_rows";
    detail::check_finite(out.node->data, "concat_rows");
    if (rg) {
        out.node->requires_grad = true;
        for (const auto& p : parts) out.node->parents.push_back(p.node);
        out.node->backward_fn = [](TensorNode<S>& self) {
            size_t at = 0;
            for (size_t p = 0; p < self.parents.size(); ++p) {
                const size_t n = self.parents[p]->data.size();
                if (auto* g = detail::parent_grad(self, p))
                    for (size_t i = 0; i < n; ++i) (*g)[i] += self.grad[at + i];
                at += n;
            }
        };
    }
    return out;
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
    if (parts.empty()) throw ValueError("concat_cols needs at least one tensor");
    const int64_t r = parts[0].dim(0);
    int64_t cols = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(0) != r) throw ShapeError("concat_cols row mismatch");
        cols += p.dim(1);
    }
    Tensor<S> out = Tensor<S>::zeros({r, cols});
    bool rg = false;
    int64_t at = 0;
    for (const auto& p : parts) {
        const int64_t pc = p.dim(1);
        for (int64_t i = 0; i < r; ++i)
            std::copy_n(p.data() + i * pc, pc, out.data() + i * cols + at);
        at += pc;
        rg = rg || p.requires_grad();
    }
    out.node->op = "concat_cols";
    detail::check_finite(out.node->data, "concat_cols");
    if (rg) {
        out.node->requires_grad = true;
        for (const auto& p : parts) out.node->parents.push_back(p.node);
        out.node->backward_fn = [r, cols](TensorNode<S>& self) {
            int64_t at = 0;
            for (size_t p = 0; p < self.parents.size(); ++p) {
                const int64_t pc = self.parents[p]->shape[1];
                if (auto* g = detail::parent_grad(self, p))
                    for (int64_t i = 0; i < r; ++i)
                        for (int64_t j = 0; j < pc; ++j)
                            (*g)[static_cast<size_t>(i * pc + j)] += self.grad[static_cast<size_t>(i * cols + at + j)];
                at += pc;
            }
        };
    }
    return out;
}

// Inverted dropout; identity when rate == 0.
template <typename S, typename RngT>
Tensor<S> dropout(const Tensor<S>& x, double rate, RngT& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ValueError("dropout rate must be in [0, 1)");
    if (rate == 0.0) return x;
    const S keep = static_cast<S>(1.0 - rate);
    std::vector<S> mask(static_cast<size_t>(x.size()));
    for (auto& m : mask) m = rng.uniform() < rate ? S(0) : S(1) / keep;
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * mask[static_cast<size_t>(i)];
    detail::record<S>(out, "dropout", {&x}, [mask = std::move(mask)](TensorNode<S>& self) {
        if (auto* gx = detail::parent_grad(self, 0))
            for (size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i] * mask[i];
    });
    return out;
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

// The recorded ops reachable from a root, in creation order. Creation order is
// a topological order because every op's parents exist before it does.
template <typename S>
struct ComputationRecord {
    std::vector<TensorNode<S>*> nodes;

    static ComputationRecord reachable_from(TensorNode<S>& root) {
        ComputationRecord rec;
        std::unordered_set<TensorNode<S>*> seen;
        std::vector<TensorNode<S>*> stack{&root};
        seen.insert(&root);
        while (!stack.empty()) {
            TensorNode<S>* n = stack.back();
            stack.pop_back();
            rec.nodes.push_back(n);
            for (auto& p : n->parents)
                if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
        std::sort(rec.nodes.begin(), rec.nodes.end(),
                  [](const TensorNode<S>* a, const TensorNode<S>* b) { return a->id < b->id; });
        return rec;
    }
};

// Populates grads of every requires_grad tensor reachable from `loss`.
// Gradients accumulate additively, both across fan-out within one pass and
// across repeated backward() calls.
template <typename S>
void backward(const Tensor<S>& loss) {
    if (loss.size() != 1)
        throw ValueError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    if (!loss.requires_grad()) throw ValueError("backward() on a tensor with no recorded computation");
    auto rec = ComputationRecord<S>::reachable_from(*loss.node);
    loss.node->ensure_grad();
    loss.node->grad[0] += S(1);
    for (auto it = rec.nodes.rbegin(); it != rec.nodes.rend(); ++it) {
        TensorNode<S>* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

}  // namespace esvt
