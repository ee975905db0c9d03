#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tblstm/kernels.hpp"
#include "tblstm/rng.hpp"
#include "tblstm/tensor.hpp"

// Differentiable tensor operations. Each op computes its forward value
// through the kernels and, when a tape is active and an input wants
// gradients, records a backward rule that accumulates (+=) into input
// gradients. Broadcasting follows trailing-axis alignment: dimensions are
// matched from the last axis backwards and must be equal or 1; nothing else
// is expanded implicitly.
namespace tblstm::ops {

namespace detail {

template <typename T>
bool wants_grad(const Tensor<T>& t) {
    return t.requires_grad();
}

template <typename T, typename... Rest>
bool wants_grad(const Tensor<T>& t, const Rest&... rest) {
    return t.requires_grad() || wants_grad(rest...);
}

template <typename T, typename Fn>
void finish(Tensor<T>& out, const char* op, bool needs, Fn&& backward_rule) {
    if (finite_checks()) out.check_finite(op);
    Tape<T>* tape = Tape<T>::current();
    if (tape && needs) {
        out.set_requires_grad(true);
        out.stamp(tape->epoch());
        tape->record(std::forward<Fn>(backward_rule));
    }
}

inline std::vector<int64_t> broadcast_shape(const std::vector<int64_t>& a,
                                            const std::vector<int64_t>& b) {
    size_t nd = std::max(a.size(), b.size());
    std::vector<int64_t> out(nd);
    for (size_t i = 0; i < nd; ++i) {
        int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
        int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
        if (da != db && da != 1 && db != 1)
            throw ShapeError("broadcast: incompatible shapes " + shape_str(a) + " and " +
                             shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// Per-axis element strides of `shape` aligned to `out`, 0 on broadcast axes.
inline std::vector<int64_t> bcast_strides(const std::vector<int64_t>& shape,
                                          const std::vector<int64_t>& out) {
    std::vector<int64_t> strides(out.size(), 0);
    int64_t s = 1;
    for (size_t i = 0; i < shape.size(); ++i) {
        size_t ri = shape.size() - 1 - i;
        size_t ro = out.size() - 1 - i;
        strides[ro] = shape[ri] == 1 ? 0 : s;
        s *= shape[ri];
    }
    return strides;
}

// Accumulate the output-shaped gradient back onto an input that may have
// been broadcast. Serial: collisions on expanded axes are expected.
template <typename T>
void reduce_grad(std::span<const T> g, const std::vector<int64_t>& out_shape,
                 const std::vector<int64_t>& in_shape, std::span<T> gin) {
    auto strides = bcast_strides(in_shape, out_shape);
    int64_t n = static_cast<int64_t>(g.size());
    int nd = static_cast<int>(out_shape.size());
    for (int64_t idx = 0; idx < n; ++idx) {
        int64_t rem = idx, ii = 0;
        for (int d = nd - 1; d >= 0; --d) {
            int64_t coord = rem % out_shape[d];
            rem /= out_shape[d];
            ii += coord * strides[d];
        }
        gin[ii] += g[idx];
    }
}

}  // namespace detail

// ---- matrix products ----

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto out = Tensor<T>::zeros({m, n});
    kernels::gemm_nn(m, n, k, a.values().data(), b.values().data(), out.values().data(), false);
    detail::finish(out, "matmul", detail::wants_grad(a, b), [a, b, out, m, n, k]() mutable {
        if (!out.has_grad()) return;
        const T* g = out.grad_view().data();
        if (a.requires_grad())
            kernels::gemm_nt(m, k, n, g, b.values().data(), a.grad().data(), true);
        if (b.requires_grad())
            kernels::gemm_tn(k, n, m, a.values().data(), g, b.grad().data(), true);
    });
    return out;
}

// a [m x k] times b[n x k] transposed -> [m x n]. Used for attention scores
// and the tied embedding projection, where the right operand is stored
// untransposed.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    auto out = Tensor<T>::zeros({m, n});
    kernels::gemm_nt(m, n, k, a.values().data(), b.values().data(), out.values().data(), false);
    detail::finish(out, "matmul_nt", detail::wants_grad(a, b), [a, b, out, m, n, k]() mutable {
        if (!out.has_grad()) return;
        const T* g = out.grad_view().data();
        if (a.requires_grad())
            kernels::gemm_nn(m, k, n, g, b.values().data(), a.grad().data(), true);
        if (b.requires_grad())
            kernels::gemm_tn(n, k, m, g, a.values().data(), b.grad().data(), true);
    });
    return out;
}

// ---- broadcasting binary ops ----

namespace detail {

template <typename T>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, Binary op, const char* name) {
    if (a.shape() == b.shape()) {
        auto out = Tensor<T>::zeros(a.shape());
        kernels::binary(a.numel(), a.values().data(), b.values().data(), out.values().data(), op);
        finish(out, name, wants_grad(a, b), [a, b, out, op]() mutable {
            if (!out.has_grad()) return;
            auto g = out.grad_view();
            int64_t n = static_cast<int64_t>(g.size());
            if (a.requires_grad()) {
                auto ga = a.grad();
                for (int64_t i = 0; i < n; ++i) {
                    T gi = op == Binary::Mul ? g[i] * b.values()[i] : g[i];
                    ga[i] += gi;
                }
            }
            if (b.requires_grad()) {
                auto gb = b.grad();
                for (int64_t i = 0; i < n; ++i) {
                    T gi = g[i];
                    if (op == Binary::Mul) gi *= a.values()[i];
                    if (op == Binary::Sub) gi = -gi;
                    gb[i] += gi;
                }
            }
        });
        return out;
    }
    auto out_shape = broadcast_shape(a.shape(), b.shape());
    auto out = Tensor<T>::zeros(out_shape);
    auto astr = bcast_strides(a.shape(), out_shape);
    auto bstr = bcast_strides(b.shape(), out_shape);
    kernels::binary_bcast(out.numel(), static_cast<int>(out_shape.size()), out_shape.data(),
                          astr.data(), bstr.data(), a.values().data(), b.values().data(),
                          out.values().data(), op);
    finish(out, name, wants_grad(a, b), [a, b, out, op, out_shape, astr, bstr]() mutable {
        if (!out.has_grad()) return;
        auto g = out.grad_view();
        int64_t n = static_cast<int64_t>(g.size());
        int nd = static_cast<int>(out_shape.size());
        auto scatter = [&](const Tensor<T>& self, const Tensor<T>& other,
                           const std::vector<int64_t>& sstr, const std::vector<int64_t>& ostr,
                           bool is_left) mutable {
            Tensor<T> self_m = self;
            auto gs = self_m.grad();
            for (int64_t idx = 0; idx < n; ++idx) {
                int64_t rem = idx, si = 0, oi = 0;
                for (int d = nd - 1; d >= 0; --d) {
                    int64_t coord = rem % out_shape[d];
                    rem /= out_shape[d];
                    si += coord * sstr[d];
                    oi += coord * ostr[d];
                }
                T gi = g[idx];
                if (op == Binary::Mul) gi *= other.values()[oi];
                if (op == Binary::Sub && !is_left) gi = -gi;
                gs[si] += gi;
            }
        };
        if (a.requires_grad()) scatter(a, b, astr, bstr, true);
        if (b.requires_grad()) scatter(b, a, bstr, astr, false);
    });
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, Binary::Add, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, Binary::Sub, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(a, b, Binary::Mul, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    auto out = Tensor<T>::zeros(a.shape());
    auto x = a.values();
    auto y = out.values();
    for (int64_t i = 0; i < a.numel(); ++i) y[i] = c * x[i];
    detail::finish(out, "scale", a.requires_grad(), [a, out, c]() mutable {
        if (!out.has_grad()) return;
        auto g = out.grad_view();
        auto ga = a.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
    return out;
}

// ---- unary maps ----

namespace detail {

template <typename T>
Tensor<T> unary_op(const Tensor<T>& a, Unary op, const char* name) {
    auto out = Tensor<T>::zeros(a.shape());
    kernels::unary(a.numel(), a.values().data(), out.values().data(), op);
    finish(out, name, a.requires_grad(), [a, out, op]() mutable {
        if (!out.has_grad()) return;
        kernels::unary_grad(a.numel(), a.values().data(), out.values().data(),
                            out.grad_view().data(), a.grad().data(), op);
    });
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& a) {
    return detail::unary_op(a, Unary::Tanh, "tanh");
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return detail::unary_op(a, Unary::Sigmoid, "sigmoid");
}
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    return detail::unary_op(a, Unary::Gelu, "gelu");
}
template <typename T>
Tensor<T> exp_op(const Tensor<T>& a) {
    return detail::unary_op(a, Unary::Exp, "exp");
}
template <typename T>
Tensor<T> log_op(const Tensor<T>& a) {
    return detail::unary_op(a, Unary::Log, "log");
}

// ---- softmax ----

// Normalizes along `axis` (negative counts from the end). The last-axis case
// is the hot path and goes through the row kernels; other axes take a strided
// slice walk.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis = -1) {
    int nd = static_cast<int>(a.ndim());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd)
        throw ShapeError("softmax: axis out of range for " + shape_str(a.shape()));
    auto out = Tensor<T>::zeros(a.shape());
    int64_t c = a.dim(axis);
    int64_t inner = 1;
    for (int d = axis + 1; d < nd; ++d) inner *= a.dim(d);
    int64_t outer = a.numel() / (c * inner);
    if (inner == 1) {
        kernels::softmax_rows(outer, c, a.values().data(), out.values().data());
    } else {
        auto x = a.values();
        auto y = out.values();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < inner; ++i) {
                const T* xs = x.data() + o * c * inner + i;
                T* ys = y.data() + o * c * inner + i;
                T mx = xs[0];
                for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xs[j * inner]);
                T sum = T(0);
                for (int64_t j = 0; j < c; ++j) {
                    ys[j * inner] = std::exp(xs[j * inner] - mx);
                    sum += ys[j * inner];
                }
                for (int64_t j = 0; j < c; ++j) ys[j * inner] /= sum;
            }
    }
    detail::finish(out, "softmax", a.requires_grad(), [a, out, c, inner, outer]() mutable {
        if (!out.has_grad()) return;
        if (inner == 1) {
            kernels::softmax_rows_grad(outer, c, out.values().data(), out.grad_view().data(),
                                       a.grad().data());
            return;
        }
        auto y = out.values();
        auto gy = out.grad_view();
        auto gx = a.grad();
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < inner; ++i) {
                int64_t base = o * c * inner + i;
                T dot = T(0);
                for (int64_t j = 0; j < c; ++j) dot += gy[base + j * inner] * y[base + j * inner];
                for (int64_t j = 0; j < c; ++j)
                    gx[base + j * inner] += y[base + j * inner] * (gy[base + j * inner] - dot);
            }
    });
    return out;
}

// ---- layer norm over the last axis ----

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    int64_t h = x.dim(x.ndim() - 1);
    if (gamma.numel() != h || beta.numel() != h)
        throw ShapeError("layer_norm: input " + shape_str(x.shape()) + " vs gamma " +
                         shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
    int64_t rows = x.numel() / h;
    auto out = Tensor<T>::zeros(x.shape());
    auto mean = std::make_shared<std::vector<T>>(rows);
    auto rstd = std::make_shared<std::vector<T>>(rows);
    kernels::layer_norm_rows(rows, h, x.values().data(), gamma.values().data(),
                             beta.values().data(), eps, out.values().data(), mean->data(),
                             rstd->data());
    detail::finish(out, "layer_norm", detail::wants_grad(x, gamma, beta),
                   [x, gamma, beta, out, mean, rstd, rows, h]() mutable {
                       if (!out.has_grad()) return;
                       const T* gy = out.grad_view().data();
                       T* gx = x.requires_grad() ? x.grad().data() : nullptr;
                       T* gg = gamma.requires_grad() ? gamma.grad().data() : nullptr;
                       T* gb = beta.requires_grad() ? beta.grad().data() : nullptr;
                       kernels::layer_norm_rows_grad(rows, h, x.values().data(),
                                                     gamma.values().data(), mean->data(),
                                                     rstd->data(), gy, gx, gg, gb);
                   });
    return out;
}

// ---- reductions ----

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    T s = T(0);
    for (T v : a.values()) s += v;
    auto out = Tensor<T>::scalar(s);
    detail::finish(out, "sum_all", a.requires_grad(), [a, out]() mutable {
        if (!out.has_grad()) return;
        T g = out.grad_view()[0];
        auto ga = a.grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
    return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
    return scale(sum_all(a), T(1) / static_cast<T>(a.numel()));
}

// ---- shape surgery (copies, no views) ----

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    int nd = static_cast<int>(parts[0].ndim());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw ShapeError("concat: axis out of range");
    std::vector<int64_t> out_shape = parts[0].shape();
    int64_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != nd) throw ShapeError("concat: rank mismatch");
        for (int d = 0; d < nd; ++d)
            if (d != axis && p.dim(d) != out_shape[static_cast<size_t>(d)])
                throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(parts[0].shape()));
        axis_total += p.dim(axis);
    }
    out_shape[static_cast<size_t>(axis)] = axis_total;
    auto out = Tensor<T>::zeros(out_shape);
    int64_t inner = 1;
    for (int d = axis + 1; d < nd; ++d) inner *= out_shape[static_cast<size_t>(d)];
    int64_t outer = out.numel() / (axis_total * inner);
    int64_t offset = 0;
    for (const auto& p : parts) {
        int64_t block = p.dim(axis) * inner;
        for (int64_t o = 0; o < outer; ++o)
            std::copy_n(p.values().data() + o * block, block,
                        out.values().data() + o * axis_total * inner + offset * inner);
        offset += p.dim(axis);
    }
    bool needs = false;
    for (const auto& p : parts) needs = needs || p.requires_grad();
    detail::finish(out, "concat", needs, [parts, out, axis_total, inner, outer]() mutable {
        if (!out.has_grad()) return;
        auto g = out.grad_view();
        int64_t offset = 0;
        for (auto p : parts) {
            int64_t block = p.numel() / outer;
            if (p.requires_grad()) {
                auto gp = p.grad();
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t i = 0; i < block; ++i)
                        gp[o * block + i] += g[o * axis_total * inner + offset * inner + i];
            }
            offset += block / inner;
        }
    });
    return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, int64_t start, int64_t len) {
    int nd = static_cast<int>(a.ndim());
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) throw ShapeError("slice: axis out of range");
    if (start < 0 || len <= 0 || start + len > a.dim(axis))
        throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for " +
                         shape_str(a.shape()));
    std::vector<int64_t> out_shape = a.shape();
    out_shape[static_cast<size_t>(axis)] = len;
    auto out = Tensor<T>::zeros(out_shape);
    int64_t inner = 1;
    for (int d = axis + 1; d < nd; ++d) inner *= a.dim(d);
    int64_t axis_in = a.dim(axis);
    int64_t outer = a.numel() / (axis_in * inner);
    for (int64_t o = 0; o < outer; ++o)
        std::copy_n(a.values().data() + (o * axis_in + start) * inner, len * inner,
                    out.values().data() + o * len * inner);
    detail::finish(out, "slice", a.requires_grad(),
                   [a, out, start, len, inner, axis_in, outer]() mutable {
                       if (!out.has_grad()) return;
                       auto g = out.grad_view();
                       auto ga = a.grad();
                       for (int64_t o = 0; o < outer; ++o)
                           for (int64_t i = 0; i < len * inner; ++i)
                               ga[(o * axis_in + start) * inner + i] += g[o * len * inner + i];
                   });
    return out;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
    if (a.ndim() != 2) throw ShapeError("transpose2d: need 2-d, got " + shape_str(a.shape()));
    int64_t m = a.dim(0), n = a.dim(1);
    auto out = Tensor<T>::zeros({n, m});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.values()[j * m + i] = a.values()[i * n + j];
    detail::finish(out, "transpose2d", a.requires_grad(), [a, out, m, n]() mutable {
        if (!out.has_grad()) return;
        auto g = out.grad_view();
        auto ga = a.grad();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
    return out;
}

// ---- indexed access ----

// out[i, :] = table[ids[i], :]. Backward scatter-adds row gradients, so a row
// gathered twice accumulates both contributions.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::vector<int> ids) {
    if (table.ndim() != 2) throw ShapeError("gather_rows: table must be 2-d");
    int64_t rows = table.dim(0), c = table.dim(1);
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] < 0 || ids[i] >= rows)
            throw VocabError("gather_rows: id " + std::to_string(ids[i]) + " at position " +
                             std::to_string(i) + " out of range [0, " + std::to_string(rows) +
                             ")");
    auto out = Tensor<T>::zeros({static_cast<int64_t>(ids.size()), c});
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(table.values().data() + ids[i] * c, c, out.values().data() + i * c);
    detail::finish(out, "gather_rows", table.requires_grad(), [table, out, ids, c]() mutable {
        if (!out.has_grad()) return;
        auto g = out.grad_view();
        auto gt = table.grad();
        for (size_t i = 0; i < ids.size(); ++i)
            for (int64_t j = 0; j < c; ++j) gt[ids[i] * c + j] += g[i * c + j];
    });
    return out;
}

// ---- losses ----

// Mean cross-entropy from raw logits [n x classes] against integer labels.
// Stable log-sum-exp; backward is (softmax - onehot) / n.
template <typename T>
Tensor<T> cross_entropy_mean(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy: logits must be 2-d");
    int64_t n = logits.dim(0), c = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != n)
        throw ContractError("cross_entropy: " + std::to_string(n) + " rows vs " +
                            std::to_string(labels.size()) + " labels");
    for (int label : labels)
        if (label < 0 || label >= c)
            throw ContractError("cross_entropy: label " + std::to_string(label) +
                                " out of range [0, " + std::to_string(c) + ")");
    auto lse = std::make_shared<std::vector<T>>(n);
    T total = T(0);
    auto x = logits.values();
    for (int64_t i = 0; i < n; ++i) {
        const T* xi = x.data() + i * c;
        T mx = xi[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
        T s = T(0);
        for (int64_t j = 0; j < c; ++j) s += std::exp(xi[j] - mx);
        (*lse)[i] = mx + std::log(s);
        total += (*lse)[i] - xi[labels[i]];
    }
    auto out = Tensor<T>::scalar(total / static_cast<T>(n));
    detail::finish(out, "cross_entropy", logits.requires_grad(),
                   [logits, out, labels, lse, n, c]() mutable {
                       if (!out.has_grad()) return;
                       T g = out.grad_view()[0] / static_cast<T>(n);
                       auto x = logits.values();
                       auto gx = logits.grad();
                       for (int64_t i = 0; i < n; ++i) {
                           const T* xi = x.data() + i * c;
                           for (int64_t j = 0; j < c; ++j) {
                               T p = std::exp(xi[j] - (*lse)[i]);
                               gx[i * c + j] += g * (p - (j == labels[i] ? T(1) : T(0)));
                           }
                       }
                   });
    return out;
}

// ---- dropout ----

// Inverted dropout: keep with probability 1-rate and scale by 1/(1-rate).
// One uniform draw per element in row-major order, so the rng stream is
// reproducible. Identity (and no rng consumption) when not training.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, T rate, Pcg32* rng, bool training) {
    if (!training || rate <= T(0)) return a;
    if (rate >= T(1)) throw ContractError("dropout: rate must be < 1");
    if (!rng) throw ContractError("dropout: training mode requires an rng");
    T keep = T(1) - rate;
    T inv = T(1) / keep;
    auto mask = std::make_shared<std::vector<T>>(a.numel());
    for (auto& m : *mask) m = rng->next_double() < static_cast<double>(keep) ? inv : T(0);
    auto out = Tensor<T>::zeros(a.shape());
    auto x = a.values();
    auto y = out.values();
    for (int64_t i = 0; i < a.numel(); ++i) y[i] = x[i] * (*mask)[i];
    detail::finish(out, "dropout", a.requires_grad(), [a, out, mask]() mutable {
        if (!out.has_grad()) return;
        auto g = out.grad_view();
        auto ga = a.grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*mask)[i];
    });
    return out;
}

}  // namespace tblstm::ops
