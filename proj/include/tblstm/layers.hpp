#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tblstm/config.hpp"
#include "tblstm/ops.hpp"
#include "tblstm/rng.hpp"
#include "tblstm/tensor.hpp"

// Parameterized layers. Every trainable tensor lives in a ParamStore under a
// stable hierarchical name; initialization is derived from (run seed, name),
// so two models built from the same seed initialize shared tensors
// identically regardless of which extra tensors either of them owns. That is
// what makes zeroed-branch ablation comparisons exact.
namespace tblstm {

enum class Init { TruncNormal, Zeros, Ones };

template <typename T>
class ParamStore {
  public:
    struct Entry {
        Tensor<T> tensor;
        bool decay = false;  // weight decay applies (weights yes, biases/norms no)
    };

    explicit ParamStore(uint64_t seed) : seed_(seed) {}

    Tensor<T> create(const std::string& name, std::vector<int64_t> shape, Init init, bool decay) {
        if (entries_.count(name)) throw ContractError("parameter '" + name + "' already exists");
        auto t = Tensor<T>::zeros(std::move(shape));
        if (init == Init::TruncNormal) {
            Pcg32 rng(derive_seed(seed_, name), 0);
            for (auto& v : t.values()) v = static_cast<T>(rng.truncated_normal(0.02));
        } else if (init == Init::Ones) {
            for (auto& v : t.values()) v = T(1);
        }
        t.set_requires_grad(true);
        entries_.emplace(name, Entry{t, decay});
        return t;
    }

    const Tensor<T>& get(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ContractError("no parameter named '" + name + "'");
        return it->second.tensor;
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    // Sorted by name (std::map), which fixes optimizer and checkpoint order.
    const std::map<std::string, Entry>& entries() const { return entries_; }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& [name, e] : entries_) n += e.tensor.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [name, e] : entries_) e.tensor.zero_grad();
    }

    uint64_t seed() const { return seed_; }

  private:
    uint64_t seed_;
    std::map<std::string, Entry> entries_;
};

// Additive attention mask over key positions: 0 keeps, -1e9 drives the
// post-softmax weight to exactly zero (the exponential underflows).
template <typename T>
Tensor<T> make_pad_mask(int64_t seq_len, int64_t valid_len) {
    if (valid_len < 1 || valid_len > seq_len)
        throw ContractError("valid_len " + std::to_string(valid_len) + " outside [1, " +
                            std::to_string(seq_len) + "]");
    auto m = Tensor<T>::zeros({seq_len});
    for (int64_t t = valid_len; t < seq_len; ++t) m.values()[t] = T(-1e9);
    return m;
}

template <typename T>
struct Linear {
    Tensor<T> w, b;

    Linear() = default;
    Linear(ParamStore<T>& ps, const std::string& prefix, int64_t in, int64_t out)
        : w(ps.create(prefix + ".w", {in, out}, Init::TruncNormal, true)),
          b(ps.create(prefix + ".b", {out}, Init::Zeros, false)) {}

    Tensor<T> forward(const Tensor<T>& x) const { return ops::add(ops::matmul(x, w), b); }
};

template <typename T>
struct LayerNormParams {
    Tensor<T> gamma, beta;
    T eps = T(1e-12);

    LayerNormParams() = default;
    LayerNormParams(ParamStore<T>& ps, const std::string& prefix, int64_t h)
        : gamma(ps.create(prefix + ".gamma", {h}, Init::Ones, false)),
          beta(ps.create(prefix + ".beta", {h}, Init::Zeros, false)) {}

    Tensor<T> forward(const Tensor<T>& x) const { return ops::layer_norm(x, gamma, beta, eps); }
};

// Token + position + segment lookup, summed, normalized, dropped out.
template <typename T>
struct Embeddings {
    Tensor<T> token, position, segment;
    LayerNormParams<T> norm;
    T dropout_rate = T(0);

    Embeddings() = default;
    Embeddings(ParamStore<T>& ps, const std::string& prefix, int64_t vocab, int64_t max_pos,
               int64_t h, T dropout)
        : token(ps.create(prefix + ".token", {vocab, h}, Init::TruncNormal, true)),
          position(ps.create(prefix + ".position", {max_pos, h}, Init::TruncNormal, true)),
          segment(ps.create(prefix + ".segment", {2, h}, Init::TruncNormal, true)),
          norm(ps, prefix + ".norm", h),
          dropout_rate(dropout) {}

    Tensor<T> forward(const std::vector<int>& token_ids, const std::vector<int>& segment_ids,
                      bool train = false, Pcg32* rng = nullptr) const {
        if (token_ids.size() != segment_ids.size())
            throw ShapeError("embed: " + std::to_string(token_ids.size()) + " tokens vs " +
                             std::to_string(segment_ids.size()) + " segment ids");
        int64_t s = static_cast<int64_t>(token_ids.size());
        if (s < 1) throw ShapeError("embed: empty sequence");
        if (s > position.dim(0))
            throw ShapeError("embed: sequence length " + std::to_string(s) +
                             " exceeds max positions " + std::to_string(position.dim(0)));
        std::vector<int> pos_ids(static_cast<size_t>(s));
        for (int64_t i = 0; i < s; ++i) pos_ids[static_cast<size_t>(i)] = static_cast<int>(i);
        auto sum = ops::add(ops::add(ops::gather_rows(token, token_ids),
                                     ops::gather_rows(position, pos_ids)),
                            ops::gather_rows(segment, segment_ids));
        return ops::dropout(norm.forward(sum), dropout_rate, rng, train);
    }
};

template <typename T>
struct MultiHeadAttention {
    Linear<T> wq, wk, wv, wo;
    int64_t hidden = 0, num_heads = 0;
    T dropout_rate = T(0);

    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore<T>& ps, const std::string& prefix, int64_t h, int64_t heads,
                       T dropout)
        : wq(ps, prefix + ".wq", h, h),
          wk(ps, prefix + ".wk", h, h),
          wv(ps, prefix + ".wv", h, h),
          wo(ps, prefix + ".wo", h, h),
          hidden(h),
          num_heads(heads),
          dropout_rate(dropout) {
        if (heads < 1 || h % heads != 0)
            throw ConfigError("attention: " + std::to_string(heads) +
                              " heads do not divide hidden " + std::to_string(h));
    }

    // pad_mask: additive [S] mask over keys (see make_pad_mask). attn_probs,
    // when supplied, receives the post-softmax weights per head for tests.
    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& pad_mask, bool train = false,
                      Pcg32* rng = nullptr, std::vector<Tensor<T>>* attn_probs = nullptr) const {
        int64_t s = x.dim(0);
        if (x.dim(1) != hidden)
            throw ShapeError("attention: input " + shape_str(x.shape()) + " vs hidden " +
                             std::to_string(hidden));
        if (pad_mask.numel() != s)
            throw ShapeError("attention: mask " + shape_str(pad_mask.shape()) +
                             " vs sequence length " + std::to_string(s));
        int64_t d = hidden / num_heads;
        auto q = wq.forward(x);
        auto k = wk.forward(x);
        auto v = wv.forward(x);
        T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
        std::vector<Tensor<T>> heads;
        heads.reserve(static_cast<size_t>(num_heads));
        for (int64_t hd = 0; hd < num_heads; ++hd) {
            auto qh = ops::slice(q, 1, hd * d, d);
            auto kh = ops::slice(k, 1, hd * d, d);
            auto vh = ops::slice(v, 1, hd * d, d);
            auto scores = ops::add(ops::scale(ops::matmul_nt(qh, kh), inv_sqrt_d), pad_mask);
            auto probs = ops::softmax(scores, -1);
            if (attn_probs) attn_probs->push_back(probs);
            probs = ops::dropout(probs, dropout_rate, rng, train);
            heads.push_back(ops::matmul(probs, vh));
        }
        return wo.forward(ops::concat(heads, 1));
    }
};

template <typename T>
struct FeedForward {
    Linear<T> w1, w2;

    FeedForward() = default;
    FeedForward(ParamStore<T>& ps, const std::string& prefix, int64_t h, int64_t f)
        : w1(ps, prefix + ".w1", h, f), w2(ps, prefix + ".w2", f, h) {}

    Tensor<T> forward(const Tensor<T>& x) const {
        return w2.forward(ops::gelu(w1.forward(x)));
    }
};

// One LSTM direction with fused gate weights: input map [in x 4h], recurrent
// map [h x 4h], bias [4h], gate column order i, f, g, o.
template <typename T>
struct LstmDirection {
    Tensor<T> wx, wh, b;
    int64_t hidden = 0;

    LstmDirection() = default;
    LstmDirection(ParamStore<T>& ps, const std::string& prefix, int64_t in, int64_t h)
        : wx(ps.create(prefix + ".wx", {in, 4 * h}, Init::TruncNormal, true)),
          wh(ps.create(prefix + ".wh", {h, 4 * h}, Init::TruncNormal, true)),
          b(ps.create(prefix + ".b", {4 * h}, Init::Zeros, false)),
          hidden(h) {}

    // Single cell update: c = f*c_prev + i*g, h = o*tanh(c). All row vectors
    // are [1 x width].
    std::pair<Tensor<T>, Tensor<T>> step(const Tensor<T>& x_t, const Tensor<T>& h_prev,
                                         const Tensor<T>& c_prev) const {
        auto z = ops::add(ops::add(ops::matmul(x_t, wx), ops::matmul(h_prev, wh)), b);
        return gates(z, c_prev);
    }

    // Scan over a [L x in] sequence, zero initial state, returning h_t for
    // every position in input order. The input projection of all positions
    // is batched into one matmul; only the recurrence is stepwise.
    std::vector<Tensor<T>> scan(const Tensor<T>& x, bool reverse) const {
        int64_t len = x.dim(0);
        auto xz = ops::add(ops::matmul(x, wx), b);
        auto h = Tensor<T>::zeros({1, hidden});
        auto c = Tensor<T>::zeros({1, hidden});
        std::vector<Tensor<T>> hs(static_cast<size_t>(len));
        for (int64_t i = 0; i < len; ++i) {
            int64_t t = reverse ? len - 1 - i : i;
            auto z = ops::add(ops::slice(xz, 0, t, 1), ops::matmul(h, wh));
            auto [hn, cn] = gates(z, c);
            h = hn;
            c = cn;
            hs[static_cast<size_t>(t)] = h;
        }
        return hs;
    }

  private:
    std::pair<Tensor<T>, Tensor<T>> gates(const Tensor<T>& z, const Tensor<T>& c_prev) const {
        auto i = ops::sigmoid(ops::slice(z, 1, 0, hidden));
        auto f = ops::sigmoid(ops::slice(z, 1, hidden, hidden));
        auto g = ops::tanh_op(ops::slice(z, 1, 2 * hidden, hidden));
        auto o = ops::sigmoid(ops::slice(z, 1, 3 * hidden, hidden));
        auto c = ops::add(ops::mul(f, c_prev), ops::mul(i, g));
        auto h = ops::mul(o, ops::tanh_op(c));
        return {h, c};
    }
};

// Bidirectional LSTM over the valid (unpadded) prefix of the sequence.
// Output per position is [h_fwd ; h_bwd], width 2h, projected back to the
// input width when a projection is configured. Padded positions never enter
// the recurrence and their output rows are exactly zero. Dropout is left to
// the caller: the enclosing block already drops out every sublayer output,
// and the recurrence itself stays undropped.
template <typename T>
struct Blstm {
    LstmDirection<T> fwd, bwd;
    std::optional<Linear<T>> proj;
    int64_t in_width = 0;

    Blstm() = default;
    Blstm(ParamStore<T>& ps, const std::string& prefix, int64_t in, int64_t h, bool project)
        : fwd(ps, prefix + ".fwd", in, h), bwd(ps, prefix + ".bwd", in, h), in_width(in) {
        if (project)
            proj.emplace(ps, prefix + ".proj", 2 * h, in);
        else if (2 * h != in)
            throw ConfigError("blstm without projection needs 2*" + std::to_string(h) +
                              " == input width " + std::to_string(in));
    }

    int64_t out_width() const { return proj ? in_width : 2 * fwd.hidden; }

    Tensor<T> forward(const Tensor<T>& x, int64_t valid_len) const {
        int64_t s = x.dim(0);
        if (x.dim(1) != in_width)
            throw ShapeError("blstm: input " + shape_str(x.shape()) + " vs expected width " +
                             std::to_string(in_width));
        if (valid_len < 1 || valid_len > s)
            throw ContractError("blstm: valid_len " + std::to_string(valid_len) +
                                " outside [1, " + std::to_string(s) + "]");
        auto xv = valid_len == s ? x : ops::slice(x, 0, 0, valid_len);
        auto hf = fwd.scan(xv, false);
        auto hb = bwd.scan(xv, true);
        std::vector<Tensor<T>> rows(static_cast<size_t>(valid_len));
        for (int64_t t = 0; t < valid_len; ++t)
            rows[static_cast<size_t>(t)] = ops::concat(
                std::vector<Tensor<T>>{hf[static_cast<size_t>(t)], hb[static_cast<size_t>(t)]},
                1);
        auto out = ops::concat(rows, 0);
        if (proj) out = proj->forward(out);
        if (valid_len < s)
            out = ops::concat(
                std::vector<Tensor<T>>{out, Tensor<T>::zeros({s - valid_len, out.dim(1)})}, 0);
        return out;
    }
};

}  // namespace tblstm
