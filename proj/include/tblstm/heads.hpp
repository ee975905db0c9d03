#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tblstm/layers.hpp"

// Output heads. The masked-token head shares its output projection with the
// token embedding table (same storage, counted once); the sentence-level
// heads read position 0 through a tanh pooler; the span head optionally runs
// a 2-layer recurrent decoder before its per-position start/end logits.
namespace tblstm {

template <typename T>
struct MlmHead {
    Linear<T> transform;
    LayerNormParams<T> norm;
    Tensor<T> bias;        // per-vocabulary-entry output bias
    Tensor<T> tied_table;  // handle onto the embedding table, not a new parameter

    MlmHead() = default;
    MlmHead(ParamStore<T>& ps, const std::string& prefix, const Tensor<T>& embedding_table,
            int64_t h)
        : transform(ps, prefix + ".transform", h, h),
          norm(ps, prefix + ".norm", h),
          bias(ps.create(prefix + ".bias", {embedding_table.dim(0)}, Init::Zeros, false)),
          tied_table(embedding_table) {}

    // Logits over the vocabulary for the given (masked) positions.
    Tensor<T> logits(const Tensor<T>& hidden, const std::vector<int>& positions) const {
        auto picked = ops::gather_rows(hidden, positions);
        auto t = norm.forward(ops::gelu(transform.forward(picked)));
        return ops::add(ops::matmul_nt(t, tied_table), bias);
    }

    Tensor<T> loss(const Tensor<T>& hidden, const std::vector<int>& positions,
                   const std::vector<int>& labels) const {
        if (positions.empty())
            throw ContractError("mlm loss: no masked positions (batch construction must "
                                "guarantee at least one)");
        return ops::cross_entropy_mean(logits(hidden, positions), labels);
    }
};

// tanh(W h[0] + b): the sequence-level representation read from [CLS].
template <typename T>
struct Pooler {
    Linear<T> dense;

    Pooler() = default;
    Pooler(ParamStore<T>& ps, const std::string& prefix, int64_t h)
        : dense(ps, prefix + ".dense", h, h) {}

    Tensor<T> forward(const Tensor<T>& hidden) const {
        return ops::tanh_op(dense.forward(ops::slice(hidden, 0, 0, 1)));
    }
};

template <typename T>
struct NspHead {
    Pooler<T> pool;
    Linear<T> out;

    NspHead() = default;
    NspHead(ParamStore<T>& ps, const std::string& prefix, int64_t h)
        : pool(ps, prefix + ".pool", h), out(ps, prefix + ".out", h, 2) {}

    Tensor<T> logits(const Tensor<T>& hidden) const { return out.forward(pool.forward(hidden)); }

    // label: 1 = the second segment really followed the first, 0 = random.
    Tensor<T> loss(const Tensor<T>& hidden, int label) const {
        return ops::cross_entropy_mean(logits(hidden), {label});
    }
};

template <typename T>
struct ClassifierHead {
    // declared first so a bad class count throws before any parameter is registered
    int64_t num_classes = 0;
    Pooler<T> pool;
    Linear<T> out;

    ClassifierHead() = default;
    ClassifierHead(ParamStore<T>& ps, const std::string& prefix, int64_t h, int64_t classes)
        : num_classes(classes < 2 ? throw ConfigError("classifier needs >= 2 classes")
                                  : classes),
          pool(ps, prefix + ".pool", h), out(ps, prefix + ".out", h, classes) {}

    Tensor<T> logits(const Tensor<T>& hidden) const { return out.forward(pool.forward(hidden)); }

    Tensor<T> loss(const Tensor<T>& hidden, int label) const {
        return ops::cross_entropy_mean(logits(hidden), {label});
    }

    int predict(const Tensor<T>& hidden) const {
        auto l = logits(hidden);
        int best = 0;
        for (int64_t c = 1; c < num_classes; ++c)
            if (l.values()[c] > l.values()[best]) best = static_cast<int>(c);
        return best;
    }
};

// Two stacked full-width BLSTM layers, each projected back to H.
template <typename T>
struct BlstmDecoder {
    Blstm<T> l1, l2;

    BlstmDecoder() = default;
    BlstmDecoder(ParamStore<T>& ps, const std::string& prefix, int64_t h)
        : l1(ps, prefix + ".l1", h, h, true), l2(ps, prefix + ".l2", h, h, true) {}

    Tensor<T> forward(const Tensor<T>& hidden, int64_t valid_len) const {
        return l2.forward(l1.forward(hidden, valid_len), valid_len);
    }
};

template <typename T>
struct SpanHead {
    std::optional<BlstmDecoder<T>> decoder;
    Linear<T> out;  // per position: column 0 start logit, column 1 end logit

    SpanHead() = default;
    SpanHead(ParamStore<T>& ps, const std::string& prefix, int64_t h, bool with_decoder)
        : out(ps, prefix + ".out", h, 2) {
        if (with_decoder) decoder.emplace(ps, prefix + ".decoder", h);
    }

    // Start and end logits over positions, each shaped [1 x S] so a position
    // is a class for the cross-entropy below.
    std::pair<Tensor<T>, Tensor<T>> logits(const Tensor<T>& hidden, int64_t valid_len) const {
        auto h = decoder ? decoder->forward(hidden, valid_len) : hidden;
        auto se = out.forward(h);
        auto start = ops::transpose2d(ops::slice(se, 1, 0, 1));
        auto end = ops::transpose2d(ops::slice(se, 1, 1, 1));
        return {start, end};
    }

    Tensor<T> loss(const Tensor<T>& hidden, int64_t valid_len, int start_label,
                   int end_label) const {
        int64_t s = hidden.dim(0);
        if (start_label < 0 || end_label < start_label || end_label >= s)
            throw ContractError("span labels (" + std::to_string(start_label) + ", " +
                                std::to_string(end_label) + ") violate 0 <= start <= end < " +
                                std::to_string(s));
        auto [start, end] = logits(hidden, valid_len);
        return ops::scale(ops::add(ops::cross_entropy_mean(start, {start_label}),
                                   ops::cross_entropy_mean(end, {end_label})),
                          T(0.5));
    }

    // Best span by start_logit + end_logit subject to
    // start <= end <= start + max_span, searched over the valid prefix.
    std::pair<int, int> decode(const Tensor<T>& hidden, int64_t valid_len,
                               int64_t max_span = 30) const {
        auto [start, end] = logits(hidden, valid_len);
        int bs = 0, be = 0;
        T best = std::numeric_limits<T>::lowest();
        for (int64_t i = 0; i < valid_len; ++i)
            for (int64_t j = i; j < std::min(valid_len, i + max_span + 1); ++j) {
                T score = start.values()[i] + end.values()[j];
                if (score > best) {
                    best = score;
                    bs = static_cast<int>(i);
                    be = static_cast<int>(j);
                }
            }
        return {bs, be};
    }
};

}  // namespace tblstm
