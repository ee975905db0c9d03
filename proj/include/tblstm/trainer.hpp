#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "tblstm/checkpoint.hpp"
#include "tblstm/data.hpp"
#include "tblstm/model.hpp"
#include "tblstm/synthetic.hpp"
#include "tblstm/train.hpp"

// Training loops. One optimizer thread owns the parameters; kernels fan out
// over elements inside each op, never across steps, so a step's arithmetic
// is a pure function of (params, batch, rng states) and resuming from a
// checkpoint is bitwise indistinguishable from never stopping.
namespace tblstm {

struct PretrainHyper {
    int64_t steps = 1000;   // desk budget; the reference scale never states one
    int64_t batch_size = 256;
    int64_t max_len = 256;
    double lr = 1e-4;
    double mask_rate = 0.15;
    bool per_piece = false;
    int64_t checkpoint_every = 0;  // extra saves every N steps; 0 saves only at the end
    std::string checkpoint_path;   // empty disables checkpointing entirely

    void validate() const {
        if (steps < 1) throw ConfigError("pretrain: steps must be >= 1");
        if (batch_size < 1) throw ConfigError("pretrain: batch_size must be >= 1");
        if (max_len < 5) throw ConfigError("pretrain: max_len must hold [CLS] a [SEP] b [SEP]");
        if (lr <= 0) throw ConfigError("pretrain: lr must be positive");
        if (mask_rate <= 0 || mask_rate >= 1) throw ConfigError("pretrain: mask_rate in (0,1)");
        if (checkpoint_every < 0) throw ConfigError("pretrain: checkpoint_every must be >= 0");
    }
};

// MLM + NSP pretraining over a sentence-pair corpus. Each step draws a fresh
// batch, averages per-example losses, and takes one Adam step. The logged
// total is the exact sum of the logged mlm and nsp values: total is computed
// by adding those two loss tensors, not by a separate reduction.
template <typename T>
class Pretrainer {
  public:
    Pretrainer(Model<T>& model, const Corpus& corpus, const Vocab& vocab, PretrainHyper hyper,
               uint64_t seed)
        : model_(model),
          corpus_(corpus),
          vocab_(vocab),
          hyper_(hyper),
          opt_(AdamConfig{.lr = hyper.lr}),
          data_rng_(derive_seed(seed, "pretrain.data"), 1),
          dropout_rng_(derive_seed(seed, "pretrain.dropout"), 2) {
        hyper_.validate();
        if (!model_.mlm || !model_.nsp)
            throw ContractError("pretrainer needs a model built for the pretraining task");
        if (hyper_.max_len > model_.cfg.max_positions)
            throw ConfigError("pretrain: max_len " + std::to_string(hyper_.max_len) +
                              " exceeds the model's " + std::to_string(model_.cfg.max_positions) +
                              " positions");
        if (static_cast<int64_t>(vocab_.size()) > model_.cfg.vocab_size)
            throw ConfigError("pretrain: vocab has " + std::to_string(vocab_.size()) +
                              " entries, model embeds " + std::to_string(model_.cfg.vocab_size));
    }

    // One optimizer step. Throws NumericError naming the step and batch if
    // the loss (or any checked op before it) goes non-finite.
    MetricsRecord step() {
        auto t0 = std::chrono::steady_clock::now();
        int64_t this_step = step_ + 1;  // 1-based, doubles as the batch id
        auto examples = sample_pretrain_examples(corpus_, vocab_, data_rng_, hyper_.batch_size,
                                                 hyper_.max_len, hyper_.mask_rate,
                                                 hyper_.per_piece);
        auto batch = make_batch(examples, hyper_.max_len);
        MetricsRecord rec;
        try {
            Tape<T> tape;
            Tensor<T> mlm_sum, nsp_sum;
            for (size_t i = 0; i < batch.examples.size(); ++i) {
                const auto& ex = batch.examples[i];
                auto hidden = model_.encode(ex.tokens, ex.segments, batch.valid_lens[i],
                                            /*train=*/true, &dropout_rng_);
                auto ml = model_.mlm->loss(hidden, ex.mlm_positions, ex.mlm_labels);
                auto nl = model_.nsp->loss(hidden, ex.nsp_label);
                mlm_sum = i ? ops::add(mlm_sum, ml) : ml;
                nsp_sum = i ? ops::add(nsp_sum, nl) : nl;
            }
            T inv = T(1) / static_cast<T>(batch.examples.size());
            auto mlm_mean = ops::scale(mlm_sum, inv);
            auto nsp_mean = ops::scale(nsp_sum, inv);
            auto total = ops::add(mlm_mean, nsp_mean);
            if (!std::isfinite(static_cast<double>(total.item())))
                throw NumericError("loss is not finite");
            model_.params.zero_grads();
            tape.backward(total);
            rec.total = static_cast<double>(total.item());
            rec.mlm = static_cast<double>(mlm_mean.item());
            rec.nsp = static_cast<double>(nsp_mean.item());
        } catch (const NumericError& e) {
            throw NumericError("pretraining aborted at step " + std::to_string(this_step) +
                               ", batch " + std::to_string(this_step) + ": " + e.what());
        }
        rec.lr = lr_at(this_step, hyper_.steps, hyper_.lr);
        opt_.step(model_.params, rec.lr);
        step_ = this_step;
        rec.step = step_;
        rec.ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
        return rec;
    }

    // Runs the remaining budget, appending metrics and honoring the
    // checkpoint cadence. Returns every record it produced.
    std::vector<MetricsRecord> run(MetricsWriter* metrics = nullptr) {
        std::vector<MetricsRecord> records;
        while (step_ < hyper_.steps) {
            auto rec = step();
            if (metrics) metrics->write(rec);
            records.push_back(rec);
            if (!hyper_.checkpoint_path.empty() && hyper_.checkpoint_every > 0 &&
                step_ % hyper_.checkpoint_every == 0 && step_ < hyper_.steps)
                save(hyper_.checkpoint_path);
        }
        if (!hyper_.checkpoint_path.empty()) save(hyper_.checkpoint_path);
        return records;
    }

    void save(const std::string& path) const {
        save_checkpoint(path, model_.cfg, model_.params, opt_, data_rng_, dropout_rng_, step_);
    }

    void resume(const std::string& path) {
        step_ = load_checkpoint(path, model_.cfg, model_.params, opt_, data_rng_, dropout_rng_);
    }

    int64_t steps_done() const { return step_; }
    const Adam<T>& optimizer() const { return opt_; }

  private:
    Model<T>& model_;
    const Corpus& corpus_;
    const Vocab& vocab_;
    PretrainHyper hyper_;
    Adam<T> opt_;
    Pcg32 data_rng_;
    Pcg32 dropout_rng_;
    int64_t step_ = 0;
};

struct FinetuneHyper {
    double lr = 3e-5;       // reference default; toy runs usually raise it
    int64_t batch_size = 12;
    int64_t epochs = 2;
    int64_t max_len = 64;

    void validate() const {
        if (lr <= 0) throw ConfigError("finetune: lr must be positive");
        if (batch_size < 1) throw ConfigError("finetune: batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("finetune: epochs must be >= 1");
        if (max_len < 3) throw ConfigError("finetune: max_len must hold [CLS] x [SEP]");
    }
};

namespace detail {

inline std::string join_words(const std::vector<std::string>& words) {
    std::string s;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) s += ' ';
        s += words[i];
    }
    return s;
}

// Token index range covering words [wstart, wend] of the tokenized sentence,
// shifted by one for the [CLS] a single-segment input prepends. Wordpiece
// may split a word into several tokens; the range covers all of them.
inline std::pair<int, int> word_span_tokens(const Tokenized& tok, int wstart, int wend) {
    int word = -1, tstart = -1, tend = -1;
    for (size_t t = 0; t < tok.ids.size(); ++t) {
        if (tok.begins[t]) ++word;
        if (word == wstart && tstart < 0) tstart = static_cast<int>(t);
        if (word <= wend) tend = static_cast<int>(t);
    }
    if (tstart < 0 || tend < tstart)
        throw ContractError("span labels (" + std::to_string(wstart) + ", " +
                            std::to_string(wend) + ") fall outside the tokenized sentence");
    return {tstart + 1, tend + 1};
}

}  // namespace detail

// Fraction of examples whose predicted class matches the label, evaluated
// with dropout off.
template <typename T>
double classify_accuracy(Model<T>& model, const std::vector<ClassifyExample>& data,
                         const Vocab& vocab, int64_t max_len = 64) {
    if (!model.classifier) throw ContractError("classify accuracy needs a classification model");
    if (data.empty()) throw ContractError("classify accuracy over an empty set");
    int64_t hits = 0;
    for (const auto& ex : data) {
        auto seg = build_single_segment(tokenize(detail::join_words(ex.words), vocab), max_len);
        auto hidden = model.encode(seg.tokens, seg.segments,
                                   static_cast<int64_t>(seg.tokens.size()));
        if (model.classifier->predict(hidden) == ex.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

// Fraction of examples whose constrained-decoded span equals the label span
// exactly (both endpoints), evaluated with dropout off.
template <typename T>
double span_exact_match(Model<T>& model, const std::vector<SpanExample>& data, const Vocab& vocab,
                        int64_t max_len = 64) {
    if (!model.span) throw ContractError("span exact match needs a span model");
    if (data.empty()) throw ContractError("span exact match over an empty set");
    int64_t hits = 0;
    for (const auto& ex : data) {
        auto tok = tokenize(detail::join_words(ex.words), vocab);
        auto [ts, te] = detail::word_span_tokens(tok, static_cast<int>(ex.start),
                                                 static_cast<int>(ex.end));
        auto seg = build_single_segment(tok, max_len);
        int64_t len = static_cast<int64_t>(seg.tokens.size());
        if (te >= len - 1) throw ContractError("span label truncated away; raise max_len");
        auto hidden = model.encode(seg.tokens, seg.segments, len);
        if (model.span->decode(hidden, len) == std::pair<int, int>(ts, te)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace detail {

// Shared fine-tuning skeleton: shuffled epochs, per-batch mean loss, Adam
// with the warmup/decay schedule over the whole run. `example_loss` maps an
// example index to its loss tensor for the current mode.
template <typename T, typename LossFn>
std::vector<MetricsRecord> finetune_epochs(Model<T>& model, int64_t n, FinetuneHyper hyper,
                                           uint64_t seed, LossFn example_loss,
                                           MetricsWriter* metrics) {
    hyper.validate();
    Adam<T> opt(AdamConfig{.lr = hyper.lr});
    Pcg32 order_rng(derive_seed(seed, "finetune.order"), 3);
    Pcg32 dropout_rng(derive_seed(seed, "finetune.dropout"), 4);
    int64_t batches = (n + hyper.batch_size - 1) / hyper.batch_size;
    int64_t total_steps = hyper.epochs * batches;
    std::vector<MetricsRecord> records;
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    int64_t step = 0;
    for (int64_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (int64_t i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[static_cast<size_t>(order_rng.next_below(i + 1))]);
        for (int64_t b = 0; b < batches; ++b) {
            auto t0 = std::chrono::steady_clock::now();
            int64_t lo = b * hyper.batch_size;
            int64_t hi = std::min(n, lo + hyper.batch_size);
            MetricsRecord rec;
            try {
                Tape<T> tape;
                Tensor<T> sum;
                for (int64_t i = lo; i < hi; ++i) {
                    auto l = example_loss(order[static_cast<size_t>(i)], &dropout_rng);
                    sum = i > lo ? ops::add(sum, l) : l;
                }
                auto mean = ops::scale(sum, T(1) / static_cast<T>(hi - lo));
                if (!std::isfinite(static_cast<double>(mean.item())))
                    throw NumericError("loss is not finite");
                model.params.zero_grads();
                tape.backward(mean);
                rec.total = static_cast<double>(mean.item());
            } catch (const NumericError& e) {
                throw NumericError("fine-tuning aborted at step " + std::to_string(step + 1) +
                                   ", batch " + std::to_string(b + 1) + ": " + e.what());
            }
            rec.lr = lr_at(step + 1, total_steps, hyper.lr);
            opt.step(model.params, rec.lr);
            rec.step = ++step;
            rec.ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
            if (metrics) metrics->write(rec);
            records.push_back(rec);
        }
    }
    return records;
}

}  // namespace detail

// Fine-tunes a classification model on labeled sentences and reports final
// train accuracy. The model is usually seeded via load_encoder_weights first.
template <typename T>
double finetune_classifier(Model<T>& model, const std::vector<ClassifyExample>& data,
                           const Vocab& vocab, FinetuneHyper hyper, uint64_t seed,
                           MetricsWriter* metrics = nullptr) {
    if (!model.classifier) throw ContractError("finetune_classifier needs a classification model");
    if (data.empty()) throw ContractError("finetune_classifier needs training data");
    std::vector<SingleSegment> inputs;
    inputs.reserve(data.size());
    for (const auto& ex : data)
        inputs.push_back(
            build_single_segment(tokenize(detail::join_words(ex.words), vocab), hyper.max_len));
    detail::finetune_epochs<T>(
        model, static_cast<int64_t>(data.size()), hyper, seed,
        [&](int64_t i, Pcg32* rng) {
            const auto& seg = inputs[static_cast<size_t>(i)];
            auto hidden = model.encode(seg.tokens, seg.segments,
                                       static_cast<int64_t>(seg.tokens.size()), true, rng);
            return model.classifier->loss(hidden, data[static_cast<size_t>(i)].label);
        },
        metrics);
    return classify_accuracy(model, data, vocab, hyper.max_len);
}

// Fine-tunes a span model on marked sentences and reports final train exact
// match under the constrained decoder.
template <typename T>
double finetune_span(Model<T>& model, const std::vector<SpanExample>& data, const Vocab& vocab,
                     FinetuneHyper hyper, uint64_t seed, MetricsWriter* metrics = nullptr) {
    if (!model.span) throw ContractError("finetune_span needs a span model");
    if (data.empty()) throw ContractError("finetune_span needs training data");
    struct Input {
        SingleSegment seg;
        int start, end;
    };
    std::vector<Input> inputs;
    inputs.reserve(data.size());
    for (const auto& ex : data) {
        auto tok = tokenize(detail::join_words(ex.words), vocab);
        auto [ts, te] = detail::word_span_tokens(tok, static_cast<int>(ex.start),
                                                 static_cast<int>(ex.end));
        auto seg = build_single_segment(tok, hyper.max_len);
        if (te >= static_cast<int>(seg.tokens.size()) - 1)
            throw ContractError("span label truncated away; raise max_len");
        inputs.push_back({std::move(seg), ts, te});
    }
    detail::finetune_epochs<T>(
        model, static_cast<int64_t>(data.size()), hyper, seed,
        [&](int64_t i, Pcg32* rng) {
            const auto& in = inputs[static_cast<size_t>(i)];
            int64_t len = static_cast<int64_t>(in.seg.tokens.size());
            auto hidden = model.encode(in.seg.tokens, in.seg.segments, len, true, rng);
            return model.span->loss(hidden, len, in.start, in.end);
        },
        metrics);
    return span_exact_match(model, data, vocab, hyper.max_len);
}

}  // namespace tblstm
