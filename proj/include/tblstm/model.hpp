#pragma once

#include <optional>

#include "tblstm/blocks.hpp"
#include "tblstm/heads.hpp"

// A model is an encoder plus the heads for one task, all drawing parameters
// from a single ParamStore so optimizers and checkpoints see one flat
// name -> tensor table.
namespace tblstm {

enum class Task { Pretrain, Classify, Span };

template <typename T>
struct Model {
    ModelConfig cfg;
    ParamStore<T> params;
    Encoder<T> encoder;
    std::optional<MlmHead<T>> mlm;
    std::optional<NspHead<T>> nsp;
    std::optional<ClassifierHead<T>> classifier;
    std::optional<SpanHead<T>> span;

    Model(const ModelConfig& config, uint64_t seed, Task task, int64_t num_classes = 2)
        : cfg(config), params(seed), encoder(params, cfg) {
        switch (task) {
            case Task::Pretrain:
                mlm.emplace(params, "mlm", encoder.embed.token, cfg.hidden);
                nsp.emplace(params, "nsp", cfg.hidden);
                break;
            case Task::Classify:
                classifier.emplace(params, "cls", cfg.hidden, num_classes);
                break;
            case Task::Span:
                span.emplace(params, "span", cfg.hidden,
                             cfg.decoder_mode == DecoderMode::Blstm2);
                break;
        }
    }

    Tensor<T> encode(const std::vector<int>& token_ids, const std::vector<int>& segment_ids,
                     int64_t valid_len, bool train = false, Pcg32* rng = nullptr) {
        return encoder.forward(token_ids, segment_ids, valid_len, train, rng);
    }
};

// Elements across all registered tensors; tied tensors are registered once,
// so they are counted once.
template <typename T>
int64_t count_params_model(const Model<T>& m) {
    return m.params.total_elements();
}

}  // namespace tblstm
