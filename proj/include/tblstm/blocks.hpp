#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tblstm/config.hpp"
#include "tblstm/layers.hpp"

// Encoder blocks and the N-layer encoder. One block class covers all four
// architectures; the config decides which sublayers exist and how the
// recurrent branch is wired. Every sublayer output passes through dropout
// before joining its residual sum, and each sum is closed by a LayerNorm.
namespace tblstm {

template <typename T>
struct EncoderBlock {
    std::optional<MultiHeadAttention<T>> attn;
    std::optional<LayerNormParams<T>> norm1;  // closes the attention sublayer
    std::optional<FeedForward<T>> ffn;
    std::optional<Blstm<T>> blstm;
    LayerNormParams<T> norm2;  // closes the block
    BlstmMode mode = BlstmMode::None;
    ParallelSumPoint sum_point = ParallelSumPoint::FinalLn;
    T dropout_rate = T(0);

    EncoderBlock() = default;
    EncoderBlock(ParamStore<T>& ps, const std::string& prefix, const ModelConfig& cfg)
        : norm2(ps, prefix + ".norm2", cfg.hidden),
          mode(cfg.blstm_mode),
          sum_point(cfg.sum_point),
          dropout_rate(static_cast<T>(cfg.dropout)) {
        if (cfg.uses_attention()) {
            attn.emplace(ps, prefix + ".attn", cfg.hidden, cfg.num_heads,
                         static_cast<T>(cfg.dropout));
            norm1.emplace(ps, prefix + ".norm1", cfg.hidden);
        }
        if (cfg.uses_ffn()) ffn.emplace(ps, prefix + ".ffn", cfg.hidden, cfg.ff_width);
        if (cfg.uses_blstm())
            blstm.emplace(ps, prefix + ".blstm", cfg.hidden, cfg.blstm_hidden(),
                          cfg.has_projection());
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& pad_mask, int64_t valid_len,
                      bool train = false, Pcg32* rng = nullptr) const {
        auto drop = [&](const Tensor<T>& t) {
            return ops::dropout(t, dropout_rate, rng, train);
        };
        switch (mode) {
            case BlstmMode::None: {
                auto y = norm1->forward(
                    ops::add(x, drop(attn->forward(x, pad_mask, train, rng))));
                return norm2.forward(ops::add(y, drop(ffn->forward(y))));
            }
            case BlstmMode::ReplaceFfn: {
                auto y = norm1->forward(
                    ops::add(x, drop(attn->forward(x, pad_mask, train, rng))));
                return norm2.forward(ops::add(y, drop(blstm->forward(y, valid_len))));
            }
            case BlstmMode::ParallelSum: {
                // The recurrent branch reads the block input; its (projected)
                // output joins one of the two pre-LayerNorm sums. Like any
                // other sublayer output, the branch is dropped out.
                auto branch = drop(blstm->forward(x, valid_len));
                if (sum_point == ParallelSumPoint::AttnLn) {
                    auto y = norm1->forward(ops::add(
                        ops::add(x, drop(attn->forward(x, pad_mask, train, rng))), branch));
                    return norm2.forward(ops::add(y, drop(ffn->forward(y))));
                }
                auto y = norm1->forward(
                    ops::add(x, drop(attn->forward(x, pad_mask, train, rng))));
                return norm2.forward(
                    ops::add(ops::add(y, drop(ffn->forward(y))), branch));
            }
            case BlstmMode::PureBlstm:
                return norm2.forward(ops::add(x, drop(blstm->forward(x, valid_len))));
        }
        throw ContractError("unreachable block mode");
    }
};

template <typename T>
struct Encoder {
    ModelConfig cfg;
    Embeddings<T> embed;
    std::vector<EncoderBlock<T>> blocks;

    Encoder() = default;
    Encoder(ParamStore<T>& ps, const ModelConfig& config) : cfg(config) {
        cfg.validate();
        embed = Embeddings<T>(ps, "embed", cfg.vocab_size, cfg.max_positions, cfg.hidden,
                              static_cast<T>(cfg.dropout));
        blocks.reserve(static_cast<size_t>(cfg.num_layers));
        for (int64_t i = 0; i < cfg.num_layers; ++i)
            blocks.emplace_back(ps, "layer" + std::to_string(i), cfg);
    }

    // valid_len: number of real (unpadded) leading positions; everything at
    // and past valid_len is padding that attention must not read and the
    // BLSTM must not scan.
    Tensor<T> forward(const std::vector<int>& token_ids, const std::vector<int>& segment_ids,
                      int64_t valid_len, bool train = false, Pcg32* rng = nullptr) const {
        int64_t s = static_cast<int64_t>(token_ids.size());
        auto mask = make_pad_mask<T>(s, valid_len);
        auto h = embed.forward(token_ids, segment_ids, train, rng);
        for (const auto& block : blocks) h = block.forward(h, mask, valid_len, train, rng);
        return h;
    }
};

}  // namespace tblstm
