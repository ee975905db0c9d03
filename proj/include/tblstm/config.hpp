#pragma once

#include <cstdint>
#include <string>

#include "tblstm/common.hpp"

namespace tblstm {

// Where the encoder's recurrent branch sits, if anywhere.
//   None: plain transformer block (attention + feed-forward).
//   ReplaceFfn: the feed-forward sublayer is swapped for a BLSTM sublayer.
//   ParallelSum: a BLSTM reads the block input and its projected output is
//     added into a pre-LayerNorm residual sum alongside the usual path.
//   PureBlstm: no attention at all, each layer is a residual BLSTM.
enum class BlstmMode { None, ReplaceFfn, ParallelSum, PureBlstm };

// Full: BLSTM hidden width equals H, concat is 2H, projection back to H.
// Half: width H/2, concat is already H, no projection layer exists.
enum class BlstmWidth { Full, Half };

// Fine-tuning head plumbing: plain linear map on encoder output, or a
// 2-layer BLSTM decoder inserted before it.
enum class DecoderMode { Linear, Blstm2 };

// Where the ParallelSum branch joins. The figure in the source material is
// ambiguous between the block's final pre-LayerNorm sum (our default) and
// the attention sublayer's pre-LayerNorm sum; both wirings are kept.
enum class ParallelSumPoint { FinalLn, AttnLn };

struct ModelConfig {
    int64_t num_layers = 12;
    int64_t hidden = 768;
    int64_t num_heads = 12;
    int64_t ff_width = 3072;
    BlstmMode blstm_mode = BlstmMode::None;
    BlstmWidth blstm_width = BlstmWidth::Full;
    DecoderMode decoder_mode = DecoderMode::Linear;
    ParallelSumPoint sum_point = ParallelSumPoint::FinalLn;
    int64_t vocab_size = 30000;
    int64_t max_positions = 256;
    double dropout = 0.1;

    bool uses_blstm() const { return blstm_mode != BlstmMode::None; }
    bool uses_attention() const { return blstm_mode != BlstmMode::PureBlstm; }
    bool uses_ffn() const {
        return blstm_mode == BlstmMode::None || blstm_mode == BlstmMode::ParallelSum;
    }
    int64_t blstm_hidden() const { return blstm_width == BlstmWidth::Full ? hidden : hidden / 2; }
    // Width rule: a full-width BLSTM concatenates to 2H and needs the 2H->H
    // projection; the half-width variant lands on H already and carries none.
    bool has_projection() const { return uses_blstm() && blstm_width == BlstmWidth::Full; }

    void validate() const;  // throws ConfigError on any bad field
};

// Named starting points; flags and config files override individual fields.
// toy and small are desk-trainable, base and large exist for the parameter
// audit and match the reference sizes (V=30000, P=256).
ModelConfig preset(const std::string& name);

// Enum <-> flag-value spellings, shared by the CLI and the JSON forms.
std::string to_string(BlstmMode m);
std::string to_string(BlstmWidth w);
std::string to_string(DecoderMode d);
std::string to_string(ParallelSumPoint p);
BlstmMode blstm_mode_from(const std::string& s);
BlstmWidth blstm_width_from(const std::string& s);
DecoderMode decoder_mode_from(const std::string& s);
ParallelSumPoint sum_point_from(const std::string& s);

// Deterministic JSON (keys sorted) used for the resolved-config sidecar and
// the checkpoint manifest. from-side rejects unknown keys and validates.
std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& text);

// Overlay form: patches only the keys present in `text` onto an existing
// config and skips validation, so preset -> file -> flag layering can defer
// the validity check until every source has spoken.
void config_apply_json(ModelConfig& c, const std::string& text);

}  // namespace tblstm
