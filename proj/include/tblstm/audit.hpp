#pragma once

#include <string>

#include "tblstm/config.hpp"

// Analytic parameter accounting. Every count here is a closed form over the
// config; the test suite holds these equal, element for element, to the
// tensors an instantiated model actually allocates.
namespace tblstm {

struct ParamReport {
    ModelConfig cfg;
    int64_t embeddings = 0;            // token + position + segment tables, embedding norm
    int64_t attention_per_layer = 0;   // q/k/v/o projections plus both sublayer norms
    int64_t ffn_per_layer = 0;
    int64_t blstm_per_layer = 0;       // both directions; carries the sole norm when no attention
    int64_t projection_per_layer = 0;  // 2*H_b -> H, present only at full width
    int64_t heads = 0;                 // masked-token head (output tied, bias counted) + NSP head

    int64_t per_layer() const {
        return attention_per_layer + ffn_per_layer + blstm_per_layer + projection_per_layer;
    }
    int64_t encoder_total() const { return embeddings + cfg.num_layers * per_layer(); }
    int64_t total() const { return encoder_total() + heads; }
};

// Closed-form count for a validated config. The heads term covers the
// pretraining heads; totals with and without it are both in the report.
ParamReport count_params_analytic(const ModelConfig& cfg);

// Human-readable component table.
std::string report_table(const ParamReport& r);

// The same fields as a JSON record.
std::string report_json(const ParamReport& r);

}  // namespace tblstm
