#include "tblstm/audit.hpp"

#include <sstream>

#include <json.hpp>

namespace tblstm {

ParamReport count_params_analytic(const ModelConfig& cfg) {
    cfg.validate();
    ParamReport r;
    r.cfg = cfg;

    const int64_t h = cfg.hidden;
    const int64_t ln = 2 * h;  // gamma + beta

    r.embeddings = cfg.vocab_size * h + cfg.max_positions * h + 2 * h + ln;

    if (cfg.uses_attention()) {
        // four H x H projections with biases, plus the norms after each sublayer
        r.attention_per_layer = 4 * (h * h + h) + 2 * ln;
    }
    if (cfg.uses_ffn()) {
        const int64_t f = cfg.ff_width;
        r.ffn_per_layer = h * f + f + f * h + h;
    }
    if (cfg.uses_blstm()) {
        const int64_t hb = cfg.blstm_hidden();
        r.blstm_per_layer = 2 * 4 * (h * hb + hb * hb + hb);
        if (!cfg.uses_attention()) r.blstm_per_layer += ln;  // the block's single norm
        if (cfg.has_projection()) r.projection_per_layer = 2 * hb * h + h;
    }

    // masked-token head: transform + its norm + per-token bias (output weights
    // are the embedding table, already counted); NSP head: pooler + 2-way out
    r.heads = (h * h + h) + ln + cfg.vocab_size;
    r.heads += (h * h + h) + (2 * h + 2);
    return r;
}

std::string report_table(const ParamReport& r) {
    std::ostringstream os;
    auto row = [&](const char* label, int64_t v) {
        os << "  " << label;
        for (size_t i = std::string(label).size(); i < 26; ++i) os << ' ';
        os << v << "\n";
    };
    os << "parameters (" << r.cfg.num_layers << " layers, hidden " << r.cfg.hidden << ", blstm "
       << to_string(r.cfg.blstm_mode) << ")\n";
    row("embeddings", r.embeddings);
    row("attention / layer", r.attention_per_layer);
    row("feed-forward / layer", r.ffn_per_layer);
    row("blstm / layer", r.blstm_per_layer);
    row("projection / layer", r.projection_per_layer);
    row("encoder total", r.encoder_total());
    row("pretraining heads", r.heads);
    row("total", r.total());
    return os.str();
}

std::string report_json(const ParamReport& r) {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(config_to_json(r.cfg));
    j["embeddings"] = r.embeddings;
    j["attention_per_layer"] = r.attention_per_layer;
    j["ffn_per_layer"] = r.ffn_per_layer;
    j["blstm_per_layer"] = r.blstm_per_layer;
    j["projection_per_layer"] = r.projection_per_layer;
    j["encoder_total"] = r.encoder_total();
    j["heads"] = r.heads;
    j["total"] = r.total();
    return j.dump(2);
}

}  // namespace tblstm
