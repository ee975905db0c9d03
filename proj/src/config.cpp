#include "tblstm/config.hpp"

#include <json.hpp>

namespace tblstm {

void ModelConfig::validate() const {
    auto positive = [](int64_t v, const char* name) {
        if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
    };
    if (num_layers < 0)
        throw ConfigError("num_layers must be >= 0, got " + std::to_string(num_layers));
    positive(hidden, "hidden");
    positive(num_heads, "num_heads");
    positive(ff_width, "ff_width");
    positive(vocab_size, "vocab_size");
    positive(max_positions, "max_positions");
    if (hidden % num_heads != 0)
        throw ConfigError("hidden " + std::to_string(hidden) + " not divisible by num_heads " +
                          std::to_string(num_heads));
    if (blstm_width == BlstmWidth::Half && hidden % 2 != 0)
        throw ConfigError("half-width BLSTM requires even hidden, got " + std::to_string(hidden));
    if (vocab_size < 6)
        throw ConfigError("vocab_size must cover the 5 reserved tokens plus content, got " +
                          std::to_string(vocab_size));
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("dropout must be in [0, 1), got " + std::to_string(dropout));
}

ModelConfig preset(const std::string& name) {
    ModelConfig c;  // defaults are the base sizing
    if (name == "toy") {
        c.num_layers = 2;
        c.hidden = 16;
        c.num_heads = 2;
        c.ff_width = 64;
        c.vocab_size = 100;
        c.max_positions = 32;
    } else if (name == "small") {
        c.num_layers = 4;
        c.hidden = 128;
        c.num_heads = 4;
        c.ff_width = 512;
        c.vocab_size = 8192;
        c.max_positions = 128;
    } else if (name == "base") {
        // defaults already
    } else if (name == "large") {
        c.num_layers = 24;
        c.hidden = 1024;
        c.num_heads = 16;
        c.ff_width = 4096;
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected toy, small, base, large)");
    }
    return c;
}

std::string to_string(BlstmMode m) {
    switch (m) {
        case BlstmMode::None: return "none";
        case BlstmMode::ReplaceFfn: return "replace";
        case BlstmMode::ParallelSum: return "parallel";
        case BlstmMode::PureBlstm: return "pure";
    }
    throw ConfigError("bad BlstmMode value");
}

std::string to_string(BlstmWidth w) {
    return w == BlstmWidth::Full ? "full" : "half";
}

std::string to_string(DecoderMode d) {
    return d == DecoderMode::Linear ? "linear" : "blstm2";
}

std::string to_string(ParallelSumPoint p) {
    return p == ParallelSumPoint::FinalLn ? "final" : "attn";
}

BlstmMode blstm_mode_from(const std::string& s) {
    if (s == "none") return BlstmMode::None;
    if (s == "replace") return BlstmMode::ReplaceFfn;
    if (s == "parallel") return BlstmMode::ParallelSum;
    if (s == "pure") return BlstmMode::PureBlstm;
    throw ConfigError("unknown blstm mode '" + s + "' (expected none, replace, parallel, pure)");
}

BlstmWidth blstm_width_from(const std::string& s) {
    if (s == "full") return BlstmWidth::Full;
    if (s == "half") return BlstmWidth::Half;
    throw ConfigError("unknown blstm width '" + s + "' (expected full, half)");
}

DecoderMode decoder_mode_from(const std::string& s) {
    if (s == "linear") return DecoderMode::Linear;
    if (s == "blstm2") return DecoderMode::Blstm2;
    throw ConfigError("unknown decoder '" + s + "' (expected linear, blstm2)");
}

ParallelSumPoint sum_point_from(const std::string& s) {
    if (s == "final") return ParallelSumPoint::FinalLn;
    if (s == "attn") return ParallelSumPoint::AttnLn;
    throw ConfigError("unknown sum point '" + s + "' (expected final, attn)");
}

std::string config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["layers"] = c.num_layers;
    j["hidden"] = c.hidden;
    j["heads"] = c.num_heads;
    j["ff_width"] = c.ff_width;
    j["blstm"] = to_string(c.blstm_mode);
    j["blstm_hidden"] = to_string(c.blstm_width);
    j["decoder"] = to_string(c.decoder_mode);
    j["blstm_sum"] = to_string(c.sum_point);
    j["vocab_size"] = c.vocab_size;
    j["max_len"] = c.max_positions;
    j["dropout"] = c.dropout;
    return j.dump(2);
}

void config_apply_json(ModelConfig& c, const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        try {
            if (key == "layers")
                c.num_layers = it.value().get<int64_t>();
            else if (key == "hidden")
                c.hidden = it.value().get<int64_t>();
            else if (key == "heads")
                c.num_heads = it.value().get<int64_t>();
            else if (key == "ff_width")
                c.ff_width = it.value().get<int64_t>();
            else if (key == "blstm")
                c.blstm_mode = blstm_mode_from(it.value().get<std::string>());
            else if (key == "blstm_hidden")
                c.blstm_width = blstm_width_from(it.value().get<std::string>());
            else if (key == "decoder")
                c.decoder_mode = decoder_mode_from(it.value().get<std::string>());
            else if (key == "blstm_sum")
                c.sum_point = sum_point_from(it.value().get<std::string>());
            else if (key == "vocab_size")
                c.vocab_size = it.value().get<int64_t>();
            else if (key == "max_len")
                c.max_positions = it.value().get<int64_t>();
            else if (key == "dropout")
                c.dropout = it.value().get<double>();
            else
                throw ConfigError("unknown config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }
}

ModelConfig config_from_json(const std::string& text) {
    ModelConfig c;
    config_apply_json(c, text);
    c.validate();
    return c;
}

}  // namespace tblstm
