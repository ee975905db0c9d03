#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tblstm/config.hpp"
#include "tblstm/model.hpp"
#include "tblstm/train.hpp"

// Single-file checkpoint: parameters, optimizer moments, step counter, and
// both generator states, behind a JSON manifest.
//
// Layout (all integers little-endian):
//   bytes 0..7    magic "TBLSTMCK"
//   bytes 8..11   u32 format version (currently 1)
//   bytes 12..19  u64 manifest byte length M
//   bytes 20..    M bytes of compact JSON (keys sorted), then the payload
//
// Manifest keys:
//   "adam"    {beta1, beta2, clip_norm, eps, lr, step, weight_decay}
//   "config"  the model config object (same form as the resolved-config file)
//   "dtype"   "f32" or "f64"
//   "rng"     {"data": [state, inc], "dropout": [state, inc]}
//   "step"    optimizer steps completed
//   "tensors" array of {kind, name, offset, shape}; offset is into the
//             payload region; kind is "param", "adam_m", or "adam_v"
//
// Tensor records are grouped by parameter name in lexicographic order; within
// a name the order is param, then adam_m and adam_v when the optimizer has
// moments for it. Each record's bytes are the row-major values, fixed-width
// little-endian. Loading validates everything before touching any state, so
// a truncated or mismatched file never leaves a half-restored model.
namespace tblstm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint code assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'T', 'B', 'L', 'S', 'T', 'M', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
struct DtypeName;
template <>
struct DtypeName<float> {
    static constexpr const char* value = "f32";
};
template <>
struct DtypeName<double> {
    static constexpr const char* value = "f64";
};

namespace detail {

inline void ck_require(bool ok, const std::string& msg) {
    if (!ok) throw CheckpointError(msg);
}

inline uint32_t read_u32(const std::string& bytes, size_t at) {
    uint32_t v;
    std::memcpy(&v, bytes.data() + at, 4);
    return v;
}

inline uint64_t read_u64(const std::string& bytes, size_t at) {
    uint64_t v;
    std::memcpy(&v, bytes.data() + at, 8);
    return v;
}

// Header + manifest validation shared by every reader. Returns the parsed
// manifest and sets payload_at to the first payload byte.
inline nlohmann::json parse_manifest(const std::string& bytes, const std::string& path,
                                     size_t& payload_at) {
    ck_require(bytes.size() >= 20, "truncated checkpoint '" + path + "': missing header");
    ck_require(std::memcmp(bytes.data(), kCheckpointMagic, 8) == 0,
               "'" + path + "' is not a checkpoint (bad magic)");
    uint32_t version = read_u32(bytes, 8);
    ck_require(version == kCheckpointVersion,
               "checkpoint '" + path + "' has format version " + std::to_string(version) +
                   ", expected " + std::to_string(kCheckpointVersion));
    uint64_t mlen = read_u64(bytes, 12);
    ck_require(bytes.size() - 20 >= mlen, "truncated checkpoint '" + path + "': manifest cut off");
    nlohmann::json man;
    try {
        man = nlohmann::json::parse(bytes.substr(20, mlen));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("checkpoint '" + path + "' manifest is corrupt: " + e.what());
    }
    payload_at = 20 + static_cast<size_t>(mlen);
    return man;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    ck_require(in.good(), "cannot open checkpoint '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore<T>& params,
                     const Adam<T>& opt, const Pcg32& data_rng, const Pcg32& dropout_rng,
                     int64_t step) {
    struct Record {
        std::string name, kind;
        const T* data;
        int64_t numel;
        std::vector<int64_t> shape;
    };
    std::vector<Record> records;
    int64_t offset = 0;
    nlohmann::json tensors = nlohmann::json::array();
    auto push = [&](const std::string& name, const std::string& kind, const T* data, int64_t numel,
                    std::vector<int64_t> shape) {
        tensors.push_back({{"kind", kind}, {"name", name}, {"offset", offset}, {"shape", shape}});
        records.push_back({name, kind, data, numel, std::move(shape)});
        offset += numel * static_cast<int64_t>(sizeof(T));
    };
    for (const auto& [name, e] : params.entries()) {
        const Tensor<T>& t = e.tensor;
        push(name, "param", t.values().data(), t.numel(), t.shape());
        auto mi = opt.first_moments().find(name);
        if (mi != opt.first_moments().end())
            push(name, "adam_m", mi->second.data(), t.numel(), t.shape());
        auto vi = opt.second_moments().find(name);
        if (vi != opt.second_moments().end())
            push(name, "adam_v", vi->second.data(), t.numel(), t.shape());
    }

    nlohmann::json man;
    man["adam"] = {{"beta1", opt.config().beta1},     {"beta2", opt.config().beta2},
                   {"clip_norm", opt.config().clip_norm}, {"eps", opt.config().eps},
                   {"lr", opt.config().lr},           {"step", opt.steps_taken()},
                   {"weight_decay", opt.config().weight_decay}};
    man["config"] = nlohmann::json::parse(config_to_json(cfg));
    man["dtype"] = DtypeName<T>::value;
    man["rng"] = {{"data", {data_rng.state(), data_rng.inc()}},
                  {"dropout", {dropout_rng.state(), dropout_rng.inc()}}};
    man["step"] = step;
    man["tensors"] = tensors;
    std::string mtext = man.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    detail::ck_require(out.good(), "cannot write checkpoint '" + path + "'");
    out.write(kCheckpointMagic, 8);
    uint32_t version = kCheckpointVersion;
    uint64_t mlen = mtext.size();
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&mlen), 8);
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    for (const auto& r : records)
        out.write(reinterpret_cast<const char*>(r.data),
                  r.numel * static_cast<int64_t>(sizeof(T)));
    out.flush();
    detail::ck_require(out.good(), "write to checkpoint '" + path + "' failed");
}

// Restores parameters, optimizer, and generators in one shot. The model the
// store belongs to must have been built with the same config; every stored
// tensor must land on a parameter of the same shape and every parameter must
// be covered. Returns the step counter.
template <typename T>
int64_t load_checkpoint(const std::string& path, const ModelConfig& cfg, ParamStore<T>& params,
                        Adam<T>& opt, Pcg32& data_rng, Pcg32& dropout_rng) {
    std::string bytes = detail::read_file(path);
    size_t payload_at = 0;
    nlohmann::json man = detail::parse_manifest(bytes, path, payload_at);

    detail::ck_require(man.value("dtype", "") == DtypeName<T>::value,
                       "checkpoint '" + path + "' holds dtype '" + man.value("dtype", "?") +
                           "', model uses '" + DtypeName<T>::value + "'");
    detail::ck_require(man.contains("config") && man["config"].dump() ==
                                                     nlohmann::json::parse(config_to_json(cfg)).dump(),
                       "checkpoint '" + path + "' config does not match the model config");

    // Validation pass: collect every pending copy before mutating anything.
    struct Pending {
        Tensor<T> target;             // param copies go through the tensor handle
        std::vector<T>* moments;      // moment copies go into these
        size_t src;
        int64_t numel;
    };
    std::vector<Pending> plan;
    std::map<std::string, std::vector<T>> m, v;
    std::map<std::string, int> param_seen;
    const size_t payload_size = bytes.size() - payload_at;
    for (const auto& rec : man.at("tensors")) {
        std::string name = rec.at("name").get<std::string>();
        std::string kind = rec.at("kind").get<std::string>();
        detail::ck_require(params.has(name),
                           "checkpoint tensor '" + name + "' has no matching model parameter");
        Tensor<T> t = params.get(name);
        std::vector<int64_t> shape = rec.at("shape").get<std::vector<int64_t>>();
        detail::ck_require(shape == t.shape(), "checkpoint tensor '" + name + "' shape " +
                                                   shape_str(shape) + " != model " +
                                                   shape_str(t.shape()));
        int64_t bytes_needed = t.numel() * static_cast<int64_t>(sizeof(T));
        int64_t off = rec.at("offset").get<int64_t>();
        detail::ck_require(off >= 0 && static_cast<uint64_t>(off) + bytes_needed <= payload_size,
                           "truncated checkpoint '" + path + "': tensor '" + name +
                               "' data out of bounds");
        size_t src = payload_at + static_cast<size_t>(off);
        if (kind == "param") {
            plan.push_back({t, nullptr, src, t.numel()});
            ++param_seen[name];
        } else if (kind == "adam_m" || kind == "adam_v") {
            auto& slot = (kind == "adam_m" ? m : v)[name];
            slot.resize(static_cast<size_t>(t.numel()));
            plan.push_back({Tensor<T>(), &slot, src, t.numel()});
        } else {
            throw CheckpointError("checkpoint tensor '" + name + "' has unknown kind '" + kind +
                                  "'");
        }
    }
    for (const auto& [name, e] : params.entries())
        detail::ck_require(param_seen.count(name) && param_seen[name] == 1,
                           "model parameter '" + name + "' missing from checkpoint");

    // Apply pass: nothing below can fail.
    for (auto& p : plan) {
        T* dst = p.moments ? p.moments->data() : p.target.values().data();
        std::memcpy(dst, bytes.data() + p.src, static_cast<size_t>(p.numel) * sizeof(T));
    }
    const auto& aj = man.at("adam");
    AdamConfig& ac = opt.config();
    ac.beta1 = aj.at("beta1").get<double>();
    ac.beta2 = aj.at("beta2").get<double>();
    ac.clip_norm = aj.at("clip_norm").get<double>();
    ac.eps = aj.at("eps").get<double>();
    ac.lr = aj.at("lr").get<double>();
    ac.weight_decay = aj.at("weight_decay").get<double>();
    opt.restore_state(aj.at("step").get<int64_t>(), std::move(m), std::move(v));
    const auto& rj = man.at("rng");
    data_rng.restore(rj.at("data")[0].get<uint64_t>(), rj.at("data")[1].get<uint64_t>());
    dropout_rng.restore(rj.at("dropout")[0].get<uint64_t>(), rj.at("dropout")[1].get<uint64_t>());
    return man.at("step").get<int64_t>();
}

// Manifest-only view, enough to rebuild the model a checkpoint belongs to.
struct CheckpointMeta {
    ModelConfig config;
    int64_t step = 0;
    std::string dtype;
};

inline CheckpointMeta peek_checkpoint(const std::string& path) {
    std::string bytes = detail::read_file(path);
    size_t payload_at = 0;
    nlohmann::json man = detail::parse_manifest(bytes, path, payload_at);
    CheckpointMeta meta;
    meta.config = config_from_json(man.at("config").dump());
    meta.step = man.at("step").get<int64_t>();
    meta.dtype = man.value("dtype", "");
    return meta;
}

inline bool is_head_param(const std::string& name) {
    return name.rfind("mlm.", 0) == 0 || name.rfind("nsp.", 0) == 0 ||
           name.rfind("cls.", 0) == 0 || name.rfind("span.", 0) == 0;
}

// Which task the stored head parameters serve, read off the tensor names so
// an evaluator can rebuild the right model from the file alone. For
// classification the class count comes from the output bias length.
inline Task checkpoint_task(const std::string& path, int64_t* num_classes = nullptr) {
    std::string bytes = detail::read_file(path);
    size_t payload_at = 0;
    nlohmann::json man = detail::parse_manifest(bytes, path, payload_at);
    bool mlm = false, cls = false, span = false;
    for (const auto& rec : man.at("tensors")) {
        if (rec.at("kind").get<std::string>() != "param") continue;
        std::string name = rec.at("name").get<std::string>();
        if (name.rfind("mlm.", 0) == 0) mlm = true;
        if (name.rfind("span.", 0) == 0) span = true;
        if (name == "cls.out.b") {
            cls = true;
            if (num_classes) *num_classes = rec.at("shape")[0].get<int64_t>();
        }
    }
    detail::ck_require(mlm + cls + span == 1,
                       "checkpoint '" + path + "' does not carry exactly one task head");
    return mlm ? Task::Pretrain : cls ? Task::Classify : Task::Span;
}

// Fine-tuning bootstrap: copies the encoder body (embeddings and layers) out
// of a pretraining checkpoint into a task model, leaving the fresh task head
// untouched. The configs must match on everything except decoder_mode, which
// describes the head side and legitimately differs. Optimizer moments, step,
// and generator state stay behind: fine-tuning starts its own run. Returns
// the checkpoint's step for logging.
template <typename T>
int64_t load_encoder_weights(const std::string& path, Model<T>& model) {
    std::string bytes = detail::read_file(path);
    size_t payload_at = 0;
    nlohmann::json man = detail::parse_manifest(bytes, path, payload_at);
    detail::ck_require(man.value("dtype", "") == DtypeName<T>::value,
                       "checkpoint '" + path + "' holds dtype '" + man.value("dtype", "?") +
                           "', model uses '" + DtypeName<T>::value + "'");
    ModelConfig body = config_from_json(man.at("config").dump());
    ModelConfig want = model.cfg;
    body.decoder_mode = want.decoder_mode;
    detail::ck_require(config_to_json(body) == config_to_json(want),
                       "checkpoint '" + path + "' encoder config does not match the task model");

    struct Pending {
        Tensor<T> target;
        size_t src;
        int64_t numel;
    };
    std::vector<Pending> plan;
    std::map<std::string, bool> covered;
    const size_t payload_size = bytes.size() - payload_at;
    for (const auto& rec : man.at("tensors")) {
        if (rec.at("kind").get<std::string>() != "param") continue;
        std::string name = rec.at("name").get<std::string>();
        if (is_head_param(name) || !model.params.has(name)) continue;
        Tensor<T> t = model.params.get(name);
        std::vector<int64_t> shape = rec.at("shape").get<std::vector<int64_t>>();
        detail::ck_require(shape == t.shape(), "checkpoint tensor '" + name + "' shape " +
                                                   shape_str(shape) + " != model " +
                                                   shape_str(t.shape()));
        int64_t bytes_needed = t.numel() * static_cast<int64_t>(sizeof(T));
        int64_t off = rec.at("offset").get<int64_t>();
        detail::ck_require(off >= 0 && static_cast<uint64_t>(off) + bytes_needed <= payload_size,
                           "truncated checkpoint '" + path + "': tensor '" + name +
                               "' data out of bounds");
        plan.push_back({t, payload_at + static_cast<size_t>(off), t.numel()});
        covered[name] = true;
    }
    for (const auto& [name, e] : model.params.entries())
        detail::ck_require(is_head_param(name) || covered.count(name),
                           "checkpoint '" + path + "' is missing encoder parameter '" + name + "'");
    for (auto& p : plan)
        std::memcpy(p.target.values().data(), bytes.data() + p.src,
                    static_cast<size_t>(p.numel) * sizeof(T));
    return man.at("step").get<int64_t>();
}

}  // namespace tblstm
