#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "tblstm/layers.hpp"

// Optimizer, learning-rate schedule, and the per-step metrics stream. The
// training loops themselves live in trainer.hpp; checkpoint serialization in
// checkpoint.hpp.
namespace tblstm {

struct AdamConfig {
    double lr = 1e-4;  // peak rate; the per-step rate comes from lr_at()
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-6;
    double weight_decay = 0.01;  // decoupled; skips entries created with decay=false
    double clip_norm = 1.0;      // global-norm gradient clip, 0 disables
};

// Adam with bias correction and decoupled weight decay. Moments are keyed by
// parameter name so they serialize alongside the parameters and survive a
// checkpoint round trip in the same order. All arithmetic is serial: the
// update order is part of the bit-determinism contract.
//
// With a zero gradient and zero weight decay the update is exactly zero and
// the moments stay zero; with nonzero weight decay a decayed parameter still
// shrinks, which is the decoupled formulation working as intended.
template <typename T>
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // One update over every parameter in the store, using the gradients left
    // by the last backward pass. `lr` is this step's scheduled rate. When the
    // global gradient norm exceeds clip_norm the gradients are rescaled in
    // place before the update.
    void step(ParamStore<T>& params, double lr) {
        for (const auto& [name, e] : params.entries())
            if (!e.tensor.has_grad())
                throw ContractError("adam: no gradient for parameter '" + name + "'");
        if (cfg_.clip_norm > 0) {
            double norm = grad_norm(params);
            if (norm > cfg_.clip_norm) {
                T s = static_cast<T>(cfg_.clip_norm / norm);
                for (const auto& [name, e] : params.entries())
                    for (auto& g : e.tensor.grad()) g *= s;
            }
        }
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (const auto& [name, e] : params.entries()) {
            Tensor<T> p = e.tensor;
            auto pv = p.values();
            auto gv = p.grad();
            auto& m = m_[name];
            auto& v = v_[name];
            if (m.empty()) m.assign(pv.size(), T(0));
            if (v.empty()) v.assign(pv.size(), T(0));
            T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
            for (size_t i = 0; i < pv.size(); ++i) {
                T g = gv[i];
                m[i] = b1 * m[i] + (T(1) - b1) * g;
                v[i] = b2 * v[i] + (T(1) - b2) * g * g;
                double mhat = static_cast<double>(m[i]) / bc1;
                double vhat = static_cast<double>(v[i]) / bc2;
                double upd = mhat / (std::sqrt(vhat) + cfg_.eps);
                if (e.decay) upd += cfg_.weight_decay * static_cast<double>(pv[i]);
                pv[i] -= static_cast<T>(lr * upd);
            }
        }
    }

    int64_t steps_taken() const { return t_; }
    const std::map<std::string, std::vector<T>>& first_moments() const { return m_; }
    const std::map<std::string, std::vector<T>>& second_moments() const { return v_; }

    // Checkpoint restore: replaces the step counter and both moment tables.
    void restore_state(int64_t t, std::map<std::string, std::vector<T>> m,
                       std::map<std::string, std::vector<T>> v) {
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

    AdamConfig& config() { return cfg_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::map<std::string, std::vector<T>> m_, v_;
};

// Euclidean norm over every gradient element in the store, in name order.
template <typename T>
double grad_norm(const ParamStore<T>& params) {
    double sq = 0;
    for (const auto& [name, e] : params.entries())
        if (e.tensor.has_grad())
            for (T g : e.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(sq);
}

// Linear warmup over the first 1% of the budget (at least one step), then
// linear decay to zero at the final step. `step` is 1-based: it names the
// step about to be taken. Steps past the budget return zero.
inline double lr_at(int64_t step, int64_t total_steps, double peak) {
    if (step < 1 || total_steps < 1)
        throw ContractError("lr_at: step and total_steps must be >= 1");
    int64_t warmup = std::max<int64_t>(1, total_steps / 100);
    if (step <= warmup)
        return peak * static_cast<double>(step) / static_cast<double>(warmup);
    if (step >= total_steps) return 0.0;
    return peak * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

// One row per optimizer step. `ms` is wall-clock and is the only field that
// varies between reruns of the same seed; byte-identity claims about metrics
// therefore apply to everything left of it.
struct MetricsRecord {
    int64_t step = 0;
    double total = 0;
    double mlm = 0;
    double nsp = 0;
    double lr = 0;
    int64_t ms = 0;
};

// Shortest decimal string that round-trips the double, so metrics lines are
// both compact and exact.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Append-only newline-delimited records: "step total mlm nsp lr ms", one line
// per optimizer step, plottable directly (gnuplot, matplotlib, awk). A fresh
// file gets a '#'-prefixed header naming the columns. Fine-tuning runs log
// their single task loss in `total` and leave mlm/nsp at zero.
class MetricsWriter {
  public:
    explicit MetricsWriter(const std::string& path)
        : out_(path, std::ios::app) {
        if (!out_.good()) throw ConfigError("cannot open metrics file '" + path + "'");
        if (out_.tellp() == 0) out_ << "# step total mlm nsp lr ms\n";
    }

    void write(const MetricsRecord& r) {
        out_ << r.step << ' ' << format_double(r.total) << ' ' << format_double(r.mlm) << ' '
             << format_double(r.nsp) << ' ' << format_double(r.lr) << ' ' << r.ms << '\n';
        out_.flush();
    }

  private:
    std::ofstream out_;
};

}  // namespace tblstm
