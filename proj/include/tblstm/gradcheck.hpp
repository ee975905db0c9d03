#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tblstm/ops.hpp"
#include "tblstm/rng.hpp"
#include "tblstm/tensor.hpp"

// Central finite-difference gradient verification. The forward map under
// test is scalarized as sum(output * W) with a fixed random W so every
// output element influences the loss, then each input element is perturbed
// by +-h and the numeric slope compared against the tape gradient.
// Double precision only; 32-bit differencing is too noisy to be meaningful.
namespace tblstm {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "input 2, element 17" style locator for the max
    bool pass(double tol = 1e-4) const { return max_rel_err < tol; }
};

// forward: callable taking const std::vector<Tensor<double>>& and returning
// Tensor<double>. It must be a pure function of the inputs: fixed shapes, no
// internal randomness (run dropout in eval mode).
template <typename Fn>
GradCheckResult check_gradients(std::vector<Tensor<double>> inputs, Fn&& forward,
                                double h = 1e-5) {
    for (auto& in : inputs) in.set_requires_grad(true);

    // One probe run fixes the output shape so the scalarization weights can
    // be drawn; the same weights serve the analytic and numeric passes.
    Tensor<double> probe = forward(static_cast<const std::vector<Tensor<double>>&>(inputs));
    Pcg32 wrng(0x5eedf00dULL, 7);
    std::vector<double> w(static_cast<size_t>(probe.numel()));
    for (auto& v : w) v = wrng.normal();

    auto weighted = [&](const Tensor<double>& y) {
        double s = 0.0;
        auto vals = y.values();
        for (size_t i = 0; i < w.size(); ++i) s += w[i] * vals[i];
        return s;
    };

    // Analytic gradients via the tape.
    std::vector<std::vector<double>> analytic(inputs.size());
    {
        Tape<double> tape;
        Tensor<double> out = forward(static_cast<const std::vector<Tensor<double>>&>(inputs));
        auto wt = Tensor<double>::from(out.shape(), w);
        Tensor<double> loss = ops::sum_all(ops::mul(out, wt));
        tape.backward(loss);
        for (size_t k = 0; k < inputs.size(); ++k) {
            auto g = inputs[k].grad_view();
            analytic[k].assign(g.begin(), g.end());
        }
    }

    GradCheckResult result;
    for (size_t k = 0; k < inputs.size(); ++k) {
        auto vals = inputs[k].values();
        for (int64_t i = 0; i < inputs[k].numel(); ++i) {
            double keep = vals[i];
            vals[i] = keep + h;
            double up = weighted(forward(static_cast<const std::vector<Tensor<double>>&>(inputs)));
            vals[i] = keep - h;
            double dn = weighted(forward(static_cast<const std::vector<Tensor<double>>&>(inputs)));
            vals[i] = keep;
            double numeric = (up - dn) / (2.0 * h);
            double a = analytic[k][static_cast<size_t>(i)];
            double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-4);
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst =
                    "input " + std::to_string(k) + ", element " + std::to_string(i) +
                    " (analytic " + std::to_string(a) + ", numeric " + std::to_string(numeric) +
                    ")";
            }
        }
    }
    return result;
}

}  // namespace tblstm
