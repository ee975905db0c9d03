// Times the OpenMP kernels against their serial references on training-sized
// shapes. The parallel loops were written so every output element has one
// writer and a fixed accumulation order; this tool re-verifies that claim at
// benchmark shapes (bitwise, not approximately) before trusting the timings.
// Exits nonzero on any mismatch, so it doubles as a large-shape kernel test.

#include <omp.h>

#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tblstm/kernel_defs.hpp"
#include "tblstm/kernels.hpp"
#include "tblstm/kernels_ref.hpp"
#include "tblstm/rng.hpp"

namespace {

using tblstm::Pcg32;

std::vector<float> randn(size_t n, uint64_t seed) {
    Pcg32 rng(seed, 9);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e100;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        best = std::min(best, dt.count());
    }
    return best;
}

struct Case {
    std::string name;
    size_t out_elems;
    std::function<void(float*)> ref;
    std::function<void(float*)> par;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmark: serial reference vs OpenMP, bitwise-checked"};
    int reps = 5;
    uint64_t seed = 1;
    app.add_option("--reps", reps, "Timing repetitions; best is reported")->capture_default_str();
    app.add_option("--seed", seed, "Input data seed")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    // Shapes mirror one encoder layer at the reference width (H=768, F=3072)
    // on a 256-token sequence.
    const int64_t S = 256, H = 768, FF = 3072;
    auto x = randn(static_cast<size_t>(S * H), seed);
    auto w1 = randn(static_cast<size_t>(H * FF), seed + 1);
    auto w2 = randn(static_cast<size_t>(H * H), seed + 2);
    auto gamma = randn(static_cast<size_t>(H), seed + 3);
    auto beta = randn(static_cast<size_t>(H), seed + 4);
    auto big = randn(static_cast<size_t>(4 * S * H), seed + 5);

    std::vector<Case> cases;
    cases.push_back({"gemm_nn 256x768 * 768x768", static_cast<size_t>(S * H),
                     [&](float* c) { tblstm::ref::gemm_nn(S, H, H, x.data(), w2.data(), c, false); },
                     [&](float* c) {
                         tblstm::kernels::gemm_nn(S, H, H, x.data(), w2.data(), c, false);
                     }});
    cases.push_back({"gemm_nn 256x768 * 768x3072", static_cast<size_t>(S * FF),
                     [&](float* c) { tblstm::ref::gemm_nn(S, FF, H, x.data(), w1.data(), c, false); },
                     [&](float* c) {
                         tblstm::kernels::gemm_nn(S, FF, H, x.data(), w1.data(), c, false);
                     }});
    cases.push_back({"gemm_nt 256x3072 * (768x3072)^T", static_cast<size_t>(S * H),
                     [&](float* c) {
                         tblstm::ref::gemm_nt(S, H, FF, big.data(), w1.data(), c, false);
                     },
                     [&](float* c) {
                         tblstm::kernels::gemm_nt(S, H, FF, big.data(), w1.data(), c, false);
                     }});
    cases.push_back({"softmax_rows 3072x256", big.size(),
                     [&](float* c) { tblstm::ref::softmax_rows(3072, 256, big.data(), c); },
                     [&](float* c) { tblstm::kernels::softmax_rows(3072, 256, big.data(), c); }});
    cases.push_back(
        {"layer_norm_rows 1024x768", big.size(),
         [&](float* c) {
             tblstm::ref::layer_norm_rows(1024, H, big.data(), gamma.data(), beta.data(), 1e-12f,
                                          c);
         },
         [&](float* c) {
             std::vector<float> mean(1024), rstd(1024);
             tblstm::kernels::layer_norm_rows(1024, H, big.data(), gamma.data(), beta.data(),
                                              1e-12f, c, mean.data(), rstd.data());
         }});
    cases.push_back({"gelu 786432", big.size(),
                     [&](float* c) {
                         tblstm::ref::unary(static_cast<int64_t>(big.size()), big.data(), c,
                                            tblstm::Unary::Gelu);
                     },
                     [&](float* c) {
                         tblstm::kernels::unary(static_cast<int64_t>(big.size()), big.data(), c,
                                                tblstm::Unary::Gelu);
                     }});

    std::cout << "threads: " << omp_get_max_threads() << ", best of " << reps << " runs\n";
    std::cout << "  kernel                             serial ms   openmp ms   speedup\n";
    int mismatches = 0;
    for (auto& c : cases) {
        std::vector<float> out_ref(c.out_elems), out_par(c.out_elems);
        c.ref(out_ref.data());
        c.par(out_par.data());
        bool equal =
            std::memcmp(out_ref.data(), out_par.data(), c.out_elems * sizeof(float)) == 0;
        if (!equal) ++mismatches;
        double t_ref = time_best_of(reps, [&] { c.ref(out_ref.data()); });
        double t_par = time_best_of(reps, [&] { c.par(out_par.data()); });
        char line[160];
        std::snprintf(line, sizeof line, "  %-34s %9.3f   %9.3f   %6.2fx %s", c.name.c_str(),
                      t_ref * 1e3, t_par * 1e3, t_ref / t_par,
                      equal ? "" : "BITWISE MISMATCH");
        std::cout << line << "\n";
    }
    if (mismatches) {
        std::cout << mismatches << " kernel(s) disagree with the reference\n";
        return 1;
    }
    return 0;
}
