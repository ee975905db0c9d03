#pragma once

#include <cstdint>

namespace tblstm {

enum class Unary { Tanh, Sigmoid, Gelu, Exp, Log };
enum class Binary { Add, Sub, Mul };

// Work-size cutoff below which the OpenMP kernels stay serial. Fork/join on
// tiny per-timestep tensors costs more than the arithmetic.
inline constexpr int64_t kParallelCutoff = 16 * 1024;

}  // namespace tblstm
