#pragma once

#include <cmath>
#include <cstdint>

#include "tblstm/kernel_defs.hpp"

// OpenMP-parallel kernels behind every hot tensor operation. Every output
// element is computed wholly by one thread with a fixed inner-loop order and
// there are no floating-point reductions across threads, so results are
// bit-identical regardless of thread count. Small workloads stay serial via
// the cutoff.
namespace tblstm::kernels {

// C[m x n] (+)= A[m x k] * B[k x n]. Loop order i-l-j streams B and C rows
// contiguously; each element still accumulates its k terms in ascending
// order, so results match the reference's i-j-l order bit for bit.
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c, bool accumulate) {
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelCutoff)
    for (int64_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        if (!accumulate)
            for (int64_t j = 0; j < n; ++j) ci[j] = T(0);
        const T* ai = a + i * k;
        for (int64_t l = 0; l < k; ++l) {
            T ail = ai[l];
            const T* bl = b + l * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += ail * bl[j];
        }
    }
}

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c, bool accumulate) {
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelCutoff)
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * n + j] : T(0);
            const T* ai = a + i * k;
            const T* bj = b + j * k;
            for (int64_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
            c[i * n + j] = acc;
        }
    }
}

// C[m x n] (+)= A[k x m]^T * B[k x n], same i-l-j rationale as gemm_nn.
template <typename T>
void gemm_tn(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c, bool accumulate) {
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelCutoff)
    for (int64_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        if (!accumulate)
            for (int64_t j = 0; j < n; ++j) ci[j] = T(0);
        for (int64_t l = 0; l < k; ++l) {
            T ail = a[l * m + i];
            const T* bl = b + l * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += ail * bl[j];
        }
    }
}

template <typename T>
void softmax_rows(int64_t rows, int64_t cols, const T* x, T* y) {
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x + r * cols;
        T* yr = y + r * cols;
        T mx = xr[0];
        for (int64_t c = 1; c < cols; ++c)
            if (xr[c] > mx) mx = xr[c];
        T sum = T(0);
        for (int64_t c = 0; c < cols; ++c) {
            yr[c] = std::exp(xr[c] - mx);
            sum += yr[c];
        }
        for (int64_t c = 0; c < cols; ++c) yr[c] /= sum;
    }
}

// gx[r,c] += y[r,c] * (gy[r,c] - sum_c' gy[r,c']*y[r,c'])
template <typename T>
void softmax_rows_grad(int64_t rows, int64_t cols, const T* y, const T* gy, T* gx) {
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
    for (int64_t r = 0; r < rows; ++r) {
        const T* yr = y + r * cols;
        const T* gr = gy + r * cols;
        T* gxr = gx + r * cols;
        T dot = T(0);
        for (int64_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
        for (int64_t c = 0; c < cols; ++c) gxr[c] += yr[c] * (gr[c] - dot);
    }
}

// Forward saves per-row mean and reciprocal std for the backward pass.
template <typename T>
void layer_norm_rows(int64_t rows, int64_t cols, const T* x, const T* gamma, const T* beta,
                     T eps, T* y, T* mean_out, T* rstd_out) {
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x + r * cols;
        T* yr = y + r * cols;
        T mean = T(0);
        for (int64_t c = 0; c < cols; ++c) mean += xr[c];
        mean /= T(cols);
        T var = T(0);
        for (int64_t c = 0; c < cols; ++c) {
            T d = xr[c] - mean;
            var += d * d;
        }
        var /= T(cols);
        T rstd = T(1) / std::sqrt(var + eps);
        mean_out[r] = mean;
        rstd_out[r] = rstd;
        for (int64_t c = 0; c < cols; ++c) yr[c] = (xr[c] - mean) * rstd * gamma[c] + beta[c];
    }
}

// gx rows in parallel; ggamma/gbeta columns in parallel so each output cell
// has a single writer.
template <typename T>
void layer_norm_rows_grad(int64_t rows, int64_t cols, const T* x, const T* gamma, const T* mean,
                          const T* rstd, const T* gy, T* gx, T* ggamma, T* gbeta) {
    if (gx) {
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
        for (int64_t r = 0; r < rows; ++r) {
            const T* xr = x + r * cols;
            const T* gr = gy + r * cols;
            T* gxr = gx + r * cols;
            T m1 = T(0), m2 = T(0);
            for (int64_t c = 0; c < cols; ++c) {
                T xhat = (xr[c] - mean[r]) * rstd[r];
                T gyh = gr[c] * gamma[c];
                m1 += gyh;
                m2 += gyh * xhat;
            }
            m1 /= T(cols);
            m2 /= T(cols);
            for (int64_t c = 0; c < cols; ++c) {
                T xhat = (xr[c] - mean[r]) * rstd[r];
                T gyh = gr[c] * gamma[c];
                gxr[c] += rstd[r] * (gyh - m1 - xhat * m2);
            }
        }
    }
    if (ggamma || gbeta) {
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
        for (int64_t c = 0; c < cols; ++c) {
            T gg = T(0), gb = T(0);
            for (int64_t r = 0; r < rows; ++r) {
                T xhat = (x[r * cols + c] - mean[r]) * rstd[r];
                gg += gy[r * cols + c] * xhat;
                gb += gy[r * cols + c];
            }
            if (ggamma) ggamma[c] += gg;
            if (gbeta) gbeta[c] += gb;
        }
    }
}

template <typename T>
void unary(int64_t n, const T* x, T* y, Unary op) {
    switch (op) {
        case Unary::Tanh:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
            break;
        case Unary::Sigmoid:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
            break;
        case Unary::Gelu:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i)
                y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * T(0.7071067811865476)));
            break;
        case Unary::Exp:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
            break;
        case Unary::Log:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) y[i] = std::log(x[i]);
            break;
    }
}

// gx += gy * f'(x); takes both the input x and the forward output y so each
// derivative can use whichever is cheaper.
template <typename T>
void unary_grad(int64_t n, const T* x, const T* y, const T* gy, T* gx, Unary op) {
    switch (op) {
        case Unary::Tanh:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * (T(1) - y[i] * y[i]);
            break;
        case Unary::Sigmoid:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
            break;
        case Unary::Gelu:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) {
                T phi = T(0.5) * (T(1) + std::erf(x[i] * T(0.7071067811865476)));
                T pdf = T(0.3989422804014327) * std::exp(T(-0.5) * x[i] * x[i]);
                gx[i] += gy[i] * (phi + x[i] * pdf);
            }
            break;
        case Unary::Exp:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i];
            break;
        case Unary::Log:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] / x[i];
            break;
    }
}

template <typename T>
void binary(int64_t n, const T* a, const T* b, T* y, Binary op) {
    switch (op) {
        case Binary::Add:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
            break;
        case Binary::Sub:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
            break;
        case Binary::Mul:
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
            for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
            break;
    }
}

// Broadcast binary over precomputed element strides (0 on expanded axes).
// ndim <= 8 in practice; strides address the flattened output index space.
template <typename T>
void binary_bcast(int64_t n_out, int ndim, const int64_t* out_dims, const int64_t* a_strides,
                  const int64_t* b_strides, const T* a, const T* b, T* y, Binary op) {
#pragma omp parallel for schedule(static) if (n_out >= kParallelCutoff)
    for (int64_t idx = 0; idx < n_out; ++idx) {
        int64_t rem = idx, ai = 0, bi = 0;
        for (int d = ndim - 1; d >= 0; --d) {
            int64_t coord = rem % out_dims[d];
            rem /= out_dims[d];
            ai += coord * a_strides[d];
            bi += coord * b_strides[d];
        }
        switch (op) {
            case Binary::Add: y[idx] = a[ai] + b[bi]; break;
            case Binary::Sub: y[idx] = a[ai] - b[bi]; break;
            case Binary::Mul: y[idx] = a[ai] * b[bi]; break;
        }
    }
}

}  // namespace tblstm::kernels
