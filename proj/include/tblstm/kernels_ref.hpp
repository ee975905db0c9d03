#pragma once

#include <cmath>
#include <cstdint>

#include "tblstm/kernel_defs.hpp"

// Serial reference kernels. Plain textbook loops, kept deliberately simple:
// the tests hold the OpenMP kernels to these, and the benchmark compares
// against them.
namespace tblstm::ref {

// C[m x n] (+)= A[m x k] * B[k x n]
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c, bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * n + j] : T(0);
            for (int64_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
            c[i * n + j] = acc;
        }
    }
}

// C[m x n] (+)= A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c, bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * n + j] : T(0);
            for (int64_t l = 0; l < k; ++l) acc += a[i * k + l] * b[j * k + l];
            c[i * n + j] = acc;
        }
    }
}

// C[m x n] (+)= A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c, bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            T acc = accumulate ? c[i * n + j] : T(0);
            for (int64_t l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
            c[i * n + j] = acc;
        }
    }
}

// Row-wise softmax with max subtraction.
template <typename T>
void softmax_rows(int64_t rows, int64_t cols, const T* x, T* y) {
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

// Row-wise layer norm over the last axis, population variance.
template <typename T>
void layer_norm_rows(int64_t rows, int64_t cols, const T* x, const T* gamma, const T* beta,
                     T eps, T* y) {
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
        for (int64_t c = 0; c < cols; ++c) yr[c] = (xr[c] - mean) * rstd * gamma[c] + beta[c];
    }
}

template <typename T>
void unary(int64_t n, const T* x, T* y, Unary op) {
    switch (op) {
        case Unary::Tanh:
            for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
            break;
        case Unary::Sigmoid:
            for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
            break;
        case Unary::Gelu:
            for (int64_t i = 0; i < n; ++i)
                y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * T(0.7071067811865476)));
            break;
        case Unary::Exp:
            for (int64_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
            break;
        case Unary::Log:
            for (int64_t i = 0; i < n; ++i) y[i] = std::log(x[i]);
            break;
    }
}

template <typename T>
void binary(int64_t n, const T* a, const T* b, T* y, Binary op) {
    switch (op) {
        case Binary::Add:
            for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
            break;
        case Binary::Sub:
            for (int64_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
            break;
        case Binary::Mul:
            for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
            break;
    }
}

}  // namespace tblstm::ref
