// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

namespace pairsplat::kern {

// Data-parallel inner loops used by the blur, the loss maps, and the
// optimizer update. Each entry has a scalar reference implementation and,
// where the host CPU supports it, a SIMD variant selected at runtime.
// Elementwise ops (sub, mul, sign_diff) are bit-identical across backends;
// reductions and fused updates may differ by summation order only.
struct Kernels {
    const char* name;

    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // out[i] = a[i] - b[i]
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = a[i] * b[i]
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = s * sign(a[i] - b[i]), sign(0) = 0
    void (*sign_diff)(const double* a, const double* b, double s, double* out, std::size_t n);
    // sum_i |a[i] - b[i]|
    double (*sum_abs_diff)(const double* a, const double* b, std::size_t n);
    // sum_i (a[i] - b[i])^2
    double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // Fused Adam update with per-entry learning rates and precomputed bias
    // corrections bc1 = 1 - beta1^t, bc2 = 1 - beta2^t. Updates p, m, v in place.
    void (*adam_update)(double* p, const double* g, double* m, double* v, const double* lr,
                        std::size_t n, double beta1, double beta2, double eps, double bc1,
                        double bc2);
};

const Kernels& scalar();

// Best backend for this CPU, probed once at first use.
const Kernels& active();

// Override dispatch (tests and benchmarks). Pass nullptr to restore probing.
void set_active(const Kernels* k);

// Backends compiled into this binary, scalar first.
// Returns the number written into out (capacity cap).
std::size_t available(const Kernels** out, std::size_t cap);

} // namespace pairsplat::kern
