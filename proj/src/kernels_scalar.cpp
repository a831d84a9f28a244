// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/kernels.hpp"

#include <cmath>

namespace pairsplat::kern {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void sign_diff_scalar(const double* a, const double* b, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        out[i] = d > 0.0 ? s : (d < 0.0 ? -s : 0.0);
    }
}

double sum_abs_diff_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void adam_update_scalar(double* p, const double* g, double* m, double* v, const double* lr,
                        std::size_t n, double beta1, double beta2, double eps, double bc1,
                        double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr[i] * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const Kernels& scalar() {
    static const Kernels k = {
        "scalar",
        axpy_scalar,
        sub_scalar,
        mul_scalar,
        sign_diff_scalar,
        sum_abs_diff_scalar,
        sum_sq_diff_scalar,
        dot_scalar,
        adam_update_scalar,
    };
    return k;
}

} // namespace pairsplat::kern
