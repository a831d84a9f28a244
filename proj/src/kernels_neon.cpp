// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

// NEON variants for aarch64. Two doubles per vector, scalar tails, no fused
// multiply-add for the same reason as the AVX2 backend.

#include "kernels_backends.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

namespace pairsplat::kern {
namespace {

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    for (; i < n; ++i) y[i] += a * x[i];
}

void sub_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_neon(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void sign_diff_neon(const double* a, const double* b, double s, double* out, std::size_t n) {
    const float64x2_t vzero = vdupq_n_f64(0.0);
    const float64x2_t vs = vdupq_n_f64(s);
    const float64x2_t vns = vdupq_n_f64(-s);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        const uint64x2_t pos = vcgtq_f64(d, vzero);
        const uint64x2_t neg = vcltq_f64(d, vzero);
        vst1q_f64(out + i, vbslq_f64(pos, vs, vbslq_f64(neg, vns, vzero)));
    }
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        out[i] = d > 0.0 ? s : (d < 0.0 ? -s : 0.0);
    }
}

double sum_abs_diff_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vaddq_f64(acc, vabsq_f64(vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i))));
    double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

double sum_sq_diff_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        acc = vaddq_f64(acc, vmulq_f64(d, d));
    }
    double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void adam_update_neon(double* p, const double* g, double* m, double* v, const double* lr,
                      std::size_t n, double beta1, double beta2, double eps, double bc1,
                      double bc2) {
    const float64x2_t vb1 = vdupq_n_f64(beta1);
    const float64x2_t vb2 = vdupq_n_f64(beta2);
    const float64x2_t vc1 = vdupq_n_f64(1.0 - beta1);
    const float64x2_t vc2 = vdupq_n_f64(1.0 - beta2);
    const float64x2_t veps = vdupq_n_f64(eps);
    const float64x2_t vbc1 = vdupq_n_f64(bc1);
    const float64x2_t vbc2 = vdupq_n_f64(bc2);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t vg = vld1q_f64(g + i);
        float64x2_t vm = vld1q_f64(m + i);
        float64x2_t vv = vld1q_f64(v + i);
        vm = vaddq_f64(vmulq_f64(vb1, vm), vmulq_f64(vc1, vg));
        vv = vaddq_f64(vmulq_f64(vb2, vv), vmulq_f64(vc2, vmulq_f64(vg, vg)));
        vst1q_f64(m + i, vm);
        vst1q_f64(v + i, vv);
        const float64x2_t mhat = vdivq_f64(vm, vbc1);
        const float64x2_t vhat = vdivq_f64(vv, vbc2);
        const float64x2_t denom = vaddq_f64(vsqrtq_f64(vhat), veps);
        const float64x2_t step = vdivq_f64(vmulq_f64(vld1q_f64(lr + i), mhat), denom);
        vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr[i] * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

const Kernels neon_table = {
    "neon",
    axpy_neon,
    sub_neon,
    mul_neon,
    sign_diff_neon,
    sum_abs_diff_neon,
    sum_sq_diff_neon,
    dot_neon,
    adam_update_neon,
};

} // namespace

const Kernels* neon_backend() { return &neon_table; }

} // namespace pairsplat::kern

#else // not aarch64

namespace pairsplat::kern {
const Kernels* neon_backend() { return nullptr; }
} // namespace pairsplat::kern

#endif
