// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

// AVX2 variants of the kernel table. Four doubles per vector; remainders run
// the scalar tail. No FMA so the elementwise ops stay bit-identical to the
// reference loops.

#include "kernels_backends.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

namespace pairsplat::kern {
namespace {

inline double hsum(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void sub_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void sign_diff_avx2(const double* a, const double* b, double s, double* out, std::size_t n) {
    const __m256d vzero = _mm256_setzero_pd();
    const __m256d vs = _mm256_set1_pd(s);
    const __m256d vns = _mm256_set1_pd(-s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d pos = _mm256_cmp_pd(d, vzero, _CMP_GT_OQ);
        const __m256d neg = _mm256_cmp_pd(d, vzero, _CMP_LT_OQ);
        _mm256_storeu_pd(out + i, _mm256_or_pd(_mm256_and_pd(pos, vs), _mm256_and_pd(neg, vns)));
    }
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        out[i] = d > 0.0 ? s : (d < 0.0 ? -s : 0.0);
    }
}

double sum_abs_diff_avx2(const double* a, const double* b, std::size_t n) {
    const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_and_pd(d, abs_mask));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void adam_update_avx2(double* p, const double* g, double* m, double* v, const double* lr,
                      std::size_t n, double beta1, double beta2, double eps, double bc1,
                      double bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_add_pd(_mm256_mul_pd(vb1, vm), _mm256_mul_pd(vc1, vg));
        vv = _mm256_add_pd(_mm256_mul_pd(vb2, vv), _mm256_mul_pd(vc2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_div_pd(vm, vbc1);
        const __m256d vhat = _mm256_div_pd(vv, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(_mm256_loadu_pd(lr + i), mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr[i] * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

const Kernels avx2_table = {
    "avx2",
    axpy_avx2,
    sub_avx2,
    mul_avx2,
    sign_diff_avx2,
    sum_abs_diff_avx2,
    sum_sq_diff_avx2,
    dot_avx2,
    adam_update_avx2,
};

} // namespace

const Kernels* avx2_backend() { return &avx2_table; }

bool cpu_has_avx2() { return __builtin_cpu_supports("avx2") != 0; }

} // namespace pairsplat::kern

#else // not x86-64

namespace pairsplat::kern {
const Kernels* avx2_backend() { return nullptr; }
bool cpu_has_avx2() { return false; }
} // namespace pairsplat::kern

#endif
