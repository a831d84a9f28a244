// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/imageops.hpp"

#include "pairsplat/errors.hpp"
#include "pairsplat/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace pairsplat {
namespace {

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

const BlurKernel& ssim_window() {
    static const BlurKernel k = BlurKernel::gaussian(11, 1.5);
    return k;
}

// Reflect-101 fold: -1 -> 1, n -> n-2 (edge sample not repeated).
int fold(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

void require_same_shape(const Image& a, const Image& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height));
}

// One separable pass along x. Interior taps are contiguous shifted rows and
// go through the kernel table; folded border columns are handled per pixel.
void pass_horizontal(const Image& in, Image& out, const BlurKernel& k) {
    const auto& kt = kern::active();
    const int w = in.width, h = in.height, r = k.radius();
    const std::size_t row_len = static_cast<std::size_t>(w) * 3;
    std::fill(out.rgb.begin(), out.rgb.end(), 0.0);
    for (int y = 0; y < h; ++y) {
        const double* in_row = in.data() + static_cast<std::size_t>(y) * row_len;
        double* out_row = out.data() + static_cast<std::size_t>(y) * row_len;
        for (int t = 0; t < k.size; ++t) {
            const int off = t - r;
            const double wt = k.weights[static_cast<std::size_t>(t)];
            const int x0 = std::max(0, -off);
            const int x1 = std::min(w, w - off); // exclusive
            if (x1 > x0)
                kt.axpy(wt, in_row + static_cast<std::size_t>(x0 + off) * 3,
                        out_row + static_cast<std::size_t>(x0) * 3,
                        static_cast<std::size_t>(x1 - x0) * 3);
            for (int x = 0; x < x0; ++x) {
                const double* src = in_row + static_cast<std::size_t>(fold(x + off, w)) * 3;
                double* dst = out_row + static_cast<std::size_t>(x) * 3;
                for (int c = 0; c < 3; ++c) dst[c] += wt * src[c];
            }
            for (int x = std::max(x0, x1); x < w; ++x) {
                const double* src = in_row + static_cast<std::size_t>(fold(x + off, w)) * 3;
                double* dst = out_row + static_cast<std::size_t>(x) * 3;
                for (int c = 0; c < 3; ++c) dst[c] += wt * src[c];
            }
        }
    }
}

// One separable pass along y; every tap is a whole-row axpy.
void pass_vertical(const Image& in, Image& out, const BlurKernel& k) {
    const auto& kt = kern::active();
    const int h = in.height, r = k.radius();
    const std::size_t row_len = static_cast<std::size_t>(in.width) * 3;
    std::fill(out.rgb.begin(), out.rgb.end(), 0.0);
    for (int y = 0; y < h; ++y) {
        double* out_row = out.data() + static_cast<std::size_t>(y) * row_len;
        for (int t = 0; t < k.size; ++t) {
            const int sy = fold(y + t - r, h);
            kt.axpy(k.weights[static_cast<std::size_t>(t)],
                    in.data() + static_cast<std::size_t>(sy) * row_len, out_row, row_len);
        }
    }
}

// Transpose of pass_horizontal: scatter each output column back through the
// same taps and folds.
void pass_horizontal_adjoint(const Image& in, Image& out, const BlurKernel& k) {
    const auto& kt = kern::active();
    const int w = in.width, h = in.height, r = k.radius();
    const std::size_t row_len = static_cast<std::size_t>(w) * 3;
    std::fill(out.rgb.begin(), out.rgb.end(), 0.0);
    for (int y = 0; y < h; ++y) {
        const double* in_row = in.data() + static_cast<std::size_t>(y) * row_len;
        double* out_row = out.data() + static_cast<std::size_t>(y) * row_len;
        for (int t = 0; t < k.size; ++t) {
            const int off = t - r;
            const double wt = k.weights[static_cast<std::size_t>(t)];
            const int x0 = std::max(0, -off);
            const int x1 = std::min(w, w - off);
            if (x1 > x0)
                kt.axpy(wt, in_row + static_cast<std::size_t>(x0) * 3,
                        out_row + static_cast<std::size_t>(x0 + off) * 3,
                        static_cast<std::size_t>(x1 - x0) * 3);
            for (int x = 0; x < x0; ++x) {
                const double* src = in_row + static_cast<std::size_t>(x) * 3;
                double* dst = out_row + static_cast<std::size_t>(fold(x + off, w)) * 3;
                for (int c = 0; c < 3; ++c) dst[c] += wt * src[c];
            }
            for (int x = std::max(x0, x1); x < w; ++x) {
                const double* src = in_row + static_cast<std::size_t>(x) * 3;
                double* dst = out_row + static_cast<std::size_t>(fold(x + off, w)) * 3;
                for (int c = 0; c < 3; ++c) dst[c] += wt * src[c];
            }
        }
    }
}

void pass_vertical_adjoint(const Image& in, Image& out, const BlurKernel& k) {
    const auto& kt = kern::active();
    const int h = in.height, r = k.radius();
    const std::size_t row_len = static_cast<std::size_t>(in.width) * 3;
    std::fill(out.rgb.begin(), out.rgb.end(), 0.0);
    for (int y = 0; y < h; ++y) {
        const double* in_row = in.data() + static_cast<std::size_t>(y) * row_len;
        for (int t = 0; t < k.size; ++t) {
            const int dy = fold(y + t - r, h);
            kt.axpy(k.weights[static_cast<std::size_t>(t)], in_row,
                    out.data() + static_cast<std::size_t>(dy) * row_len, row_len);
        }
    }
}

struct SsimMoments {
    Image mu1, mu2, u11, u22, u12; // window means of a, b, a*a, b*b, a*b
};

SsimMoments ssim_moments(const Image& a, const Image& b) {
    const auto& kt = kern::active();
    SsimMoments m;
    m.mu1 = gaussian_blur(a, ssim_window());
    m.mu2 = gaussian_blur(b, ssim_window());
    Image tmp(a.width, a.height);
    kt.mul(a.data(), a.data(), tmp.data(), tmp.size());
    m.u11 = gaussian_blur(tmp, ssim_window());
    kt.mul(b.data(), b.data(), tmp.data(), tmp.size());
    m.u22 = gaussian_blur(tmp, ssim_window());
    kt.mul(a.data(), b.data(), tmp.data(), tmp.size());
    m.u12 = gaussian_blur(tmp, ssim_window());
    return m;
}

} // namespace

BlurKernel BlurKernel::gaussian(int size, double sigma) {
    if (size <= 0 || size % 2 == 0)
        throw ConfigError("blur kernel size must be odd and positive, got " +
                          std::to_string(size));
    if (!(sigma > 0)) throw ConfigError("blur kernel sigma must be > 0");
    BlurKernel k;
    k.size = size;
    k.sigma = sigma;
    k.weights.resize(static_cast<std::size_t>(size));
    const int r = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - r;
        k.weights[static_cast<std::size_t>(i)] = std::exp(-0.5 * d * d / (sigma * sigma));
        sum += k.weights[static_cast<std::size_t>(i)];
    }
    for (auto& w : k.weights) w /= sum;
    return k;
}

Image gaussian_blur(const Image& img, const BlurKernel& k) {
    Image mid(img.width, img.height), out(img.width, img.height);
    pass_horizontal(img, mid, k);
    pass_vertical(mid, out, k);
    return out;
}

Image blur_adjoint(const Image& upstream, const BlurKernel& k) {
    Image mid(upstream.width, upstream.height), out(upstream.width, upstream.height);
    pass_vertical_adjoint(upstream, mid, k);
    pass_horizontal_adjoint(mid, out, k);
    return out;
}

double l1(const Image& a, const Image& b) {
    require_same_shape(a, b, "l1");
    return kern::active().sum_abs_diff(a.data(), b.data(), a.size()) / static_cast<double>(a.size());
}

Image l1_adjoint(const Image& a, const Image& b) {
    require_same_shape(a, b, "l1_adjoint");
    Image out(a.width, a.height);
    kern::active().sign_diff(a.data(), b.data(), 1.0 / static_cast<double>(a.size()), out.data(),
                             a.size());
    return out;
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    const SsimMoments m = ssim_moments(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double mu1 = m.mu1.rgb[i], mu2 = m.mu2.rgb[i];
        const double s11 = m.u11.rgb[i] - mu1 * mu1;
        const double s22 = m.u22.rgb[i] - mu2 * mu2;
        const double s12 = m.u12.rgb[i] - mu1 * mu2;
        const double a1 = 2.0 * mu1 * mu2 + kSsimC1;
        const double a2 = 2.0 * s12 + kSsimC2;
        const double b1 = mu1 * mu1 + mu2 * mu2 + kSsimC1;
        const double b2 = s11 + s22 + kSsimC2;
        acc += (a1 * a2) / (b1 * b2);
    }
    return acc / static_cast<double>(a.size());
}

Image ssim_adjoint(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim_adjoint");
    const SsimMoments m = ssim_moments(a, b);
    const double inv_n = 1.0 / static_cast<double>(a.size());
    Image d_mu1(a.width, a.height), d_u11(a.width, a.height), d_u12(a.width, a.height);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double mu1 = m.mu1.rgb[i], mu2 = m.mu2.rgb[i];
        const double s11 = m.u11.rgb[i] - mu1 * mu1;
        const double s22 = m.u22.rgb[i] - mu2 * mu2;
        const double s12 = m.u12.rgb[i] - mu1 * mu2;
        const double a1 = 2.0 * mu1 * mu2 + kSsimC1;
        const double a2 = 2.0 * s12 + kSsimC2;
        const double b1 = mu1 * mu1 + mu2 * mu2 + kSsimC1;
        const double b2 = s11 + s22 + kSsimC2;
        const double denom = b1 * b2;
        const double s = (a1 * a2) / denom;
        const double d_a1 = a2 / denom;
        const double d_a2 = a1 / denom;
        const double d_b1 = -s / b1;
        const double d_b2 = -s / b2;
        // mu1 enters a1, b1 directly and sigma terms through -mu1^2, -mu1*mu2.
        d_mu1.rgb[i] = inv_n * (2.0 * mu2 * d_a1 + 2.0 * mu1 * d_b1 - 2.0 * mu2 * d_a2 -
                                2.0 * mu1 * d_b2);
        d_u11.rgb[i] = inv_n * d_b2;
        d_u12.rgb[i] = inv_n * 2.0 * d_a2;
    }
    const Image t_mu1 = blur_adjoint(d_mu1, ssim_window());
    const Image t_u11 = blur_adjoint(d_u11, ssim_window());
    const Image t_u12 = blur_adjoint(d_u12, ssim_window());
    Image out(a.width, a.height);
    for (std::size_t i = 0; i < a.size(); ++i)
        out.rgb[i] = t_mu1.rgb[i] + 2.0 * a.rgb[i] * t_u11.rgb[i] + b.rgb[i] * t_u12.rgb[i];
    return out;
}

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    return kern::active().sum_sq_diff(a.data(), b.data(), a.size()) / static_cast<double>(a.size());
}

double psnr_from_mse(double mse_value) {
    if (mse_value <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse_value));
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

} // namespace pairsplat
