// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/regularize.hpp"

#include "pairsplat/errors.hpp"
#include "pairsplat/kernels.hpp"

#include <algorithm>

namespace pairsplat {

double rgb_loss(const Image& render, const Image& gt, double lambda_dssim) {
    double loss = l1(render, gt);
    if (lambda_dssim != 0.0) loss += lambda_dssim * (1.0 - ssim(render, gt));
    return loss;
}

Image rgb_loss_adjoint(const Image& render, const Image& gt, double lambda_dssim) {
    Image adj = l1_adjoint(render, gt);
    if (lambda_dssim != 0.0) {
        const Image ds = ssim_adjoint(render, gt);
        kern::active().axpy(-lambda_dssim, ds.data(), adj.data(), adj.size());
    }
    return adj;
}

double paired_rec_loss(double loss_a, double loss_b, double beta) {
    return loss_a + beta * loss_b;
}

double lfc_loss(const Image& img_a, const Image& img_b_detached, const BlurKernel& kernel) {
    return l1(gaussian_blur(img_a, kernel), gaussian_blur(img_b_detached, kernel));
}

Image lfc_adjoint(const Image& img_a, const Image& img_b_detached, const BlurKernel& kernel) {
    const Image blurred_a = gaussian_blur(img_a, kernel);
    const Image blurred_b = gaussian_blur(img_b_detached, kernel);
    return blur_adjoint(l1_adjoint(blurred_a, blurred_b), kernel);
}

double lambda_schedule(int t, double lambda_max, int t_warm) {
    if (t_warm <= 0) throw ConfigError("lambda_schedule: t_warm must be >= 1");
    if (t < 0) throw ConfigError("lambda_schedule: t must be >= 0");
    return lambda_max * std::min(1.0, static_cast<double>(t) / static_cast<double>(t_warm));
}

LossBreakdown total_loss(double rgb_a, double rgb_b, double lfc, const LossWeights& weights,
                         int t) {
    LossBreakdown b;
    b.rgb_a = rgb_a;
    b.rgb_b = rgb_b;
    b.lfc = lfc;
    b.lambda_t = lambda_schedule(t, weights.lambda_max, weights.t_warm);
    b.total = rgb_a + weights.beta * rgb_b + b.lambda_t * lfc;
    return b;
}

std::vector<std::pair<int, int>> multibranch_pairs(int branches) {
    if (branches < 2) throw ConfigError("multibranch_pairs: need at least 2 branches");
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(branches) * (branches - 1) / 2);
    for (int i = 0; i < branches; ++i)
        for (int j = i + 1; j < branches; ++j) pairs.emplace_back(j, i);
    return pairs;
}

} // namespace pairsplat
