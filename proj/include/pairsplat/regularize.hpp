// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/image.hpp"
#include "pairsplat/imageops.hpp"

#include <utility>
#include <vector>

namespace pairsplat {

struct LossWeights {
    double lambda_dssim = 0.2; // D-SSIM weight inside the photometric loss
    double beta = 0.25;        // reconstruction weight of auxiliary branches
    double lambda_max = 0.05;  // consistency weight after warm-up
    int t_warm = 7000;         // warm-up length in iterations
};

// Per-iteration record; total == rgb_a + beta * rgb_b + lambda_t * lfc.
// For more than two branches rgb_b is the sum of all auxiliary-branch
// photometric losses and lfc the mean over consistency pairs.
struct LossBreakdown {
    double rgb_a = 0.0;
    double rgb_b = 0.0;
    double lfc = 0.0;
    double lambda_t = 0.0;
    double total = 0.0;
};

// Photometric loss: L1 + lambda_dssim * (1 - SSIM).
double rgb_loss(const Image& render, const Image& gt, double lambda_dssim);
// d rgb_loss / d render.
Image rgb_loss_adjoint(const Image& render, const Image& gt, double lambda_dssim);

// Two-branch reconstruction: loss_a + beta * loss_b.
double paired_rec_loss(double loss_a, double loss_b, double beta);

// Low-frequency consistency: mean L1 between the blurred renders, with the
// second input treated as a constant. No adjoint with respect to
// img_b_detached exists; that is the stop-gradient contract.
double lfc_loss(const Image& img_a, const Image& img_b_detached, const BlurKernel& kernel);
// d lfc_loss / d img_a (the only gradient path).
Image lfc_adjoint(const Image& img_a, const Image& img_b_detached, const BlurKernel& kernel);

// lambda_max * min(1, t / t_warm): zero at t = 0, linear warm-up, clamped.
double lambda_schedule(int t, double lambda_max, int t_warm);

LossBreakdown total_loss(double rgb_a, double rgb_b, double lfc, const LossWeights& weights,
                         int t);

// All C(b,2) consistency pairs as (target, learner): the higher-index branch
// of each pair is the detached target, mirroring the two-branch default where
// branch b supervises branch a.
std::vector<std::pair<int, int>> multibranch_pairs(int branches);

} // namespace pairsplat
