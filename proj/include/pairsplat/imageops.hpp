// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/image.hpp"

#include <vector>

namespace pairsplat {

// Normalized symmetric 1D Gaussian taps for a separable blur.
struct BlurKernel {
    int size = 0;
    double sigma = 0.0;
    std::vector<double> weights;

    static BlurKernel gaussian(int size, double sigma);
    int radius() const { return size / 2; }
};

// Separable convolution (horizontal then vertical) per channel with reflect
// padding; linear in the input and constant-preserving.
Image gaussian_blur(const Image& img, const BlurKernel& k);

// Transpose of gaussian_blur under the standard inner product:
// <blur(x), y> == <x, blur_adjoint(y)>.
Image blur_adjoint(const Image& upstream, const BlurKernel& k);

// Mean absolute difference over all H*W*3 entries.
double l1(const Image& a, const Image& b);
// d l1 / d a = sign(a - b) / (H*W*3), with sign(0) = 0.
Image l1_adjoint(const Image& a, const Image& b);

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, C1 = 0.01^2, C2 = 0.03^2
// (dynamic range 1), computed per channel and averaged. Window sums use the
// same reflect padding as the blur, so constant images keep their exact
// statistics out to the border.
double ssim(const Image& a, const Image& b);
// d ssim / d a with b held fixed.
Image ssim_adjoint(const Image& a, const Image& b);

double mse(const Image& a, const Image& b);
// 10*log10(1/mse) with peak 1; capped at 99 dB (the zero-mse sentinel).
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse_value);

} // namespace pairsplat
