// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pairsplat/errors.hpp"
#include "pairsplat/regularize.hpp"

#include "test_util.hpp"

#include <cmath>

using namespace pairsplat;
using testutil::random_image;

namespace {

const BlurKernel kLfcKernel = BlurKernel::gaussian(11, 3.0);

double oracle_constant_ssim(double va, double vb) {
    const double c1 = 1e-4, c2 = 9e-4;
    return ((2.0 * va * vb + c1) * c2) / ((va * va + vb * vb + c1) * c2);
}

} // namespace

TEST_CASE("rgb_loss basics") {
    Rng rng(2);
    const Image img = random_image(16, 16, rng);
    CHECK(rgb_loss(img, img, 0.2) == 0.0);

    const Image other = random_image(16, 16, rng);
    CHECK(rgb_loss(img, other, 0.0) == l1(img, other));

    const Image zeros(16, 16), ones(16, 16, Vec3{1, 1, 1});
    const double expect = 1.0 + 0.2 * (1.0 - oracle_constant_ssim(0.0, 1.0));
    CHECK(rgb_loss(zeros, ones, 0.2) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("rgb_loss adjoint matches finite differences") {
    Rng rng(12);
    Image img = random_image(16, 16, rng);
    const Image gt = random_image(16, 16, rng);
    const Image adj = rgb_loss_adjoint(img, gt, 0.2);
    const double h = 1e-4;
    for (std::size_t i = 0; i < img.size(); i += 11) {
        const double saved = img.rgb[i];
        img.rgb[i] = saved + h;
        const double fp = rgb_loss(img, gt, 0.2);
        img.rgb[i] = saved - h;
        const double fm = rgb_loss(img, gt, 0.2);
        img.rgb[i] = saved;
        CHECK(testutil::grad_close(adj.rgb[i], (fp - fm) / (2.0 * h)));
    }
}

TEST_CASE("paired reconstruction loss") {
    CHECK(paired_rec_loss(0.0, 0.0, 0.25) == 0.0);
    CHECK(paired_rec_loss(0.2, 0.4, 0.25) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(paired_rec_loss(0.7, 123.0, 0.0) == 0.7);
}

TEST_CASE("lfc loss values") {
    Rng rng(3);
    const Image img = random_image(16, 16, rng);
    CHECK(lfc_loss(img, img, kLfcKernel) == 0.0);

    const Image zeros(16, 16), ones(16, 16, Vec3{1, 1, 1});
    CHECK(lfc_loss(zeros, ones, kLfcKernel) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lfc adjoint differentiates the learner branch only") {
    Rng rng(4);
    Image a = random_image(16, 16, rng);
    const Image b = random_image(16, 16, rng);

    const Image adj = lfc_adjoint(a, b, kLfcKernel);
    const double h = 1e-4;
    for (std::size_t i = 0; i < a.size(); i += 13) {
        const double saved = a.rgb[i];
        a.rgb[i] = saved + h;
        const double fp = lfc_loss(a, b, kLfcKernel);
        a.rgb[i] = saved - h;
        const double fm = lfc_loss(a, b, kLfcKernel);
        a.rgb[i] = saved;
        CHECK(testutil::grad_close(adj.rgb[i], (fp - fm) / (2.0 * h)));
    }

    // Identical branches: sign(0) = 0 everywhere, so the adjoint vanishes.
    const Image zero_adj = lfc_adjoint(a, a, kLfcKernel);
    for (double v : zero_adj.rgb) CHECK(v == 0.0);
}

TEST_CASE("lambda schedule follows the linear warm-up") {
    CHECK(lambda_schedule(0, 0.05, 7000) == 0.0);
    CHECK(lambda_schedule(7000, 0.05, 7000) == 0.05);
    CHECK(lambda_schedule(3500, 0.05, 7000) == 0.025);
    CHECK(lambda_schedule(2000, 0.05, 4000) == 0.025);
    CHECK(lambda_schedule(123456, 0.05, 7000) == 0.05);

    // Monotone non-decreasing.
    double prev = -1.0;
    for (int t = 0; t <= 9000; t += 37) {
        const double cur = lambda_schedule(t, 0.05, 7000);
        CHECK(cur >= prev);
        prev = cur;
    }
    CHECK_THROWS_AS(lambda_schedule(10, 0.05, 0), ConfigError);
}

TEST_CASE("total loss assembles the breakdown") {
    LossWeights w;
    w.beta = 0.25;
    w.lambda_max = 0.05;
    w.t_warm = 7000;

    const LossBreakdown at0 = total_loss(0.3, 0.5, 0.2, w, 0);
    CHECK(at0.lambda_t == 0.0);
    CHECK(at0.total == doctest::Approx(0.3 + 0.25 * 0.5).epsilon(1e-14));

    const LossBreakdown no_lfc = total_loss(0.3, 0.5, 0.0, w, 9000);
    CHECK(no_lfc.total == doctest::Approx(paired_rec_loss(0.3, 0.5, 0.25)).epsilon(1e-14));

    const LossBreakdown warm = total_loss(0.2, 0.4, 0.1, w, 8000);
    CHECK(warm.total == doctest::Approx(0.305).epsilon(1e-14));
    CHECK(std::fabs(warm.total - (warm.rgb_a + w.beta * warm.rgb_b + warm.lambda_t * warm.lfc)) <=
          1e-10);
}

TEST_CASE("multibranch pair expansion") {
    CHECK(multibranch_pairs(2).size() == 1);
    CHECK(multibranch_pairs(3).size() == 3);
    CHECK(multibranch_pairs(4).size() == 6);
    CHECK_THROWS_AS(multibranch_pairs(1), ConfigError);

    // Two-branch default: branch b (index 1) is the detached target.
    const auto pairs = multibranch_pairs(2);
    CHECK(pairs[0].first == 1);
    CHECK(pairs[0].second == 0);
    // Higher index detached in every pair.
    for (const auto& [target, learner] : multibranch_pairs(4)) CHECK(target > learner);
}
