// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pairsplat/errors.hpp"
#include "pairsplat/kernels.hpp"
#include "pairsplat/render.hpp"

#include "test_util.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

using namespace pairsplat;
using testutil::gradcheck_camera;
using testutil::gradcheck_field;
using testutil::random_image;

namespace {

Camera axis_camera(double fx, int size) {
    Camera cam;
    cam.fx = cam.fy = fx;
    cam.cx = cam.cy = size / 2.0;
    cam.width = cam.height = size;
    cam.near = 0.1;
    return cam; // identity pose, looking down +z
}

GaussianPrimitive isotropic_primitive(const Vec3& pos, double scale, double opacity,
                                      const Vec3& color) {
    GaussianPrimitive g;
    g.position = pos;
    g.log_scale = {std::log(scale), std::log(scale), std::log(scale)};
    g.rotation = {1, 0, 0, 0};
    g.opacity_logit = logit(opacity);
    g.color_logit = {logit(color.x), logit(color.y), logit(color.z)};
    return g;
}

Splat test_splat(const Vec2& mean, const SymMat2& cov, double depth, double opacity,
                 const Vec3& color) {
    Projected2D p;
    p.mean2d = mean;
    p.cov2d = cov;
    p.depth = depth;
    return make_splat(p, opacity, color);
}

double render_dot(const GaussianField& field, const DropoutMask& mask, const Camera& cam,
                  const Vec3& bg, const Image& upstream, const RenderOptions& opts) {
    const Image img = render(field, mask, cam, bg, opts);
    return kern::active().dot(img.data(), upstream.data(), img.size());
}

} // namespace

TEST_CASE("on-axis projection hits the principal point with the expected footprint") {
    const Camera cam = axis_camera(50.0, 64);
    const double s = 0.05, z = 2.0;
    const auto g = isotropic_primitive({0, 0, z}, s, 0.8, {0.5, 0.5, 0.5});
    const auto proj = project_gaussian(g, cam);
    REQUIRE(proj.has_value());
    CHECK(proj->mean2d.x == doctest::Approx(32.0).epsilon(1e-12));
    CHECK(proj->mean2d.y == doctest::Approx(32.0).epsilon(1e-12));
    const double expect = (50.0 * s / z) * (50.0 * s / z);
    CHECK(proj->cov2d.a == doctest::Approx(expect + kCovarianceFloor).epsilon(1e-9));
    CHECK(proj->cov2d.c == doctest::Approx(expect + kCovarianceFloor).epsilon(1e-9));
    CHECK(proj->cov2d.b == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(proj->depth == z);
    CHECK(proj->cov2d.min_eigenvalue() >= kCovarianceFloor - 1e-12);
}

TEST_CASE("near-plane and off-screen culling return absent") {
    const Camera cam = axis_camera(50.0, 64);
    auto g = isotropic_primitive({0, 0, cam.near / 2.0}, 0.05, 0.8, {0.5, 0.5, 0.5});
    CHECK_FALSE(project_gaussian(g, cam).has_value());

    // Way off to the side: 3-sigma footprint misses the image.
    g = isotropic_primitive({50.0, 0, 2.0}, 0.01, 0.8, {0.5, 0.5, 0.5});
    CHECK_FALSE(project_gaussian(g, cam).has_value());
}

TEST_CASE("projected covariance matches a Monte-Carlo projection oracle") {
    const Camera cam = testutil::gradcheck_camera(64);
    Rng rng(31);
    GaussianPrimitive g = gradcheck_field(31, 1).primitives[0];
    // A generic anisotropic pose at moderate distance from the camera.
    const auto proj = project_gaussian(g, cam);
    REQUIRE(proj.has_value());

    const Mat3 rot = quat_to_rotation(g.rotation);
    const std::size_t n = 1000000;
    double mu = 0, mv = 0;
    std::vector<double> us(n), vs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 nrm{rng.next_normal(), rng.next_normal(), rng.next_normal()};
        const Vec3 local{std::exp(g.log_scale.x) * nrm.x, std::exp(g.log_scale.y) * nrm.y,
                         std::exp(g.log_scale.z) * nrm.z};
        const Vec3 world = g.position + rot * local;
        const Vec3 c = cam.to_camera(world);
        us[i] = cam.fx * c.x / c.z + cam.cx;
        vs[i] = cam.fy * c.y / c.z + cam.cy;
        mu += us[i];
        mv += vs[i];
    }
    mu /= static_cast<double>(n);
    mv /= static_cast<double>(n);
    double saa = 0, sab = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        saa += (us[i] - mu) * (us[i] - mu);
        sab += (us[i] - mu) * (vs[i] - mv);
        sbb += (vs[i] - mv) * (vs[i] - mv);
    }
    saa /= static_cast<double>(n - 1);
    sab /= static_cast<double>(n - 1);
    sbb /= static_cast<double>(n - 1);

    // Compare against the linearized covariance with the floor removed.
    const double ja = proj->cov2d.a - kCovarianceFloor;
    const double jb = proj->cov2d.b;
    const double jc = proj->cov2d.c - kCovarianceFloor;
    const double frob_mc = std::sqrt(saa * saa + 2 * sab * sab + sbb * sbb);
    const double frob_diff = std::sqrt((ja - saa) * (ja - saa) + 2 * (jb - sab) * (jb - sab) +
                                       (jc - sbb) * (jc - sbb));
    CHECK(frob_diff <= 0.05 * frob_mc);
}

TEST_CASE("composite basics") {
    const Vec3 black{0, 0, 0};
    const std::vector<Splat> empty;
    CHECK(composite({5, 5}, empty, black).x == 0.0);
    CHECK(composite({5, 5}, empty, {0.2, 0.4, 0.6}).z == 0.6);

    // One splat evaluated at its mean: alpha = opacity.
    const SymMat2 eye{1.0, 0.0, 1.0};
    std::vector<Splat> one = {test_splat({5, 5}, eye, 1.0, 0.5, {1, 0, 0})};
    const Vec3 c1 = composite({5, 5}, one, black);
    CHECK(c1.x == 0.5);
    CHECK(c1.y == 0.0);

    // Front red 0.5, back green 0.5.
    std::vector<Splat> two = {test_splat({5, 5}, eye, 1.0, 0.5, {1, 0, 0}),
                              test_splat({5, 5}, eye, 2.0, 0.5, {0, 1, 0})};
    const Vec3 c2 = composite({5, 5}, two, black);
    CHECK(c2.x == 0.5);
    CHECK(c2.y == 0.25);
    CHECK(c2.z == 0.0);
}

TEST_CASE("transmittance telescoping: unit colors over unit background give 1") {
    const SymMat2 eye{1.0, 0.0, 1.0};
    const Vec3 white{1, 1, 1};

    // Dyadic alphas at the mean: every product and sum is exact in binary.
    std::vector<Splat> dyadic = {test_splat({5, 5}, eye, 1.0, 0.5, white),
                                 test_splat({5, 5}, eye, 2.0, 0.25, white),
                                 test_splat({5, 5}, eye, 3.0, 0.5, white)};
    const Vec3 exact = composite({5, 5}, dyadic, white, 0.0);
    CHECK(exact.x == 1.0);
    CHECK(exact.y == 1.0);
    CHECK(exact.z == 1.0);

    // Generic alphas: exact up to fp rounding of the recurrence.
    Rng rng(23);
    std::vector<Splat> generic;
    for (int i = 0; i < 12; ++i)
        generic.push_back(test_splat({5 + rng.uniform(-1, 1), 5 + rng.uniform(-1, 1)},
                                     {1.0 + rng.next_double(), 0.2, 1.0 + rng.next_double()},
                                     1.0 + i, rng.uniform(0.05, 0.95), white));
    const Vec3 approx_one = composite({5, 5}, generic, white, 0.0);
    CHECK(std::fabs(approx_one.x - 1.0) <= 1e-12);
    CHECK(std::fabs(approx_one.y - 1.0) <= 1e-12);
    CHECK(std::fabs(approx_one.z - 1.0) <= 1e-12);
}

TEST_CASE("render edge cases: empty field, all dropped, identity mask") {
    const Camera cam = axis_camera(40.0, 16);
    const Vec3 bg{0.1, 0.2, 0.3};

    GaussianField empty(0);
    const Image i0 = render(empty, DropoutMask::all_ones(0), cam, bg);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK(i0.at(x, y, 0) == 0.1);
            CHECK(i0.at(x, y, 2) == 0.3);
        }

    const GaussianField field = gradcheck_field(77, 8);
    DropoutMask none;
    none.keep.assign(8, 0);
    none.rate = 0.5;
    const Image i1 = render(field, none, gradcheck_camera(), bg);
    for (std::size_t i = 0; i < i1.size(); i += 3) CHECK(i1.rgb[i] == 0.1);

    // All-ones mask with the dropout machinery engaged (nonzero nominal rate,
    // compensation off) is bit-identical to the plain render.
    DropoutMask manual;
    manual.keep.assign(8, 1);
    manual.rate = 0.4; // compensation disabled, so the rate must not matter
    RenderOptions opts;
    opts.compensation = 1.0;
    const Image a = render(field, DropoutMask::all_ones(8), gradcheck_camera(), bg, opts);
    const Image b = render(field, manual, gradcheck_camera(), bg, opts);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);

    DropoutMask wrong;
    wrong.keep.assign(5, 1);
    CHECK_THROWS_AS(render(field, wrong, gradcheck_camera(), bg), ShapeError);
}

TEST_CASE("render agrees with the naive reference renderer") {
    const GaussianField field = generate_synthetic_scene(5, 40, 1.0);
    const Camera cam = make_orbit_cameras(3, 3.2, {0, 0, 0}, 32, 32, 50.0)[1];
    Rng rng(9);
    const DropoutMask mask = sample_mask(field.size(), 0.2, rng);
    RenderOptions opts;
    opts.compensation = compensation_factor(0.2, true);
    opts.early_stop_transmittance = 0.0; // match the exhaustive reference
    const Image fast = render(field, mask, cam, {0, 0, 0}, opts);
    const Image naive = testutil::render_naive(field, mask, cam, {0, 0, 0}, opts.compensation);
    for (std::size_t i = 0; i < fast.size(); ++i)
        CHECK(fast.rgb[i] == doctest::Approx(naive.rgb[i]).epsilon(1e-9));
}

TEST_CASE("output channels stay in [0,1] for valid inputs") {
    const GaussianField field = generate_synthetic_scene(13, 60, 1.0);
    const Camera cam = make_orbit_cameras(2, 3.2, {0, 0, 0}, 24, 24, 50.0)[0];
    const Image img = render(field, DropoutMask::all_ones(field.size()), cam, {1, 1, 1});
    for (double v : img.rgb) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("storage permutation with matching mask leaves the render unchanged") {
    const GaussianField field = generate_synthetic_scene(19, 25, 1.0);
    const Camera cam = make_orbit_cameras(1, 3.2, {0, 0, 0}, 24, 24, 50.0)[0];
    Rng rng(4);
    DropoutMask mask = sample_mask(field.size(), 0.3, rng);

    std::vector<std::size_t> perm(field.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);

    GaussianField shuffled(field.size());
    DropoutMask shuffled_mask = mask;
    for (std::size_t i = 0; i < field.size(); ++i) {
        shuffled.primitives[i] = field.primitives[perm[i]];
        shuffled_mask.keep[i] = mask.keep[perm[i]];
    }
    const Image a = render(field, mask, cam, {0, 0, 0});
    const Image b = render(shuffled, shuffled_mask, cam, {0, 0, 0});
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("duplicate primitives at equal depth compose identically in either order") {
    const Camera cam = axis_camera(40.0, 16);
    GaussianField field(2);
    field.primitives[0] = isotropic_primitive({0.05, 0.02, 2.0}, 0.08, 0.6, {0.9, 0.2, 0.4});
    field.primitives[1] = field.primitives[0];
    GaussianField swapped = field;
    std::swap(swapped.primitives[0], swapped.primitives[1]);
    const Image a = render(field, DropoutMask::all_ones(2), cam, {0, 0, 0});
    const Image b = render(swapped, DropoutMask::all_ones(2), cam, {0, 0, 0});
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("early stopping changes pixels by at most the threshold") {
    // Stack opaque primitives so the transmittance actually crosses 1e-4.
    GaussianField field(10);
    for (int i = 0; i < 10; ++i)
        field.primitives[static_cast<std::size_t>(i)] =
            isotropic_primitive({0.01 * i, 0.0, 2.0 + 0.1 * i}, 0.15, 0.93, {0.5, 0.7, 0.9});
    const Camera cam = axis_camera(40.0, 16);

    RenderOptions stopped;
    stopped.early_stop_transmittance = 1e-4;
    RenderOptions exhaustive;
    exhaustive.early_stop_transmittance = 0.0;
    const Image a = render(field, DropoutMask::all_ones(10), cam, {1, 1, 1}, stopped);
    const Image b = render(field, DropoutMask::all_ones(10), cam, {1, 1, 1}, exhaustive);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        max_diff = std::max(max_diff, std::fabs(a.rgb[i] - b.rgb[i]));
    CHECK(max_diff <= 1e-4);
    CHECK(max_diff > 0.0); // the stop actually triggered
}

TEST_CASE("render_backward: zero upstream and dropped primitives get zero gradient") {
    GaussianField field = gradcheck_field(55, 6);
    const Camera cam = gradcheck_camera();
    const Image zeros(16, 16);
    render_backward(field, DropoutMask::all_ones(6), cam, {0, 0, 0}, zeros);
    for (std::size_t i = 0; i < field.size() * kParamsPerPrimitive; ++i)
        CHECK(field.grad_data()[i] == 0.0);

    DropoutMask mask = DropoutMask::all_ones(6);
    mask.keep[2] = 0;
    Rng rng(6);
    const Image upstream = random_image(16, 16, rng, -1.0, 1.0);
    render_backward(field, mask, cam, {0, 0, 0}, upstream);
    const double* g = field.grad_data();
    double kept_norm = 0.0;
    for (int e = 0; e < kParamsPerPrimitive; ++e) {
        CHECK(g[2 * kParamsPerPrimitive + e] == 0.0);
        kept_norm += std::fabs(g[0 * kParamsPerPrimitive + e]);
    }
    CHECK(kept_norm > 0.0);
}

TEST_CASE("analytic render gradients match central finite differences") {
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        GaussianField field = gradcheck_field(seed, 5);
        const Camera cam = gradcheck_camera();
        Rng rng(seed + 7);
        const Image upstream = random_image(16, 16, rng, -1.0, 1.0);
        DropoutMask mask = DropoutMask::all_ones(5);
        mask.keep[static_cast<std::size_t>(rng.below(5))] = 0; // one dropped branch member
        mask.rate = 0.1;

        RenderOptions opts;
        opts.compensation = compensation_factor(0.1, true);
        opts.early_stop_transmittance = 0.0;

        field.zero_grads();
        render_backward(field, mask, cam, {0, 0, 0}, upstream, opts);
        std::vector<double> analytic(field.grad_data(),
                                     field.grad_data() + field.size() * kParamsPerPrimitive);

        auto objective = [&]() { return render_dot(field, mask, cam, {0, 0, 0}, upstream, opts); };
        for (std::size_t idx = 0; idx < field.size() * kParamsPerPrimitive; ++idx) {
            const double fd = testutil::fd_param(field, idx, objective);
            INFO("seed ", seed, " param ", idx);
            CHECK(testutil::grad_close(analytic[idx], fd));
        }
    }
}

TEST_CASE("forward/backward directional consistency over random directions") {
    GaussianField field = gradcheck_field(202, 5);
    const Camera cam = gradcheck_camera();
    Rng rng(11);
    const Image upstream = random_image(16, 16, rng, -1.0, 1.0);
    const DropoutMask mask = DropoutMask::all_ones(5);

    RenderOptions opts; // defaults: early stop active, as in production
    field.zero_grads();
    render_backward(field, mask, cam, {0, 0, 0}, upstream, opts);
    const std::size_t n = field.size() * kParamsPerPrimitive;
    std::vector<double> grad(field.grad_data(), field.grad_data() + n);

    const double h = 1e-5;
    int passed = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> dir(n);
        for (auto& d : dir) d = rng.next_normal();
        double norm = std::sqrt(kern::active().dot(dir.data(), dir.data(), n));
        for (auto& d : dir) d /= norm;

        std::vector<double> saved(field.param_data(), field.param_data() + n);
        for (std::size_t i = 0; i < n; ++i) field.param_data()[i] = saved[i] + h * dir[i];
        const double fp = render_dot(field, mask, cam, {0, 0, 0}, upstream, opts);
        for (std::size_t i = 0; i < n; ++i) field.param_data()[i] = saved[i] - h * dir[i];
        const double fm = render_dot(field, mask, cam, {0, 0, 0}, upstream, opts);
        std::copy(saved.begin(), saved.end(), field.param_data());

        const double fd = (fp - fm) / (2.0 * h);
        const double an = kern::active().dot(grad.data(), dir.data(), n);
        if (testutil::grad_close(an, fd, 1e-4, 1e-7)) ++passed;
    }
    CHECK(passed == 100);
}

TEST_CASE("parallel backward agrees with serial per gradient entry") {
    GaussianField serial_field = generate_synthetic_scene(71, 30, 1.0);
    GaussianField parallel_field = serial_field;
    const Camera cam = make_orbit_cameras(1, 3.2, {0, 0, 0}, 32, 32, 50.0)[0];
    Rng rng(8);
    const Image upstream = random_image(32, 32, rng, -1.0, 1.0);
    const DropoutMask mask = DropoutMask::all_ones(30);

    RenderOptions serial_opts, parallel_opts;
    serial_opts.jobs = 1;
    parallel_opts.jobs = 3;
    render_backward(serial_field, mask, cam, {0, 0, 0}, upstream, serial_opts);
    render_backward(parallel_field, mask, cam, {0, 0, 0}, upstream, parallel_opts);

    // Forward images are bit-identical regardless of jobs.
    const Image fs = render(serial_field, mask, cam, {0, 0, 0}, serial_opts);
    const Image fp = render(parallel_field, mask, cam, {0, 0, 0}, parallel_opts);
    CHECK(std::memcmp(fs.data(), fp.data(), fs.size() * sizeof(double)) == 0);

    const double* gs = serial_field.grad_data();
    const double* gp = parallel_field.grad_data();
    for (std::size_t i = 0; i < serial_field.size() * kParamsPerPrimitive; ++i) {
        const double scale = std::max({std::fabs(gs[i]), std::fabs(gp[i]), 1e-12});
        CHECK(std::fabs(gs[i] - gp[i]) / scale <= 1e-6);
    }
}
