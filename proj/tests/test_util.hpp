// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/render.hpp"
#include "pairsplat/rng.hpp"
#include "pairsplat/scene.hpp"
#include "pairsplat/trainer.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace pairsplat::testutil {

inline Image random_image(int w, int h, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Image img(w, h);
    for (auto& v : img.rgb) v = rng.uniform(lo, hi);
    return img;
}

// |a - fd| <= max(abs_floor, rel * max(|a|, |fd|))
inline bool grad_close(double analytic, double fd, double rel = 1e-4, double abs_floor = 1e-7) {
    const double diff = std::fabs(analytic - fd);
    return diff <= std::max(abs_floor, rel * std::max(std::fabs(analytic), std::fabs(fd)));
}

// Central finite difference of f along coordinate `idx` of the flat parameter
// view of `field`.
inline double fd_param(GaussianField& field, std::size_t idx,
                       const std::function<double()>& f, double h = 1e-4) {
    double* p = field.param_data();
    const double saved = p[idx];
    p[idx] = saved + h;
    const double fp = f();
    p[idx] = saved - h;
    const double fm = f();
    p[idx] = saved;
    return (fp - fm) / (2.0 * h);
}

// Scene tailored for finite-difference checks: footprints well inside the
// image, opacities low enough that neither the alpha clip nor early stopping
// can introduce a kink within the FD step.
inline GaussianField gradcheck_field(std::uint64_t seed, int count, double max_opacity = 0.8) {
    Rng rng(seed);
    GaussianField field(static_cast<std::size_t>(count));
    for (auto& g : field.primitives) {
        g.position = {rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45),
                      rng.uniform(-0.45, 0.45)};
        g.log_scale = {rng.uniform(std::log(0.05), std::log(0.16)),
                       rng.uniform(std::log(0.05), std::log(0.16)),
                       rng.uniform(std::log(0.05), std::log(0.16))};
        double n = 0.0;
        do {
            g.rotation = {rng.next_normal(), rng.next_normal(), rng.next_normal(),
                          rng.next_normal()};
            n = g.rotation.norm();
        } while (n < 1e-9);
        g.opacity_logit = logit(rng.uniform(0.3, max_opacity));
        g.color_logit = {logit(rng.uniform(0.2, 0.8)), logit(rng.uniform(0.2, 0.8)),
                         logit(rng.uniform(0.2, 0.8))};
    }
    return field;
}

inline Camera gradcheck_camera(int size = 16) {
    return make_orbit_cameras(1, 3.0, Vec3{0, 0, 0}, size, size, 50.0)[0];
}

// Seconds-scale protocol for trainer/harness tests.
inline TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.scene_seed = 5;
    cfg.scene_count = 15;
    cfg.views_n = 5;
    cfg.views_train = 2;
    cfg.image_size = 20;
    cfg.init_noise = 0.08;
    cfg.dropout_rate = 0.1;
    cfg.branches = 2;
    cfg.weights.t_warm = 20;
    cfg.iterations = 30;
    cfg.eval_every = 10;
    cfg.seed = 1;
    return cfg;
}

// Reference forward renderer: project everything kept, sort, and composite
// every splat at every pixel with no footprint cutoff and no early stopping.
inline Image render_naive(const GaussianField& field, const DropoutMask& mask, const Camera& cam,
                          const Vec3& background, double compensation = 1.0) {
    std::vector<Splat> splats = project_field(field, mask, cam, compensation);
    Image out(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const Vec2 pix{x + 0.5, y + 0.5};
            Vec3 color{0, 0, 0};
            double t = 1.0;
            for (const Splat& s : splats) {
                const Vec2 d = pix - s.geo.mean2d;
                const double q = s.inv_cov.quad(d);
                const double alpha = std::min(kAlphaClip, s.opacity * std::exp(-0.5 * q));
                color += s.color * (alpha * t);
                t *= 1.0 - alpha;
            }
            out.set_pixel(x, y, color + background * t);
        }
    return out;
}

} // namespace pairsplat::testutil
