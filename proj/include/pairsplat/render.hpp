// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/dropout.hpp"
#include "pairsplat/image.hpp"
#include "pairsplat/scene.hpp"
#include "pairsplat/vec.hpp"

#include <optional>
#include <span>
#include <vector>

namespace pairsplat {

// Screen-space covariance floor added to the diagonal (pixels^2).
constexpr double kCovarianceFloor = 0.3;
// Per-pixel alpha ceiling; keeps (1 - alpha) away from zero in the adjoint.
constexpr double kAlphaClip = 0.99;
// Footprint radius (in marginal sigmas) used to cull against the image at
// projection time.
constexpr double kCullSigmas = 3.0;
// Per-pixel evaluation cutoff. Outside this many marginal sigmas the weight
// is below 7e-13, so skipping keeps the forward/adjoint pair smooth at every
// tolerance the gradient checks use.
constexpr double kCutoffSigmas = 7.5;

// A Gaussian projected into one view: screen-space mean/covariance plus the
// depth-sorting key.
struct Projected2D {
    Vec2 mean2d;
    SymMat2 cov2d; // regularized (floor already added)
    double depth = 0.0;
    int source_index = 0;
};

// Projected Gaussian ready for compositing.
struct Splat {
    Projected2D geo;
    SymMat2 inv_cov;
    double opacity = 0.0; // activated, compensation applied
    Vec3 color;           // activated
    // Continuous footprint bounds; pixels outside are skipped.
    double bx0 = 0.0, bx1 = 0.0, by0 = 0.0, by1 = 0.0;
};

Splat make_splat(const Projected2D& geo, double opacity, const Vec3& color);

struct RenderOptions {
    double compensation = 1.0;             // survivor opacity multiplier
    double early_stop_transmittance = 1e-4; // 0 disables early stopping
    int jobs = 1;                           // row-block parallelism; 1 = serial
};

// Perspective projection of one Gaussian. Builds Sigma = R diag(exp(ls))^2 R^T,
// moves it to camera space, and applies the projection Jacobian at the mean.
// Absent when the mean is at or behind the near plane or the 3-sigma footprint
// misses the image entirely.
std::optional<Projected2D> project_gaussian(const GaussianPrimitive& g, const Camera& cam);

// Mask-filtered projection of a whole field, sorted by (depth, source index).
std::vector<Splat> project_field(const GaussianField& field, const DropoutMask& mask,
                                 const Camera& cam, double compensation);

// Front-to-back alpha compositing at one pixel over depth-sorted splats.
Vec3 composite(const Vec2& pixel, std::span<const Splat> sorted, const Vec3& background,
               double early_stop_transmittance = 1e-4);

// Full-frame render of the kept subset. With the all-ones mask this is plain
// splatting; deterministic for fixed inputs and options.
Image render(const GaussianField& field, const DropoutMask& mask, const Camera& cam,
             const Vec3& background, const RenderOptions& opts = {});

// Adjoint of render: adds d(sum upstream . rendered)/d(theta) into field.grads
// for every raw parameter of every kept primitive. Must be called with the
// same mask/camera/options as the matching forward render.
void render_backward(GaussianField& field, const DropoutMask& mask, const Camera& cam,
                     const Vec3& background, const Image& upstream,
                     const RenderOptions& opts = {});

} // namespace pairsplat
