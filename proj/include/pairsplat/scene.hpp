// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/image.hpp"
#include "pairsplat/vec.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pairsplat {

// Raw learnable parameters of one anisotropic 3D Gaussian. Scales live in
// log-space and opacity/color in logit-space so the optimizer never needs a
// projection step; the quaternion is stored unnormalized and normalized at
// the point of use.
struct GaussianPrimitive {
    Vec3 position;
    Vec3 log_scale;
    Vec4 rotation; // quaternion (w, x, y, z)
    double opacity_logit = 0.0;
    Vec3 color_logit;

    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 color() const {
        return {sigmoid(color_logit.x), sigmoid(color_logit.y), sigmoid(color_logit.z)};
    }
};

static_assert(sizeof(GaussianPrimitive) == 14 * sizeof(double),
              "primitive must pack into 14 doubles for flat optimizer views");

constexpr int kParamsPerPrimitive = 14;

// Flat offsets of each parameter group inside a primitive.
enum class ParamGroup { Position = 0, LogScale, Rotation, OpacityLogit, ColorLogit };
constexpr int kGroupOffset[5] = {0, 3, 6, 10, 11};
constexpr int kGroupSize[5] = {3, 3, 4, 1, 3};
const char* param_group_name(ParamGroup g);

// The shared parameter set: N primitives plus a co-shaped gradient
// accumulator. N is fixed for the lifetime of a training run.
struct GaussianField {
    std::vector<GaussianPrimitive> primitives;
    std::vector<GaussianPrimitive> grads;

    GaussianField() = default;
    explicit GaussianField(std::size_t n) : primitives(n), grads(n) { zero_grads(); }

    std::size_t size() const { return primitives.size(); }
    void zero_grads();

    // Flat 14N views over the packed structs.
    double* param_data() { return reinterpret_cast<double*>(primitives.data()); }
    const double* param_data() const { return reinterpret_cast<const double*>(primitives.data()); }
    double* grad_data() { return reinterpret_cast<double*>(grads.data()); }
    const double* grad_data() const { return reinterpret_cast<const double*>(grads.data()); }
};

// Pinhole camera with world-to-camera pose; x_cam = rotation * x + translation,
// camera looks along +z, pixels are (fx x/z + cx, fy y/z + cy).
struct Camera {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    Mat3 rotation;
    Vec3 translation;
    int width = 0, height = 0;
    double near = 0.1;

    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
};

bool camera_valid(const Camera& cam, double tol = 1e-6);

// Cameras with ground truth, partitioned into train / held-out.
struct ViewSet {
    std::vector<Camera> cameras;
    std::vector<Image> ground_truth;
    std::vector<int> train_idx;
    std::vector<int> heldout_idx;
};

// Ground-truth field with positions uniform in a cube of side 2*extent,
// per-axis scales in [extent/50, extent/10], uniform random orientations,
// opacities in [0.5, 0.95], colors in [0.1, 0.9]. Deterministic in seed.
GaussianField generate_synthetic_scene(std::uint64_t seed, int count, double extent);

// n cameras evenly spaced on a horizontal ring at distance `radius` from
// look_at (the ring sits slightly above the target so views are not all
// coplanar with it); every optical axis passes through look_at.
std::vector<Camera> make_orbit_cameras(int n, double radius, const Vec3& look_at, int width,
                                       int height, double fov_deg);

// Deterministic disjoint, exhaustive partition of 0..n_views-1.
std::pair<std::vector<int>, std::vector<int>> split_views(int n_views, int n_train,
                                                          std::uint64_t seed);

enum class InitMode { NoisyTruth, Random };
InitMode init_mode_from_string(const std::string& s);

// Training start point: truth perturbed by zero-mean Gaussian noise on every
// raw parameter, or a fresh random field of the same size.
GaussianField init_field(const GaussianField& truth, InitMode mode, double noise_scale,
                         std::uint64_t seed);

// JSON de/serialization. The scene schema is
//   {"primitives": [[px,py,pz, ls1,ls2,ls3, qw,qx,qy,qz, o, cr,cg,cb], ...]}
// and cameras are
//   {"focal":[fx,fy], "principal":[cx,cy], "rotation":[9 row-major],
//    "translation":[3], "width":w, "height":h, "near":n}.
std::string scene_to_json(const GaussianField& field);
GaussianField scene_from_json(const std::string& text);
std::string camera_to_json_string(const Camera& cam);
Camera camera_from_json_string(const std::string& text);
void save_scene(const GaussianField& field, const std::string& path);
GaussianField load_scene(const std::string& path);

} // namespace pairsplat
