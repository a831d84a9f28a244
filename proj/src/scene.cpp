// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/scene.hpp"

#include "pairsplat/errors.hpp"
#include "pairsplat/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pairsplat {

const char* param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::Position: return "position";
        case ParamGroup::LogScale: return "log_scale";
        case ParamGroup::Rotation: return "rotation";
        case ParamGroup::OpacityLogit: return "opacity_logit";
        default: return "color_logit";
    }
}

void GaussianField::zero_grads() {
    if (!grads.empty()) std::memset(grads.data(), 0, grads.size() * sizeof(GaussianPrimitive));
}

bool camera_valid(const Camera& cam, double tol) {
    if (!(cam.fx > 0) || !(cam.fy > 0) || !(cam.near > 0)) return false;
    if (cam.width <= 0 || cam.height <= 0) return false;
    if (cam.cx < 0 || cam.cx >= cam.width || cam.cy < 0 || cam.cy >= cam.height) return false;
    const Mat3 rtr = cam.rotation.transposed() * cam.rotation;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::fabs(rtr(i, j) - (i == j ? 1.0 : 0.0)) > tol) return false;
    return std::fabs(cam.rotation.det() - 1.0) < 1e-4;
}

namespace {

Vec4 random_unit_quaternion(Rng& rng) {
    Vec4 q;
    double n = 0.0;
    do {
        q = {rng.next_normal(), rng.next_normal(), rng.next_normal(), rng.next_normal()};
        n = q.norm();
    } while (n < 1e-12);
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

GaussianPrimitive random_primitive(Rng& rng, double extent) {
    GaussianPrimitive g;
    g.position = {rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                  rng.uniform(-extent, extent)};
    const double lo = std::log(extent / 50.0), hi = std::log(extent / 10.0);
    g.log_scale = {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
    g.rotation = random_unit_quaternion(rng);
    g.opacity_logit = logit(rng.uniform(0.5, 0.95));
    g.color_logit = {logit(rng.uniform(0.1, 0.9)), logit(rng.uniform(0.1, 0.9)),
                     logit(rng.uniform(0.1, 0.9))};
    return g;
}

} // namespace

GaussianField generate_synthetic_scene(std::uint64_t seed, int count, double extent) {
    if (count < 1) throw ConfigError("generate_synthetic_scene: count must be >= 1");
    if (!(extent > 0)) throw ConfigError("generate_synthetic_scene: extent must be > 0");
    Rng rng(seed);
    GaussianField field(static_cast<std::size_t>(count));
    for (auto& g : field.primitives) g = random_primitive(rng, extent);
    return field;
}

std::vector<Camera> make_orbit_cameras(int n, double radius, const Vec3& look_at, int width,
                                       int height, double fov_deg) {
    if (n < 1) throw ConfigError("make_orbit_cameras: n must be >= 1");
    if (!(radius > 0) || !(fov_deg > 0) || !(fov_deg < 180))
        throw ConfigError("make_orbit_cameras: radius > 0 and 0 < fov_deg < 180 required");

    const double fov = fov_deg * M_PI / 180.0;
    const double focal = 0.5 * width / std::tan(0.5 * fov);
    const double elevation = 0.3; // radians above the horizontal plane
    const Vec3 up{0.0, 0.0, 1.0};

    std::vector<Camera> cams;
    cams.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double theta = 2.0 * M_PI * k / n;
        const Vec3 center = look_at + Vec3{std::cos(theta) * std::cos(elevation),
                                           std::sin(theta) * std::cos(elevation),
                                           std::sin(elevation)} *
                                          radius;
        const Vec3 forward = (look_at - center).normalized();
        const Vec3 right = forward.cross(up).normalized();
        const Vec3 down = forward.cross(right); // image y grows downward

        Camera cam;
        cam.fx = cam.fy = focal;
        cam.cx = width / 2.0;
        cam.cy = height / 2.0;
        cam.width = width;
        cam.height = height;
        cam.near = 0.05 * radius;
        for (int c = 0; c < 3; ++c) {
            cam.rotation(0, c) = right[c];
            cam.rotation(1, c) = down[c];
            cam.rotation(2, c) = forward[c];
        }
        cam.translation = (cam.rotation * center) * -1.0;
        cams.push_back(cam);
    }
    return cams;
}

std::pair<std::vector<int>, std::vector<int>> split_views(int n_views, int n_train,
                                                          std::uint64_t seed) {
    if (n_train < 1 || n_train >= n_views)
        throw ProtocolError("split_views: need 1 <= n_train < n_views");
    std::vector<int> order(static_cast<std::size_t>(n_views));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int i = n_views - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::uint64_t>(i + 1))]);
    std::vector<int> train(order.begin(), order.begin() + n_train);
    std::vector<int> heldout(order.begin() + n_train, order.end());
    std::sort(train.begin(), train.end());
    std::sort(heldout.begin(), heldout.end());
    return {train, heldout};
}

InitMode init_mode_from_string(const std::string& s) {
    if (s == "noisy-truth") return InitMode::NoisyTruth;
    if (s == "random") return InitMode::Random;
    throw ConfigError("init.mode: expected \"noisy-truth\" or \"random\", got \"" + s + "\"");
}

GaussianField init_field(const GaussianField& truth, InitMode mode, double noise_scale,
                         std::uint64_t seed) {
    if (noise_scale < 0) throw ConfigError("init_field: noise_scale must be >= 0");
    Rng rng(seed);
    GaussianField field(truth.size());
    if (mode == InitMode::NoisyTruth) {
        field.primitives = truth.primitives;
        double* p = field.param_data();
        const std::size_t n = field.size() * kParamsPerPrimitive;
        for (std::size_t i = 0; i < n; ++i) p[i] += noise_scale * rng.next_normal();
    } else {
        double extent = 0.0;
        for (const auto& g : truth.primitives)
            extent = std::max({extent, std::fabs(g.position.x), std::fabs(g.position.y),
                               std::fabs(g.position.z)});
        if (extent <= 0) extent = 1.0;
        for (auto& g : field.primitives) g = random_primitive(rng, extent);
    }
    return field;
}

// --- serialization ---

using nlohmann::json;

std::string scene_to_json(const GaussianField& field) {
    json prims = json::array();
    for (const auto& g : field.primitives) {
        const double* row = reinterpret_cast<const double*>(&g);
        prims.push_back(std::vector<double>(row, row + kParamsPerPrimitive));
    }
    return json{{"primitives", prims}}.dump();
}

GaussianField scene_from_json(const std::string& text) {
    json j = json::parse(text);
    const auto& prims = j.at("primitives");
    GaussianField field(prims.size());
    for (std::size_t i = 0; i < prims.size(); ++i) {
        const auto row = prims[i].get<std::vector<double>>();
        if (row.size() != kParamsPerPrimitive)
            throw IoError("scene_from_json: primitive " + std::to_string(i) + " has " +
                          std::to_string(row.size()) + " values, expected 14");
        std::memcpy(&field.primitives[i], row.data(), sizeof(GaussianPrimitive));
    }
    return field;
}

std::string camera_to_json_string(const Camera& cam) {
    json j;
    j["focal"] = {cam.fx, cam.fy};
    j["principal"] = {cam.cx, cam.cy};
    j["rotation"] = cam.rotation.m;
    j["translation"] = {cam.translation.x, cam.translation.y, cam.translation.z};
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["near"] = cam.near;
    return j.dump();
}

Camera camera_from_json_string(const std::string& text) {
    json j = json::parse(text);
    Camera cam;
    cam.fx = j.at("focal").at(0).get<double>();
    cam.fy = j.at("focal").at(1).get<double>();
    cam.cx = j.at("principal").at(0).get<double>();
    cam.cy = j.at("principal").at(1).get<double>();
    const auto rot = j.at("rotation").get<std::vector<double>>();
    if (rot.size() != 9) throw IoError("camera_from_json: rotation must have 9 entries");
    std::copy(rot.begin(), rot.end(), cam.rotation.m.begin());
    const auto tr = j.at("translation").get<std::vector<double>>();
    if (tr.size() != 3) throw IoError("camera_from_json: translation must have 3 entries");
    cam.translation = {tr[0], tr[1], tr[2]};
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.near = j.at("near").get<double>();
    return cam;
}

void save_scene(const GaussianField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_scene: cannot open " + path);
    out << scene_to_json(field) << "\n";
    if (!out) throw IoError("save_scene: write failed for " + path);
}

GaussianField load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_scene: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return scene_from_json(buf.str());
}

} // namespace pairsplat
