// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/config.hpp"

#include "pairsplat/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace pairsplat {
namespace {

using nlohmann::json;

// Rejects any key in `obj` that was not consumed by the schema walk.
void check_known(const json& obj, const std::string& prefix, const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key))
            throw ConfigError("config: unknown key '" + prefix + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& target) {
    if (obj.contains(key)) target = obj.at(key).get<T>();
}

void read_background(const json& obj, Vec3& bg) {
    if (!obj.contains("background")) return;
    const json& v = obj.at("background");
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "black")
            bg = {0, 0, 0};
        else if (s == "white")
            bg = {1, 1, 1};
        else
            throw ConfigError("config: image.background must be \"black\", \"white\" or [r,g,b]");
    } else {
        const auto arr = v.get<std::vector<double>>();
        if (arr.size() != 3)
            throw ConfigError("config: image.background array must have 3 entries");
        bg = {arr[0], arr[1], arr[2]};
    }
}

} // namespace

TrainConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: document root must be a JSON object");
    check_known(j, "", {"scene", "views", "image", "init", "dropout", "loss", "blur", "train",
                        "rng"});

    TrainConfig cfg;
    if (j.contains("scene")) {
        const json& s = j.at("scene");
        check_known(s, "scene.", {"seed", "count", "extent"});
        read(s, "seed", cfg.scene_seed);
        read(s, "count", cfg.scene_count);
        read(s, "extent", cfg.scene_extent);
    }
    if (j.contains("views")) {
        const json& s = j.at("views");
        check_known(s, "views.", {"n", "train", "radius", "fov_deg"});
        read(s, "n", cfg.views_n);
        read(s, "train", cfg.views_train);
        read(s, "radius", cfg.views_radius);
        read(s, "fov_deg", cfg.views_fov_deg);
    }
    if (j.contains("image")) {
        const json& s = j.at("image");
        check_known(s, "image.", {"size", "background"});
        read(s, "size", cfg.image_size);
        read_background(s, cfg.background);
    }
    if (j.contains("init")) {
        const json& s = j.at("init");
        check_known(s, "init.", {"mode", "noise"});
        if (s.contains("mode")) cfg.init_mode = init_mode_from_string(s.at("mode").get<std::string>());
        read(s, "noise", cfg.init_noise);
    }
    if (j.contains("dropout")) {
        const json& s = j.at("dropout");
        check_known(s, "dropout.", {"rate", "compensation"});
        read(s, "rate", cfg.dropout_rate);
        read(s, "compensation", cfg.compensation);
    }
    if (j.contains("loss")) {
        const json& s = j.at("loss");
        check_known(s, "loss.",
                    {"lambda_dssim", "beta", "lambda_max", "t_warm", "constant_lambda",
                     "symmetric_consistency"});
        read(s, "lambda_dssim", cfg.weights.lambda_dssim);
        read(s, "beta", cfg.weights.beta);
        read(s, "lambda_max", cfg.weights.lambda_max);
        read(s, "t_warm", cfg.weights.t_warm);
        read(s, "constant_lambda", cfg.constant_lambda);
        read(s, "symmetric_consistency", cfg.symmetric_consistency);
    }
    if (j.contains("blur")) {
        const json& s = j.at("blur");
        check_known(s, "blur.", {"size", "sigma"});
        read(s, "size", cfg.blur_size);
        read(s, "sigma", cfg.blur_sigma);
    }
    if (j.contains("train")) {
        const json& s = j.at("train");
        check_known(s, "train.",
                    {"iterations", "branches", "eval_every", "jobs", "lr"});
        read(s, "iterations", cfg.iterations);
        read(s, "branches", cfg.branches);
        read(s, "eval_every", cfg.eval_every);
        read(s, "jobs", cfg.jobs);
        if (s.contains("lr")) {
            const json& lr = s.at("lr");
            check_known(lr, "train.lr.",
                        {"position", "position_final", "log_scale", "rotation", "opacity",
                         "color"});
            read(lr, "position", cfg.lr.position);
            read(lr, "position_final", cfg.lr.position_final);
            read(lr, "log_scale", cfg.lr.log_scale);
            read(lr, "rotation", cfg.lr.rotation);
            read(lr, "opacity", cfg.lr.opacity);
            read(lr, "color", cfg.lr.color);
        }
    }
    if (j.contains("rng")) {
        const json& s = j.at("rng");
        check_known(s, "rng.", {"seed", "kind"});
        read(s, "seed", cfg.seed);
        if (s.contains("kind")) {
            const std::string kind = s.at("kind").get<std::string>();
            if (kind != "splitmix64-v1")
                throw ConfigError("config: rng.kind '" + kind +
                                  "' is not supported (expected \"splitmix64-v1\")");
        }
    }
    validate(cfg);
    return cfg;
}

TrainConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

std::string config_to_json_text(const TrainConfig& cfg) {
    json j;
    j["scene"] = {{"seed", cfg.scene_seed}, {"count", cfg.scene_count},
                  {"extent", cfg.scene_extent}};
    j["views"] = {{"n", cfg.views_n},
                  {"train", cfg.views_train},
                  {"radius", cfg.views_radius},
                  {"fov_deg", cfg.views_fov_deg}};
    j["image"] = {{"size", cfg.image_size},
                  {"background", {cfg.background.x, cfg.background.y, cfg.background.z}}};
    j["init"] = {{"mode", cfg.init_mode == InitMode::NoisyTruth ? "noisy-truth" : "random"},
                 {"noise", cfg.init_noise}};
    j["dropout"] = {{"rate", cfg.dropout_rate}, {"compensation", cfg.compensation}};
    j["loss"] = {{"lambda_dssim", cfg.weights.lambda_dssim},
                 {"beta", cfg.weights.beta},
                 {"lambda_max", cfg.weights.lambda_max},
                 {"t_warm", cfg.weights.t_warm},
                 {"constant_lambda", cfg.constant_lambda},
                 {"symmetric_consistency", cfg.symmetric_consistency}};
    j["blur"] = {{"size", cfg.blur_size}, {"sigma", cfg.blur_sigma}};
    j["train"] = {{"iterations", cfg.iterations},
                  {"branches", cfg.branches},
                  {"eval_every", cfg.eval_every},
                  {"jobs", cfg.jobs},
                  {"lr",
                   {{"position", cfg.lr.position},
                    {"position_final", cfg.lr.position_final},
                    {"log_scale", cfg.lr.log_scale},
                    {"rotation", cfg.lr.rotation},
                    {"opacity", cfg.lr.opacity},
                    {"color", cfg.lr.color}}}};
    j["rng"] = {{"seed", cfg.seed}, {"kind", "splitmix64-v1"}};
    return j.dump(2);
}

} // namespace pairsplat
