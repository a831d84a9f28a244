// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/trainer.hpp"

#include "pairsplat/dropout.hpp"
#include "pairsplat/errors.hpp"
#include "pairsplat/kernels.hpp"
#include "pairsplat/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pairsplat {
namespace {

// Substream labels; every piece of training randomness is a pure function of
// (cfg.seed, iteration), which is what makes checkpoint resume exact.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStream = 2;
constexpr std::uint64_t kMaskStream = 3;

void shuffle_in_place(std::vector<int>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.below(static_cast<std::uint64_t>(i))]);
}

void add_scaled(Image& dst, const Image& src, double s) {
    kern::active().axpy(s, src.data(), dst.data(), dst.size());
}

double position_lr_scale_at(const TrainConfig& cfg, int t) {
    if (cfg.lr.position <= 0.0) return 1.0;
    const double ratio = cfg.lr.position_final / cfg.lr.position;
    return std::pow(ratio, static_cast<double>(t) / static_cast<double>(cfg.iterations));
}

} // namespace

void validate(const TrainConfig& cfg) {
    if (cfg.scene_count < 1) throw ConfigError("scene.count must be >= 1");
    if (!(cfg.scene_extent > 0)) throw ConfigError("scene.extent must be > 0");
    if (cfg.views_n < 2) throw ConfigError("views.n must be >= 2");
    if (cfg.views_train < 1 || cfg.views_train >= cfg.views_n)
        throw ConfigError("views.train must satisfy 1 <= views.train < views.n");
    if (!(cfg.views_radius > 0)) throw ConfigError("views.radius must be > 0");
    if (!(cfg.views_fov_deg > 0) || !(cfg.views_fov_deg < 180))
        throw ConfigError("views.fov_deg must lie in (0, 180)");
    if (cfg.image_size < 1) throw ConfigError("image.size must be >= 1");
    if (cfg.init_noise < 0) throw ConfigError("init.noise must be >= 0");
    if (cfg.dropout_rate < 0 || cfg.dropout_rate >= 1)
        throw ConfigError("dropout.rate must lie in [0, 1)");
    if (cfg.weights.lambda_dssim < 0) throw ConfigError("loss.lambda_dssim must be >= 0");
    if (cfg.weights.beta < 0) throw ConfigError("loss.beta must be >= 0");
    if (cfg.weights.lambda_max < 0) throw ConfigError("loss.lambda_max must be >= 0");
    if (cfg.weights.t_warm < 1) throw ConfigError("loss.t_warm must be >= 1");
    if (cfg.blur_size <= 0 || cfg.blur_size % 2 == 0)
        throw ConfigError("blur.size must be odd and positive");
    if (!(cfg.blur_sigma > 0)) throw ConfigError("blur.sigma must be > 0");
    if (cfg.iterations < 1) throw ConfigError("train.iterations must be >= 1");
    if (cfg.branches < 1) throw ConfigError("train.branches must be >= 1");
    if (cfg.eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
    if (cfg.jobs < 1) throw ConfigError("train.jobs must be >= 1");
    if (!(cfg.lr.position > 0) || !(cfg.lr.position_final > 0) || !(cfg.lr.log_scale > 0) ||
        !(cfg.lr.rotation > 0) || !(cfg.lr.opacity > 0) || !(cfg.lr.color > 0))
        throw ConfigError("train.lr.* entries must all be > 0");
}

AdamState AdamState::for_field(const GaussianField& field, const LearningRates& rates) {
    AdamState s;
    s.m.assign(field.size() * kParamsPerPrimitive, 0.0);
    s.v.assign(field.size() * kParamsPerPrimitive, 0.0);
    s.lr = rates;
    return s;
}

void adam_step(GaussianField& field, AdamState& state) {
    const std::size_t n = field.size() * kParamsPerPrimitive;
    if (state.m.size() != n || state.v.size() != n)
        throw ShapeError("adam_step: optimizer state does not match field size");

    const double* g = field.grad_data();
    for (std::size_t i = 0; i < field.size(); ++i)
        for (int grp = 0; grp < 5; ++grp)
            for (int e = 0; e < kGroupSize[grp]; ++e) {
                const double val = g[i * kParamsPerPrimitive + kGroupOffset[grp] + e];
                if (!std::isfinite(val))
                    throw NumericError(std::string("adam_step: non-finite gradient in group '") +
                                       param_group_name(static_cast<ParamGroup>(grp)) +
                                       "' at primitive " + std::to_string(i));
            }

    std::vector<double> lr(n);
    const double group_lr[5] = {state.lr.position * state.position_lr_scale, state.lr.log_scale,
                                state.lr.rotation, state.lr.opacity, state.lr.color};
    for (std::size_t i = 0; i < field.size(); ++i)
        for (int grp = 0; grp < 5; ++grp)
            for (int e = 0; e < kGroupSize[grp]; ++e)
                lr[i * kParamsPerPrimitive + kGroupOffset[grp] + e] = group_lr[grp];

    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    kern::active().adam_update(field.param_data(), g, state.m.data(), state.v.data(), lr.data(), n,
                               state.beta1, state.beta2, state.eps, bc1, bc2);
    field.zero_grads();
}

LossBreakdown apply_objective(GaussianField& field, const Camera& cam, const Image& gt,
                              const std::vector<DropoutMask>& masks, const TrainConfig& cfg,
                              int t) {
    const int branches = static_cast<int>(masks.size());
    if (branches < 1) throw ProtocolError("apply_objective: need at least one mask");

    RenderOptions ropts;
    ropts.compensation = compensation_factor(cfg.dropout_rate, cfg.compensation);
    ropts.jobs = cfg.jobs;

    std::vector<Image> renders;
    renders.reserve(masks.size());
    for (const DropoutMask& m : masks)
        renders.push_back(render(field, m, cam, cfg.background, ropts));

    std::vector<double> rgb(masks.size());
    for (int k = 0; k < branches; ++k)
        rgb[static_cast<std::size_t>(k)] = rgb_loss(renders[static_cast<std::size_t>(k)], gt,
                                                    cfg.weights.lambda_dssim);
    double rgb_aux = 0.0;
    for (int k = 1; k < branches; ++k) rgb_aux += rgb[static_cast<std::size_t>(k)];

    const double lambda_t = cfg.constant_lambda
                                ? cfg.weights.lambda_max
                                : lambda_schedule(t, cfg.weights.lambda_max, cfg.weights.t_warm);

    const BlurKernel blur = BlurKernel::gaussian(cfg.blur_size, cfg.blur_sigma);
    std::vector<std::pair<int, int>> pairs;
    double lfc_mean = 0.0;
    if (branches >= 2) {
        pairs = multibranch_pairs(branches);
        for (const auto& [target, learner] : pairs) {
            const Image& lrn = renders[static_cast<std::size_t>(learner)];
            const Image& tgt = renders[static_cast<std::size_t>(target)];
            lfc_mean += cfg.symmetric_consistency
                            ? 0.5 * (lfc_loss(lrn, tgt, blur) + lfc_loss(tgt, lrn, blur))
                            : lfc_loss(lrn, tgt, blur);
        }
        lfc_mean /= static_cast<double>(pairs.size());
    }

    LossBreakdown bd;
    bd.rgb_a = rgb[0];
    bd.rgb_b = rgb_aux;
    bd.lfc = lfc_mean;
    bd.lambda_t = lambda_t;
    bd.total = bd.rgb_a + cfg.weights.beta * bd.rgb_b + lambda_t * bd.lfc;
    if (!std::isfinite(bd.total)) {
        field.zero_grads();
        throw NumericError("apply_objective: non-finite loss at iteration " + std::to_string(t));
    }

    // Adjoints: photometric per branch, then consistency into the learner
    // side of each pair only (or both halves when symmetric).
    std::vector<Image> upstream;
    upstream.reserve(masks.size());
    for (int k = 0; k < branches; ++k) {
        Image adj = rgb_loss_adjoint(renders[static_cast<std::size_t>(k)], gt,
                                     cfg.weights.lambda_dssim);
        if (k > 0)
            for (auto& v : adj.rgb) v *= cfg.weights.beta;
        upstream.push_back(std::move(adj));
    }
    if (!pairs.empty() && lambda_t != 0.0) {
        const double pair_w = lambda_t / static_cast<double>(pairs.size());
        for (const auto& [target, learner] : pairs) {
            const Image& lrn = renders[static_cast<std::size_t>(learner)];
            const Image& tgt = renders[static_cast<std::size_t>(target)];
            if (cfg.symmetric_consistency) {
                add_scaled(upstream[static_cast<std::size_t>(learner)],
                           lfc_adjoint(lrn, tgt, blur), 0.5 * pair_w);
                add_scaled(upstream[static_cast<std::size_t>(target)],
                           lfc_adjoint(tgt, lrn, blur), 0.5 * pair_w);
            } else {
                add_scaled(upstream[static_cast<std::size_t>(learner)],
                           lfc_adjoint(lrn, tgt, blur), pair_w);
            }
        }
    }
    for (int k = 0; k < branches; ++k)
        render_backward(field, masks[static_cast<std::size_t>(k)], cam, cfg.background,
                        upstream[static_cast<std::size_t>(k)], ropts);
    return bd;
}

LossBreakdown train_iteration(GaussianField& field, const ViewSet& views, const TrainConfig& cfg,
                              int t, AdamState& state) {
    if (views.train_idx.empty()) throw ProtocolError("train_iteration: no training views");
    const int n_train = static_cast<int>(views.train_idx.size());

    // Seeded per-epoch shuffle, cycled.
    std::vector<int> order = views.train_idx;
    Rng epoch_rng = Rng(cfg.seed).fork(kEpochStream, static_cast<std::uint64_t>(t / n_train));
    shuffle_in_place(order, epoch_rng);
    const int view = order[static_cast<std::size_t>(t % n_train)];
    const Camera& cam = views.cameras[static_cast<std::size_t>(view)];
    const Image& gt = views.ground_truth[static_cast<std::size_t>(view)];

    Rng mask_rng = Rng(cfg.seed).fork(kMaskStream, static_cast<std::uint64_t>(t));
    std::vector<DropoutMask> masks;
    masks.reserve(static_cast<std::size_t>(cfg.branches));
    for (int k = 0; k < cfg.branches; ++k)
        masks.push_back(sample_mask(field.size(), cfg.dropout_rate, mask_rng));

    const LossBreakdown bd = apply_objective(field, cam, gt, masks, cfg, t);
    state.position_lr_scale = position_lr_scale_at(cfg, t);
    adam_step(field, state);
    return bd;
}

EvalSnapshot evaluate_heldout(const GaussianField& field, const ViewSet& views, int iteration,
                              const Vec3& background, int jobs) {
    if (views.heldout_idx.empty()) throw ProtocolError("evaluate_heldout: empty held-out set");
    EvalSnapshot snap;
    snap.iteration = iteration;
    RenderOptions ropts;
    ropts.jobs = jobs;
    const DropoutMask keep_all = DropoutMask::all_ones(field.size());
    for (int v : views.heldout_idx) {
        const Image img = render(field, keep_all, views.cameras[static_cast<std::size_t>(v)],
                                 background, ropts);
        const Image& gt = views.ground_truth[static_cast<std::size_t>(v)];
        snap.per_view_psnr.push_back(psnr(img, gt));
        snap.per_view_ssim.push_back(ssim(img, gt));
    }
    const double n = static_cast<double>(snap.per_view_psnr.size());
    for (double p : snap.per_view_psnr) snap.psnr_mean += p;
    for (double s : snap.per_view_ssim) snap.ssim_mean += s;
    snap.psnr_mean /= n;
    snap.ssim_mean /= n;
    return snap;
}

TrainResult train_from(const TrainConfig& cfg, const ViewSet& views, GaussianField field,
                       AdamState state, int start_iteration) {
    validate(cfg);
    state.lr = cfg.lr;
    TrainHistory hist;
    hist.consistency_pairs =
        cfg.branches >= 2 ? cfg.branches * (cfg.branches - 1) / 2 : 0;
    for (int t = start_iteration; t < cfg.iterations; ++t) {
        if (t % cfg.eval_every == 0)
            hist.evals.push_back(evaluate_heldout(field, views, t, cfg.background, cfg.jobs));
        try {
            hist.records.push_back(train_iteration(field, views, cfg, t, state));
        } catch (const NumericError&) {
            hist.aborted = true;
            break;
        }
    }
    if (!hist.aborted)
        hist.evals.push_back(
            evaluate_heldout(field, views, cfg.iterations, cfg.background, cfg.jobs));
    return {std::move(field), std::move(hist)};
}

GaussianField initial_field(const TrainConfig& cfg, const GaussianField& truth) {
    // Seeded from the scene, not the training seed: multi-seed protocols
    // re-train from one shared starting field (the SfM stand-in) so that
    // seed-to-seed spread measures training stochasticity.
    const std::uint64_t init_seed = Rng(cfg.scene_seed).fork(kInitStream).next_u64();
    return init_field(truth, cfg.init_mode, cfg.init_noise, init_seed);
}

TrainResult train(const TrainConfig& cfg, const GaussianField& truth, const ViewSet& views) {
    validate(cfg);
    GaussianField field = initial_field(cfg, truth);
    AdamState state = AdamState::for_field(field, cfg.lr);
    return train_from(cfg, views, std::move(field), std::move(state), 0);
}

// --- checkpoints ---

using nlohmann::json;

void save_checkpoint(const GaussianField& field, const AdamState& state, int iteration,
                     std::uint64_t hash, const std::string& path) {
    json j;
    j["iteration"] = iteration;
    json prims = json::array();
    for (const auto& g : field.primitives) {
        const double* row = reinterpret_cast<const double*>(&g);
        prims.push_back(std::vector<double>(row, row + kParamsPerPrimitive));
    }
    j["field"] = {{"primitives", prims}};
    j["adam"] = {{"m", state.m}, {"v", state.v}, {"step", state.step_count}};
    j["config_hash"] = hash;
    std::ofstream out(path);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    out << j.dump() << "\n";
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const json j = json::parse(buf.str()); // parse_error carries the byte offset
    Checkpoint ck;
    ck.iteration = j.at("iteration").get<int>();
    ck.field = scene_from_json(j.at("field").dump());
    ck.adam.m = j.at("adam").at("m").get<std::vector<double>>();
    ck.adam.v = j.at("adam").at("v").get<std::vector<double>>();
    ck.adam.step_count = j.at("adam").at("step").get<std::int64_t>();
    ck.config_hash = j.at("config_hash").get<std::uint64_t>();
    if (ck.adam.m.size() != ck.field.size() * kParamsPerPrimitive ||
        ck.adam.v.size() != ck.field.size() * kParamsPerPrimitive)
        throw IoError("load_checkpoint: optimizer state does not match field size");
    return ck;
}

namespace {

void hash_mix(std::uint64_t& h, const std::string& s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
}

std::string config_canonical(const TrainConfig& cfg, bool mask_variant_flags) {
    std::ostringstream os;
    os.precision(17);
    os << cfg.scene_seed << '|' << cfg.scene_count << '|' << cfg.scene_extent << '|' << cfg.views_n
       << '|' << cfg.views_train << '|' << cfg.views_radius << '|' << cfg.views_fov_deg << '|'
       << cfg.image_size << '|' << cfg.background.x << ',' << cfg.background.y << ','
       << cfg.background.z << '|' << static_cast<int>(cfg.init_mode) << '|' << cfg.init_noise
       << '|' << cfg.dropout_rate << '|' << cfg.compensation << '|' << cfg.weights.lambda_dssim
       << '|' << cfg.weights.beta << '|' << cfg.weights.t_warm << '|' << cfg.symmetric_consistency
       << '|' << cfg.blur_size << '|' << cfg.blur_sigma << '|' << cfg.iterations << '|'
       << cfg.seed << '|' << cfg.eval_every << '|' << cfg.lr.position << '|'
       << cfg.lr.position_final << '|' << cfg.lr.log_scale << '|' << cfg.lr.rotation << '|'
       << cfg.lr.opacity << '|' << cfg.lr.color;
    if (!mask_variant_flags)
        os << '|' << cfg.branches << '|' << cfg.weights.lambda_max << '|' << cfg.constant_lambda;
    return os.str();
}

} // namespace

std::uint64_t config_hash(const TrainConfig& cfg) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    hash_mix(h, config_canonical(cfg, false));
    return h;
}

std::uint64_t config_hash_invariant(const TrainConfig& cfg) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    hash_mix(h, config_canonical(cfg, true));
    return h;
}

} // namespace pairsplat
