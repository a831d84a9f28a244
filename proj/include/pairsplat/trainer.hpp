// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/regularize.hpp"
#include "pairsplat/render.hpp"
#include "pairsplat/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pairsplat {

// Per-group learning rates, 3DGS-style: positions move slowly and decay,
// opacity adapts fastest.
struct LearningRates {
    double position = 1.6e-4;
    double position_final = 1.6e-6; // exponential decay endpoint at the last iteration
    double log_scale = 5e-3;
    double rotation = 2.5e-3;
    double opacity = 5e-2;
    double color = 2.5e-2;
};

struct TrainConfig {
    // Scene and views.
    std::uint64_t scene_seed = 7;
    int scene_count = 200;
    double scene_extent = 1.0;
    int views_n = 12;
    int views_train = 3;
    double views_radius = 3.2;
    double views_fov_deg = 50.0;
    int image_size = 64;
    Vec3 background{0.0, 0.0, 0.0};
    InitMode init_mode = InitMode::NoisyTruth;
    double init_noise = 0.12;
    // Dropout.
    double dropout_rate = 0.1;
    bool compensation = true;
    // Loss stack.
    LossWeights weights;
    bool constant_lambda = false;       // hold lambda at lambda_max from iteration 0
    bool symmetric_consistency = false; // average both stop-gradient directions per pair
    int blur_size = 11;
    double blur_sigma = 3.0;
    // Optimization.
    int iterations = 10000;
    int branches = 2;
    std::uint64_t seed = 1;
    int eval_every = 250;
    LearningRates lr;
    int jobs = 1;
};

// Throws ConfigError naming the offending key.
void validate(const TrainConfig& cfg);

struct AdamState {
    std::vector<double> m, v; // flat, co-shaped with the field parameters
    std::int64_t step_count = 0;
    LearningRates lr;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    // Current multiplier on the position rate (exponential decay over the run).
    double position_lr_scale = 1.0;

    static AdamState for_field(const GaussianField& field, const LearningRates& lr);
};

// One bias-corrected Adam update from field.grads; zeroes the grads after.
// Throws NumericError naming the parameter group on a non-finite gradient.
void adam_step(GaussianField& field, AdamState& state);

struct EvalSnapshot {
    int iteration = 0;
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    std::vector<double> per_view_psnr;
    std::vector<double> per_view_ssim;
};

struct TrainHistory {
    std::vector<LossBreakdown> records; // records[t] belongs to iteration t
    std::vector<EvalSnapshot> evals;
    int consistency_pairs = 0;
    bool aborted = false;
};

struct TrainResult {
    GaussianField field;
    TrainHistory history;
};

// Renders one branch per mask from the shared field, applies the photometric
// and consistency losses at iteration t, and accumulates every branch's
// gradients into field.grads. No optimizer step; the branch count is
// masks.size().
LossBreakdown apply_objective(GaussianField& field, const Camera& cam, const Image& gt,
                              const std::vector<DropoutMask>& masks, const TrainConfig& cfg,
                              int t);

// One pass of the paired-branch pipeline at iteration t: pick the training
// view, sample one dropout mask per branch, apply the objective, and take one
// Adam step. All randomness is a pure function of (cfg.seed, t).
LossBreakdown train_iteration(GaussianField& field, const ViewSet& views, const TrainConfig& cfg,
                              int t, AdamState& state);

// The training start point train() uses: init_field seeded from cfg.seed.
GaussianField initial_field(const TrainConfig& cfg, const GaussianField& truth);

// Full run from the standard initialization.
TrainResult train(const TrainConfig& cfg, const GaussianField& truth, const ViewSet& views);

// Continuation from an explicit state (checkpoint resume).
TrainResult train_from(const TrainConfig& cfg, const ViewSet& views, GaussianField field,
                       AdamState state, int start_iteration);

// No-dropout render of every held-out view scored against ground truth.
EvalSnapshot evaluate_heldout(const GaussianField& field, const ViewSet& views, int iteration,
                              const Vec3& background, int jobs = 1);

struct Checkpoint {
    GaussianField field;
    AdamState adam;
    int iteration = 0;
    std::uint64_t config_hash = 0;
};

void save_checkpoint(const GaussianField& field, const AdamState& state, int iteration,
                     std::uint64_t config_hash, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the resolved-config encoding; stable across runs.
std::uint64_t config_hash(const TrainConfig& cfg);
// Same hash with the ablation-variant flags (branches, lambda_max,
// constant_lambda) masked out.
std::uint64_t config_hash_invariant(const TrainConfig& cfg);

} // namespace pairsplat
