// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pairsplat::harness {

struct PerViewMetric {
    int view = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricsRecord {
    std::string scene_id;
    std::string variant;
    std::uint64_t seed = 0;
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    std::vector<PerViewMetric> per_view;
    double wall_time_s = 0.0;
};

// Mean and sample (n-1) standard deviation over seeds.
struct StabilityReport {
    std::string variant;
    int n_seeds = 0;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;
};

// Ablation variants, table-style: the single-branch dropout baseline, plus
// two-branch supervision, constant-weight consistency, and the full
// progressive schedule.
extern const char* const kAblationVariants[4]; // baseline, two_branch, const_lfc, full

// Applies a variant's flags on top of a base config. Unknown name throws.
TrainConfig apply_variant(TrainConfig cfg, const std::string& variant);

std::string scene_id_for(const TrainConfig& cfg);

GaussianField make_truth(const TrainConfig& cfg);
// Orbit cameras around the origin, ground truth rendered from `truth`, and a
// deterministic train/held-out split derived from the scene seed.
ViewSet make_synthetic_views(const TrainConfig& cfg, const GaussianField& truth);

// No-dropout render of every held-out view scored against ground truth.
// When ppm_dir is non-empty the rendered views are saved there as
// view_<k>.ppm.
MetricsRecord evaluate(const GaussianField& field, const ViewSet& views,
                       const std::string& scene_id, const std::string& variant,
                       std::uint64_t seed, const Vec3& background, int jobs = 1,
                       const std::string& ppm_dir = "");

struct RunResult {
    MetricsRecord record;
    TrainHistory history;
};

// Trains one (variant, seed) job and evaluates it. With out_root set, held-out
// renders land in out_root/<variant>/<seed>/view_<k>.ppm.
RunResult run_variant(const TrainConfig& base, const std::string& variant, std::uint64_t seed,
                      const GaussianField& truth, const ViewSet& views,
                      const std::string& out_root = "");

StabilityReport summarize(const std::string& variant, const std::vector<MetricsRecord>& records);

// Multi-seed stability protocol over the dropout baseline and the full
// paired-consistency variant. Seeds must be non-empty and distinct.
// pool_jobs > 1 runs (variant, seed) jobs concurrently; results are
// position-stable so the reports do not depend on scheduling.
std::vector<StabilityReport> run_stability(const TrainConfig& cfg,
                                           const std::vector<std::uint64_t>& seeds,
                                           std::vector<MetricsRecord>* records_out = nullptr,
                                           const std::string& out_root = "", int pool_jobs = 1);

// All four ablation variants with identical seeds; histories align with the
// returned records when requested.
std::vector<MetricsRecord> run_ablation(const TrainConfig& cfg,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::string& out_root = "", int pool_jobs = 1,
                                        std::vector<TrainHistory>* histories_out = nullptr);

struct SweepRow {
    int branches = 0;
    int consistency_pairs = 0;
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    double wall_time_mean_s = 0.0;
    std::vector<MetricsRecord> records;
};

// Identical config apart from the branch count.
std::vector<SweepRow> run_branch_sweep(const TrainConfig& cfg, const std::vector<int>& counts,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::string& out_root = "", int pool_jobs = 1);

// records -> JSON array / CSV with header
// scene_id,variant,seed,psnr,ssim,wall_time_s (per-view columns omitted).
void emit_report_json(const std::vector<MetricsRecord>& records, const std::string& path);
void emit_report_csv(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> parse_report_json(const std::string& path);

// CSV of (iteration,total,rgb_a,rgb_b,lfc,lambda_t,heldout_psnr); the PSNR
// column is filled on snapshot rows and empty elsewhere.
void emit_curve_csv(const TrainHistory& history, const std::string& path);

} // namespace pairsplat::harness
