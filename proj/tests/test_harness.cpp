// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pairsplat/errors.hpp"
#include "pairsplat/harness.hpp"
#include "pairsplat/imageops.hpp"

#include "test_util.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace pairsplat;
using namespace pairsplat::harness;
using testutil::tiny_config;

namespace {

TrainConfig micro_config() {
    TrainConfig cfg = tiny_config();
    cfg.scene_count = 10;
    cfg.image_size = 14;
    cfg.iterations = 8;
    cfg.eval_every = 4;
    cfg.weights.t_warm = 6;
    return cfg;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

bool records_metric_equal(const MetricsRecord& a, const MetricsRecord& b) {
    if (a.scene_id != b.scene_id || a.variant != b.variant || a.seed != b.seed) return false;
    if (a.psnr_mean != b.psnr_mean || a.ssim_mean != b.ssim_mean) return false;
    if (a.per_view.size() != b.per_view.size()) return false;
    for (std::size_t i = 0; i < a.per_view.size(); ++i)
        if (a.per_view[i].view != b.per_view[i].view || a.per_view[i].psnr != b.per_view[i].psnr ||
            a.per_view[i].ssim != b.per_view[i].ssim)
            return false;
    return true;
}

} // namespace

TEST_CASE("evaluate: ground-truth field hits the 99 dB cap on every held-out view") {
    const TrainConfig cfg = micro_config();
    const GaussianField truth = make_truth(cfg);
    const ViewSet views = make_synthetic_views(cfg, truth);
    const MetricsRecord rec =
        evaluate(truth, views, scene_id_for(cfg), "truth", 0, cfg.background);
    CHECK(rec.per_view.size() == views.heldout_idx.size());
    for (const auto& pv : rec.per_view) CHECK(pv.psnr == 99.0);
    CHECK(rec.psnr_mean == 99.0);

    // Aggregate is the mean of the per-view metrics.
    double acc = 0.0;
    for (const auto& pv : rec.per_view) acc += pv.ssim;
    CHECK(rec.ssim_mean ==
          doctest::Approx(acc / static_cast<double>(rec.per_view.size())).epsilon(1e-9));
}

TEST_CASE("evaluate: single held-out view aggregates to itself") {
    TrainConfig cfg = micro_config();
    cfg.views_n = 2;
    cfg.views_train = 1;
    const GaussianField truth = make_truth(cfg);
    const ViewSet views = make_synthetic_views(cfg, truth);
    REQUIRE(views.heldout_idx.size() == 1);
    const GaussianField field = init_field(truth, InitMode::NoisyTruth, 0.05, 3);
    const MetricsRecord rec = evaluate(field, views, "s", "v", 1, cfg.background);
    CHECK(rec.psnr_mean == rec.per_view[0].psnr);
    CHECK(rec.ssim_mean == rec.per_view[0].ssim);
}

TEST_CASE("evaluate: PSNR recomputable from the emitted PPM images") {
    const TrainConfig cfg = micro_config();
    const GaussianField truth = make_truth(cfg);
    const ViewSet views = make_synthetic_views(cfg, truth);
    // A field far from truth so quantization error is negligible next to mse.
    const GaussianField field = init_field(truth, InitMode::Random, 0.0, 11);

    TempDir dir("pairsplat_eval_ppm");
    const MetricsRecord rec = evaluate(field, views, "s", "v", 1, cfg.background, 1, dir.str());
    for (const auto& pv : rec.per_view) {
        const Image saved = read_ppm(dir.str() + "/view_" + std::to_string(pv.view) + ".ppm");
        const Image& gt = views.ground_truth[static_cast<std::size_t>(pv.view)];
        const double recomputed = 10.0 * std::log10(1.0 / mse(saved, gt));
        // 8-bit quantization bounds the disagreement.
        CHECK(std::fabs(recomputed - pv.psnr) <= 0.3);
    }
}

TEST_CASE("evaluate rejects an empty held-out set") {
    const TrainConfig cfg = micro_config();
    const GaussianField truth = make_truth(cfg);
    ViewSet views = make_synthetic_views(cfg, truth);
    views.heldout_idx.clear();
    CHECK_THROWS_AS(evaluate(truth, views, "s", "v", 0, cfg.background), ProtocolError);
}

TEST_CASE("run_stability: one seed gives zero std; protocols are validated") {
    const TrainConfig cfg = micro_config();
    const auto reports = run_stability(cfg, {42});
    REQUIRE(reports.size() == 2);
    for (const auto& rep : reports) {
        CHECK(rep.n_seeds == 1);
        CHECK(rep.psnr_std == 0.0);
        CHECK(rep.ssim_std == 0.0);
    }
    CHECK(reports[0].variant == "baseline");
    CHECK(reports[1].variant == "full");

    CHECK_THROWS_AS(run_stability(cfg, {}), ProtocolError);
    CHECK_THROWS_AS(run_stability(cfg, {1, 2, 1}), ProtocolError);
}

TEST_CASE("run_stability is deterministic across invocations and pool sizes") {
    const TrainConfig cfg = micro_config();
    std::vector<MetricsRecord> ra, rb;
    const auto a = run_stability(cfg, {1, 2}, &ra, "", 1);
    const auto b = run_stability(cfg, {1, 2}, &rb, "", 2);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) CHECK(records_metric_equal(ra[i], rb[i]));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].psnr_mean == b[i].psnr_mean);
        CHECK(a[i].psnr_std == b[i].psnr_std);
    }
}

TEST_CASE("stability report is recomputable from the per-seed records") {
    const TrainConfig cfg = micro_config();
    std::vector<MetricsRecord> records;
    const auto reports = run_stability(cfg, {1, 2, 3}, &records);
    for (const auto& rep : reports) {
        std::vector<MetricsRecord> own;
        for (const auto& r : records)
            if (r.variant == rep.variant) own.push_back(r);
        const StabilityReport again = summarize(rep.variant, own);
        CHECK(std::fabs(again.psnr_mean - rep.psnr_mean) <= 1e-9);
        CHECK(std::fabs(again.psnr_std - rep.psnr_std) <= 1e-9);
        CHECK(std::fabs(again.ssim_mean - rep.ssim_mean) <= 1e-9);
        CHECK(std::fabs(again.ssim_std - rep.ssim_std) <= 1e-9);
    }
}

TEST_CASE("run_ablation: variant flags drive the loss stack as documented") {
    const TrainConfig cfg = micro_config();
    std::vector<TrainHistory> histories;
    const auto records = run_ablation(cfg, {4, 5}, "", 2, &histories);
    REQUIRE(records.size() == 8);   // 4 variants x 2 seeds
    REQUIRE(histories.size() == 8); // aligned

    // baseline: single branch, no consistency term anywhere in the history.
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(records[s].variant == "baseline");
        for (const auto& r : histories[s].records) CHECK(r.lfc == 0.0);
        CHECK(histories[s].consistency_pairs == 0);
    }
    // two_branch: lambda stays zero.
    for (std::size_t s = 2; s < 4; ++s) {
        CHECK(records[s].variant == "two_branch");
        for (const auto& r : histories[s].records) CHECK(r.lambda_t == 0.0);
    }
    // const_lfc: lambda pinned at lambda_max from iteration 0.
    for (std::size_t s = 4; s < 6; ++s) {
        CHECK(records[s].variant == "const_lfc");
        CHECK(histories[s].records.front().lambda_t == cfg.weights.lambda_max);
    }
    // full: progressive warm-up starts at zero.
    for (std::size_t s = 6; s < 8; ++s) {
        CHECK(records[s].variant == "full");
        CHECK(histories[s].records.front().lambda_t == 0.0);
        CHECK(histories[s].consistency_pairs == 1);
    }
}

TEST_CASE("ablation variants differ only in the documented flags") {
    const TrainConfig cfg = micro_config();
    const std::uint64_t h0 = config_hash_invariant(apply_variant(cfg, "baseline"));
    for (const char* v : kAblationVariants) {
        CHECK(config_hash_invariant(apply_variant(cfg, v)) == h0);
    }
    // The full hash does distinguish them.
    CHECK(config_hash(apply_variant(cfg, "baseline")) != config_hash(apply_variant(cfg, "full")));
    CHECK_THROWS_AS(apply_variant(cfg, "nonsense"), ProtocolError);
}

TEST_CASE("run_branch_sweep: pair counts and the baseline identity") {
    const TrainConfig cfg = micro_config();
    const auto rows = run_branch_sweep(cfg, {1, 2, 3}, {7}, "", 2);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].branches == 1);
    CHECK(rows[0].consistency_pairs == 0);
    CHECK(rows[1].consistency_pairs == 1);
    CHECK(rows[2].consistency_pairs == 3);

    // Same code path as the ablation baseline for the same seed.
    const auto ablation = run_ablation(cfg, {7});
    CHECK(rows[0].records[0].psnr_mean == ablation[0].psnr_mean);
    CHECK(rows[0].records[0].ssim_mean == ablation[0].ssim_mean);

    CHECK_THROWS_AS(run_branch_sweep(cfg, {0}, {7}), ProtocolError);
    CHECK_THROWS_AS(run_branch_sweep(cfg, {5}, {7}), ProtocolError);
}

TEST_CASE("emit_report json and csv") {
    TempDir dir("pairsplat_reports");
    const std::string jpath = dir.str() + "/r.json";
    const std::string cpath = dir.str() + "/r.csv";

    emit_report_json({}, jpath);
    {
        std::ifstream in(jpath);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        CHECK(text == "[]");
    }

    MetricsRecord rec;
    rec.scene_id = "synthetic-s5-n10";
    rec.variant = "full";
    rec.seed = 3;
    rec.psnr_mean = 21.125;
    rec.ssim_mean = 0.7875;
    rec.per_view = {{1, 20.5, 0.75}, {4, 21.75, 0.825}};
    rec.wall_time_s = 1.25;
    emit_report_json({rec, rec}, jpath);
    const auto back = parse_report_json(jpath);
    REQUIRE(back.size() == 2);
    CHECK(records_metric_equal(back[0], rec));
    CHECK(back[0].wall_time_s == rec.wall_time_s);

    emit_report_csv({rec, rec, rec}, cpath);
    std::ifstream in(cpath);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 4); // header + 3 rows
}

TEST_CASE("emit_curve reproduces the schedule column") {
    TrainConfig cfg = micro_config();
    cfg.iterations = 10;
    cfg.weights.t_warm = 8;
    const GaussianField truth = make_truth(cfg);
    const ViewSet views = make_synthetic_views(cfg, truth);
    const TrainResult r = train(cfg, truth, views);

    TempDir dir("pairsplat_curve");
    const std::string path = dir.str() + "/curve.csv";
    emit_curve_csv(r.history, path);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "iteration,total,rgb_a,rgb_b,lfc,lambda_t,heldout_psnr");
    double prev_lambda = -1.0;
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        // lambda_t is column 6.
        std::size_t pos = 0;
        for (int c = 0; c < 5; ++c) pos = line.find(',', pos) + 1;
        const double lam = std::stod(line.substr(pos));
        if (rows == 0) CHECK(lam == 0.0);
        CHECK(lam >= prev_lambda);
        prev_lambda = lam;
        ++rows;
    }
    CHECK(rows == cfg.iterations);
}
