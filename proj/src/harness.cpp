// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/harness.hpp"

#include "pairsplat/dropout.hpp"
#include "pairsplat/errors.hpp"
#include "pairsplat/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace pairsplat::harness {

const char* const kAblationVariants[4] = {"baseline", "two_branch", "const_lfc", "full"};

TrainConfig apply_variant(TrainConfig cfg, const std::string& variant) {
    if (variant == "baseline") {
        cfg.branches = 1;
    } else if (variant == "two_branch") {
        cfg.branches = 2;
        cfg.weights.lambda_max = 0.0;
    } else if (variant == "const_lfc") {
        cfg.branches = 2;
        cfg.constant_lambda = true;
    } else if (variant == "full") {
        cfg.branches = 2;
    } else if (variant.rfind("branches_", 0) == 0) {
        cfg.branches = std::stoi(variant.substr(9));
    } else {
        throw ProtocolError("apply_variant: unknown variant '" + variant + "'");
    }
    return cfg;
}

std::string scene_id_for(const TrainConfig& cfg) {
    return "synthetic-s" + std::to_string(cfg.scene_seed) + "-n" +
           std::to_string(cfg.scene_count);
}

GaussianField make_truth(const TrainConfig& cfg) {
    return generate_synthetic_scene(cfg.scene_seed, cfg.scene_count, cfg.scene_extent);
}

ViewSet make_synthetic_views(const TrainConfig& cfg, const GaussianField& truth) {
    ViewSet views;
    views.cameras = make_orbit_cameras(cfg.views_n, cfg.views_radius, Vec3{0, 0, 0},
                                       cfg.image_size, cfg.image_size, cfg.views_fov_deg);
    RenderOptions ropts;
    ropts.jobs = cfg.jobs;
    const DropoutMask keep_all = DropoutMask::all_ones(truth.size());
    views.ground_truth.reserve(views.cameras.size());
    for (const Camera& cam : views.cameras)
        views.ground_truth.push_back(render(truth, keep_all, cam, cfg.background, ropts));
    // The split is part of the scene protocol: derived from the scene seed so
    // every training seed sees the same train/held-out partition.
    auto [train_idx, heldout_idx] =
        split_views(cfg.views_n, cfg.views_train, Rng(cfg.scene_seed).fork(0x5B).next_u64());
    views.train_idx = std::move(train_idx);
    views.heldout_idx = std::move(heldout_idx);
    return views;
}

MetricsRecord evaluate(const GaussianField& field, const ViewSet& views,
                       const std::string& scene_id, const std::string& variant,
                       std::uint64_t seed, const Vec3& background, int jobs,
                       const std::string& ppm_dir) {
    if (views.heldout_idx.empty()) throw ProtocolError("evaluate: empty held-out set");
    MetricsRecord rec;
    rec.scene_id = scene_id;
    rec.variant = variant;
    rec.seed = seed;
    RenderOptions ropts;
    ropts.jobs = jobs;
    const DropoutMask keep_all = DropoutMask::all_ones(field.size());
    if (!ppm_dir.empty()) std::filesystem::create_directories(ppm_dir);
    for (int v : views.heldout_idx) {
        const Image img =
            render(field, keep_all, views.cameras[static_cast<std::size_t>(v)], background, ropts);
        const Image& gt = views.ground_truth[static_cast<std::size_t>(v)];
        rec.per_view.push_back({v, psnr(img, gt), ssim(img, gt)});
        if (!ppm_dir.empty())
            write_ppm(img, ppm_dir + "/view_" + std::to_string(v) + ".ppm");
    }
    for (const auto& pv : rec.per_view) {
        rec.psnr_mean += pv.psnr;
        rec.ssim_mean += pv.ssim;
    }
    rec.psnr_mean /= static_cast<double>(rec.per_view.size());
    rec.ssim_mean /= static_cast<double>(rec.per_view.size());
    return rec;
}

RunResult run_variant(const TrainConfig& base, const std::string& variant, std::uint64_t seed,
                      const GaussianField& truth, const ViewSet& views,
                      const std::string& out_root) {
    TrainConfig cfg = apply_variant(base, variant);
    cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result = train(cfg, truth, views);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string ppm_dir =
        out_root.empty() ? "" : out_root + "/" + variant + "/" + std::to_string(seed);
    RunResult out;
    out.record = evaluate(result.field, views, scene_id_for(cfg), variant, seed, cfg.background,
                          cfg.jobs, ppm_dir);
    out.record.wall_time_s = wall;
    out.history = std::move(result.history);
    return out;
}

StabilityReport summarize(const std::string& variant, const std::vector<MetricsRecord>& records) {
    StabilityReport rep;
    rep.variant = variant;
    rep.n_seeds = static_cast<int>(records.size());
    if (records.empty()) return rep;
    for (const auto& r : records) {
        rep.psnr_mean += r.psnr_mean;
        rep.ssim_mean += r.ssim_mean;
    }
    rep.psnr_mean /= rep.n_seeds;
    rep.ssim_mean /= rep.n_seeds;
    if (rep.n_seeds > 1) {
        double vp = 0.0, vs = 0.0;
        for (const auto& r : records) {
            vp += (r.psnr_mean - rep.psnr_mean) * (r.psnr_mean - rep.psnr_mean);
            vs += (r.ssim_mean - rep.ssim_mean) * (r.ssim_mean - rep.ssim_mean);
        }
        rep.psnr_std = std::sqrt(vp / (rep.n_seeds - 1));
        rep.ssim_std = std::sqrt(vs / (rep.n_seeds - 1));
    }
    return rep;
}

namespace {

struct Job {
    std::string variant;
    std::uint64_t seed;
};

void require_distinct_seeds(const std::vector<std::uint64_t>& seeds, const char* op) {
    if (seeds.empty()) throw ProtocolError(std::string(op) + ": seed list must be non-empty");
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size())
        throw ProtocolError(std::string(op) + ": duplicate seeds in protocol");
}

// Runs jobs over a fixed-size worker pool; results are stored by job index so
// output order never depends on scheduling.
std::vector<RunResult> run_jobs(const TrainConfig& cfg, const std::vector<Job>& jobs,
                                const GaussianField& truth, const ViewSet& views,
                                const std::string& out_root, int pool_jobs) {
    std::vector<RunResult> results(jobs.size());
    if (pool_jobs <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i)
            results[i] = run_variant(cfg, jobs[i].variant, jobs[i].seed, truth, views, out_root);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int nw = std::min<int>(pool_jobs, static_cast<int>(jobs.size()));
    workers.reserve(static_cast<std::size_t>(nw));
    for (int w = 0; w < nw; ++w)
        workers.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                results[i] =
                    run_variant(cfg, jobs[i].variant, jobs[i].seed, truth, views, out_root);
            }
        });
    for (auto& w : workers) w.join();
    return results;
}

} // namespace

std::vector<StabilityReport> run_stability(const TrainConfig& cfg,
                                           const std::vector<std::uint64_t>& seeds,
                                           std::vector<MetricsRecord>* records_out,
                                           const std::string& out_root, int pool_jobs) {
    require_distinct_seeds(seeds, "run_stability");
    const GaussianField truth = make_truth(cfg);
    const ViewSet views = make_synthetic_views(cfg, truth);

    std::vector<Job> jobs;
    for (const char* variant : {"baseline", "full"})
        for (std::uint64_t s : seeds) jobs.push_back({variant, s});
    const std::vector<RunResult> results = run_jobs(cfg, jobs, truth, views, out_root, pool_jobs);

    std::vector<StabilityReport> reports;
    for (const char* variant : {"baseline", "full"}) {
        std::vector<MetricsRecord> recs;
        for (std::size_t i = 0; i < jobs.size(); ++i)
            if (jobs[i].variant == variant) recs.push_back(results[i].record);
        reports.push_back(summarize(variant, recs));
        if (records_out)
            records_out->insert(records_out->end(), recs.begin(), recs.end());
    }
    return reports;
}

std::vector<MetricsRecord> run_ablation(const TrainConfig& cfg,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::string& out_root, int pool_jobs,
                                        std::vector<TrainHistory>* histories_out) {
    require_distinct_seeds(seeds, "run_ablation");
    const GaussianField truth = make_truth(cfg);
    const ViewSet views = make_synthetic_views(cfg, truth);

    std::vector<Job> jobs;
    for (const char* variant : kAblationVariants)
        for (std::uint64_t s : seeds) jobs.push_back({variant, s});
    std::vector<RunResult> results = run_jobs(cfg, jobs, truth, views, out_root, pool_jobs);

    std::vector<MetricsRecord> records;
    records.reserve(results.size());
    for (auto& r : results) {
        records.push_back(r.record);
        if (histories_out) histories_out->push_back(std::move(r.history));
    }
    return records;
}

std::vector<SweepRow> run_branch_sweep(const TrainConfig& cfg, const std::vector<int>& counts,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::string& out_root, int pool_jobs) {
    require_distinct_seeds(seeds, "run_branch_sweep");
    for (int c : counts)
        if (c < 1 || c > 4)
            throw ProtocolError("run_branch_sweep: branch counts must lie in {1, 2, 3, 4}");
    const GaussianField truth = make_truth(cfg);
    const ViewSet views = make_synthetic_views(cfg, truth);

    std::vector<Job> jobs;
    for (int c : counts)
        for (std::uint64_t s : seeds) jobs.push_back({"branches_" + std::to_string(c), s});
    const std::vector<RunResult> results = run_jobs(cfg, jobs, truth, views, out_root, pool_jobs);

    std::vector<SweepRow> rows;
    std::size_t idx = 0;
    for (int c : counts) {
        SweepRow row;
        row.branches = c;
        for (std::size_t s = 0; s < seeds.size(); ++s, ++idx) {
            row.records.push_back(results[idx].record);
            row.consistency_pairs = results[idx].history.consistency_pairs;
            row.psnr_mean += results[idx].record.psnr_mean;
            row.ssim_mean += results[idx].record.ssim_mean;
            row.wall_time_mean_s += results[idx].record.wall_time_s;
        }
        row.psnr_mean /= static_cast<double>(seeds.size());
        row.ssim_mean /= static_cast<double>(seeds.size());
        row.wall_time_mean_s /= static_cast<double>(seeds.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

// --- reports ---

using nlohmann::json;

namespace {

json record_to_json(const MetricsRecord& r) {
    json pv = json::array();
    for (const auto& m : r.per_view)
        pv.push_back({{"view", m.view}, {"psnr", m.psnr}, {"ssim", m.ssim}});
    return json{{"scene_id", r.scene_id},   {"variant", r.variant},
                {"seed", r.seed},           {"psnr_mean", r.psnr_mean},
                {"ssim_mean", r.ssim_mean}, {"per_view", pv},
                {"wall_time_s", r.wall_time_s}};
}

MetricsRecord record_from_json(const json& j) {
    MetricsRecord r;
    r.scene_id = j.at("scene_id").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.psnr_mean = j.at("psnr_mean").get<double>();
    r.ssim_mean = j.at("ssim_mean").get<double>();
    for (const auto& m : j.at("per_view"))
        r.per_view.push_back({m.at("view").get<int>(), m.at("psnr").get<double>(),
                              m.at("ssim").get<double>()});
    r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
}

std::ofstream open_out(const std::string& path, const char* op) {
    std::ofstream out(path);
    if (!out) throw IoError(std::string(op) + ": cannot open " + path);
    return out;
}

} // namespace

void emit_report_json(const std::vector<MetricsRecord>& records, const std::string& path) {
    json arr = json::array();
    for (const auto& r : records) arr.push_back(record_to_json(r));
    auto out = open_out(path, "emit_report_json");
    out << arr.dump();
    if (!out) throw IoError("emit_report_json: write failed for " + path);
}

void emit_report_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
    auto out = open_out(path, "emit_report_csv");
    out << "scene_id,variant,seed,psnr,ssim,wall_time_s\n";
    out.precision(17);
    for (const auto& r : records)
        out << r.scene_id << ',' << r.variant << ',' << r.seed << ',' << r.psnr_mean << ','
            << r.ssim_mean << ',' << r.wall_time_s << "\n";
    if (!out) throw IoError("emit_report_csv: write failed for " + path);
}

std::vector<MetricsRecord> parse_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("parse_report_json: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const json arr = json::parse(buf.str());
    std::vector<MetricsRecord> records;
    for (const auto& j : arr) records.push_back(record_from_json(j));
    return records;
}

void emit_curve_csv(const TrainHistory& history, const std::string& path) {
    auto out = open_out(path, "emit_curve_csv");
    out << "iteration,total,rgb_a,rgb_b,lfc,lambda_t,heldout_psnr\n";
    out.precision(17);
    for (std::size_t t = 0; t < history.records.size(); ++t) {
        const LossBreakdown& b = history.records[t];
        out << t << ',' << b.total << ',' << b.rgb_a << ',' << b.rgb_b << ',' << b.lfc << ','
            << b.lambda_t << ',';
        for (const auto& snap : history.evals)
            if (snap.iteration == static_cast<int>(t)) {
                out << snap.psnr_mean;
                break;
            }
        out << "\n";
    }
    if (!out) throw IoError("emit_curve_csv: write failed for " + path);
}

} // namespace pairsplat::harness
