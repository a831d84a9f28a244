// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: scene generation, training, evaluation, single-view
// rendering, and the experiment protocols (stability / ablation / branch
// sweep). Configuration comes from a JSON file; flags override scalars only.

#include "pairsplat/config.hpp"
#include "pairsplat/errors.hpp"
#include "pairsplat/harness.hpp"
#include "pairsplat/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pairsplat;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed_override;
    bool serial = false;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_out = true) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    if (with_out) cmd->add_option("--out", flags.out, "output directory")->required();
    cmd->add_option("--seed", flags.seed_override, "override rng.seed");
    cmd->add_flag("--serial", flags.serial, "force bit-reproducible single-threaded mode");
    cmd->add_option("--jobs", flags.jobs, "parallel jobs for independent runs");
}

TrainConfig resolve_config(const CommonFlags& flags) {
    TrainConfig cfg =
        flags.config_path.empty() ? TrainConfig{} : load_config_file(flags.config_path);
    if (flags.seed_override) cfg.seed = *flags.seed_override;
    if (flags.serial) cfg.jobs = 1;
    validate(cfg);
    return cfg;
}

int pool_jobs(const CommonFlags& flags) { return flags.serial ? 1 : std::max(1, flags.jobs); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

void write_config_echo(const TrainConfig& cfg, const std::string& dir) {
    write_text(dir + "/config.json", config_to_json_text(cfg) + "\n");
}

std::vector<std::uint64_t> seed_list(const TrainConfig& cfg, int n) {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < n; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
    return seeds;
}

json stability_report_json(const harness::StabilityReport& rep) {
    return json{{"variant", rep.variant},     {"n_seeds", rep.n_seeds},
                {"psnr_mean", rep.psnr_mean}, {"psnr_std", rep.psnr_std},
                {"ssim_mean", rep.ssim_mean}, {"ssim_std", rep.ssim_std}};
}

int cmd_gen_scene(const CommonFlags& flags, const std::string& out_path) {
    TrainConfig cfg = resolve_config(flags);
    const std::uint64_t seed = flags.seed_override ? *flags.seed_override : cfg.scene_seed;
    const GaussianField field = generate_synthetic_scene(seed, cfg.scene_count, cfg.scene_extent);
    save_scene(field, out_path);
    std::cout << "wrote " << out_path << " (" << field.size() << " primitives)\n";
    return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& preset, const std::string& resume) {
    TrainConfig cfg = resolve_config(flags);
    if (preset == "full") {
        cfg.iterations = 10000;
        cfg.weights.t_warm = 7000;
    } else if (preset == "short") {
        cfg.iterations = 5000;
        cfg.weights.t_warm = 4000;
    } else if (!preset.empty()) {
        throw ConfigError("train: --preset must be 'full' or 'short'");
    }
    validate(cfg);

    const GaussianField truth = harness::make_truth(cfg);
    const ViewSet views = harness::make_synthetic_views(cfg, truth);

    TrainResult result;
    if (!resume.empty()) {
        Checkpoint ck = load_checkpoint(resume);
        result = train_from(cfg, views, std::move(ck.field), std::move(ck.adam), ck.iteration);
    } else {
        result = train(cfg, truth, views);
    }

    fs::create_directories(flags.out);
    write_config_echo(cfg, flags.out);
    save_checkpoint(result.field, AdamState::for_field(result.field, cfg.lr), cfg.iterations,
                    config_hash(cfg), flags.out + "/checkpoint.json");
    harness::emit_curve_csv(result.history, flags.out + "/curve.csv");
    const harness::MetricsRecord rec =
        harness::evaluate(result.field, views, harness::scene_id_for(cfg), "train", cfg.seed,
                          cfg.background, cfg.jobs, flags.out + "/renders");
    harness::emit_report_json({rec}, flags.out + "/metrics.json");
    std::cout << "final held-out PSNR " << rec.psnr_mean << " dB, SSIM " << rec.ssim_mean
              << (result.history.aborted ? " (aborted on non-finite loss)" : "") << "\n";
    return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path) {
    TrainConfig cfg = resolve_config(flags);
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const GaussianField truth = harness::make_truth(cfg);
    const ViewSet views = harness::make_synthetic_views(cfg, truth);
    fs::create_directories(flags.out);
    write_config_echo(cfg, flags.out);
    const harness::MetricsRecord rec =
        harness::evaluate(ck.field, views, harness::scene_id_for(cfg), "eval", cfg.seed,
                          cfg.background, cfg.jobs, flags.out + "/renders");
    harness::emit_report_json({rec}, flags.out + "/metrics.json");
    std::cout << "held-out PSNR " << rec.psnr_mean << " dB, SSIM " << rec.ssim_mean << "\n";
    return 0;
}

int cmd_render(const CommonFlags& flags, const std::string& checkpoint_path,
               const std::string& scene_path, int view, const std::string& out_path) {
    TrainConfig cfg = resolve_config(flags);
    if ((checkpoint_path.empty()) == (scene_path.empty()))
        throw ConfigError("render: exactly one of --checkpoint or --scene is required");
    GaussianField field = checkpoint_path.empty() ? load_scene(scene_path)
                                                  : load_checkpoint(checkpoint_path).field;
    const auto cams = make_orbit_cameras(cfg.views_n, cfg.views_radius, Vec3{0, 0, 0},
                                         cfg.image_size, cfg.image_size, cfg.views_fov_deg);
    if (view < 0 || view >= static_cast<int>(cams.size()))
        throw ConfigError("render: --view out of range for views.n");
    RenderOptions opts;
    opts.jobs = cfg.jobs;
    const Image img = render(field, DropoutMask::all_ones(field.size()),
                             cams[static_cast<std::size_t>(view)], cfg.background, opts);
    write_ppm(img, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_stability(const CommonFlags& flags, int n_seeds) {
    TrainConfig cfg = resolve_config(flags);
    const auto seeds = seed_list(cfg, n_seeds);
    fs::create_directories(flags.out);
    std::vector<harness::MetricsRecord> records;
    const auto reports = harness::run_stability(cfg, seeds, &records, flags.out, pool_jobs(flags));
    write_config_echo(cfg, flags.out);
    harness::emit_report_json(records, flags.out + "/records.json");
    harness::emit_report_csv(records, flags.out + "/records.csv");
    json j;
    j["config"] = json::parse(config_to_json_text(cfg));
    j["reports"] = json::array();
    for (const auto& rep : reports) j["reports"].push_back(stability_report_json(rep));
    write_text(flags.out + "/stability.json", j.dump(2) + "\n");
    for (const auto& rep : reports)
        std::cout << rep.variant << ": PSNR " << rep.psnr_mean << " +- " << rep.psnr_std
                  << " dB, SSIM " << rep.ssim_mean << " +- " << rep.ssim_std
                  << " (n=" << rep.n_seeds << ")\n";
    return 0;
}

int cmd_ablate(const CommonFlags& flags, int n_seeds) {
    TrainConfig cfg = resolve_config(flags);
    const auto seeds = seed_list(cfg, n_seeds);
    fs::create_directories(flags.out);
    std::vector<TrainHistory> histories;
    const auto records =
        harness::run_ablation(cfg, seeds, flags.out, pool_jobs(flags), &histories);
    write_config_echo(cfg, flags.out);
    harness::emit_report_json(records, flags.out + "/records.json");
    harness::emit_report_csv(records, flags.out + "/records.csv");
    // One training curve per variant (first seed) for plotting.
    fs::create_directories(flags.out + "/curves");
    for (std::size_t v = 0; v < 4; ++v)
        harness::emit_curve_csv(histories[v * seeds.size()],
                                flags.out + "/curves/" + harness::kAblationVariants[v] + ".csv");
    for (const char* variant : harness::kAblationVariants) {
        std::vector<harness::MetricsRecord> vr;
        for (const auto& r : records)
            if (r.variant == variant) vr.push_back(r);
        const auto rep = harness::summarize(variant, vr);
        std::cout << rep.variant << ": PSNR " << rep.psnr_mean << " dB, SSIM " << rep.ssim_mean
                  << " (n=" << rep.n_seeds << ")\n";
    }
    return 0;
}

int cmd_sweep(const CommonFlags& flags, std::vector<int> counts, int n_seeds) {
    TrainConfig cfg = resolve_config(flags);
    if (counts.empty()) counts = {1, 2, 3};
    const auto seeds = seed_list(cfg, n_seeds);
    fs::create_directories(flags.out);
    const auto rows = harness::run_branch_sweep(cfg, counts, seeds, flags.out, pool_jobs(flags));
    write_config_echo(cfg, flags.out);
    std::vector<harness::MetricsRecord> records;
    json j;
    j["config"] = json::parse(config_to_json_text(cfg));
    j["rows"] = json::array();
    for (const auto& row : rows) {
        for (const auto& r : row.records) records.push_back(r);
        j["rows"].push_back({{"branches", row.branches},
                             {"consistency_pairs", row.consistency_pairs},
                             {"psnr_mean", row.psnr_mean},
                             {"ssim_mean", row.ssim_mean},
                             {"wall_time_mean_s", row.wall_time_mean_s}});
        std::cout << row.branches << " branch(es), " << row.consistency_pairs
                  << " consistency pair(s): PSNR " << row.psnr_mean << " dB, mean wall time "
                  << row.wall_time_mean_s << " s\n";
    }
    harness::emit_report_json(records, flags.out + "/records.json");
    harness::emit_report_csv(records, flags.out + "/records.csv");
    write_text(flags.out + "/sweep.json", j.dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale Gaussian-splatting trainer with paired-dropout consistency"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, eval_flags, render_flags, stab_flags, abl_flags,
        sweep_flags;

    auto* gen = app.add_subcommand("gen-scene", "generate a synthetic ground-truth scene");
    std::string gen_out;
    add_common(gen, gen_flags, false);
    gen->add_option("--out", gen_out, "output scene JSON")->required();

    auto* tr = app.add_subcommand("train", "train a field on the configured protocol");
    std::string preset, resume;
    add_common(tr, train_flags);
    tr->add_option("--preset", preset,
                   "training schedule preset: full (10000/7000) or short (5000/4000)");
    tr->add_option("--resume", resume, "resume from a checkpoint file");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the held-out views");
    std::string eval_ck;
    add_common(ev, eval_flags);
    ev->add_option("--checkpoint", eval_ck, "checkpoint JSON")->required();

    auto* rd = app.add_subcommand("render", "render one protocol view from a field");
    std::string rd_ck, rd_scene, rd_out;
    int rd_view = 0;
    add_common(rd, render_flags, false);
    rd->add_option("--checkpoint", rd_ck, "checkpoint JSON");
    rd->add_option("--scene", rd_scene, "scene JSON");
    rd->add_option("--view", rd_view, "protocol view index");
    rd->add_option("--out", rd_out, "output PPM path")->required();

    auto* st = app.add_subcommand("stability", "multi-seed stability protocol");
    int st_seeds = 10;
    add_common(st, stab_flags);
    st->add_option("--seeds", st_seeds, "number of seeds (default 10)");

    auto* ab = app.add_subcommand("ablate", "component ablation over four variants");
    int ab_seeds = 5;
    add_common(ab, abl_flags);
    ab->add_option("--seeds", ab_seeds, "number of seeds (default 5)");

    auto* sw = app.add_subcommand("sweep", "branch-count sweep");
    int sw_seeds = 5;
    std::vector<int> sw_counts;
    add_common(sw, sweep_flags);
    sw->add_option("--branches", sw_counts, "branch counts (default 1 2 3)");
    sw->add_option("--seeds", sw_seeds, "number of seeds (default 5)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_scene(gen_flags, gen_out);
        if (tr->parsed()) return cmd_train(train_flags, preset, resume);
        if (ev->parsed()) return cmd_eval(eval_flags, eval_ck);
        if (rd->parsed()) return cmd_render(render_flags, rd_ck, rd_scene, rd_view, rd_out);
        if (st->parsed()) return cmd_stability(stab_flags, st_seeds);
        if (ab->parsed()) return cmd_ablate(abl_flags, ab_seeds);
        if (sw->parsed()) return cmd_sweep(sweep_flags, sw_counts, sw_seeds);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
