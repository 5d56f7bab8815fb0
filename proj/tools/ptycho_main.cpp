// Command-line front end: simulate, epie, epf, stitch, metrics, sweep, overlap, synth-prediction.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ptycho/pipeline.hpp"

namespace {

using namespace ptycho;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNotConverged = 4;

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    bool require_converged = false;
};

PipelineConfig config_from(const Globals& g) {
    PipelineConfig cfg = load_config(g.config.empty() ? std::nullopt : std::optional<fs::path>(g.config));
    if (g.seed) {
        cfg.simulate.seed = *g.seed;
        cfg.epie.shuffle_seed = *g.seed;
        cfg.sweep.seeds = {*g.seed};
    }
    return cfg;
}

void require_out(const Globals& g) {
    if (g.out.empty()) throw Error(ErrorCode::InvalidConfig, "--out <dir> is required");
}

int epie(const Globals& g, const std::string& dataset, const std::optional<std::string>& init) {
    require_out(g);
    const PipelineConfig cfg = config_from(g);
    const auto s = run_epie_command(dataset, cfg, init ? std::optional<fs::path>(*init) : std::nullopt, g.out);
    std::printf("init=%s iterations=%zu converged=%s final_sse=%.6g median_iteration_s=%.4g\n", s.init_source.c_str(),
                s.iterations, s.converged ? "yes" : "no", s.final_sse, s.median_iteration_seconds);
    if (g.require_converged && !s.converged) {
        std::fprintf(stderr, "error: ePIE did not converge within %zu iterations\n", cfg.epie.max_iterations);
        return kExitNotConverged;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ptychographic simulation, ePIE/ePF reconstruction, stitching and metrics"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON config file (sections: simulate, epie, stitch, sweep)");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--seed", g.seed, "override the simulation, shuffle and sweep seeds");
    app.add_option("--threads", g.threads, "worker threads for sweep")->check(CLI::PositiveNumber);
    app.add_flag("--require-converged", g.require_converged, "exit 4 when ePIE stops without converging");

    auto* simulate = app.add_subcommand("simulate", "simulate a dataset directory");

    std::string dataset, init_dir, recon_dir, patches_dir;
    auto* epie_cmd = app.add_subcommand("epie", "reconstruct a dataset (cold start unless --init)");
    epie_cmd->add_option("dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
    epie_cmd->add_option("--init", init_dir, "prediction directory for a warm start")->check(CLI::ExistingDirectory);

    auto* epf_cmd = app.add_subcommand("epf", "ePIE warm-started from a stitched prediction");
    epf_cmd->add_option("dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
    epf_cmd->add_option("--init", init_dir, "prediction directory")->required()->check(CLI::ExistingDirectory);

    auto* stitch_cmd = app.add_subcommand("stitch", "feather patch predictions into one canvas");
    stitch_cmd->add_option("patches", patches_dir, "directory with patches.json")->required()->check(CLI::ExistingDirectory);

    auto* metrics_cmd = app.add_subcommand("metrics", "compare a reconstruction with dataset labels");
    metrics_cmd->add_option("recon", recon_dir, "reconstruction or prediction directory")->required()->check(CLI::ExistingDirectory);
    metrics_cmd->add_option("dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);

    auto* sweep_cmd = app.add_subcommand("sweep", "offset ablation over methods and seeds");

    auto* synth_cmd = app.add_subcommand("synth-prediction", "write patches cut from noise-corrupted dataset labels");
    synth_cmd->add_option("dataset", dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);

    std::vector<std::size_t> offsets{0, 10, 20, 30, 40, 50, 60, 70, 80};
    auto* overlap_cmd = app.add_subcommand("overlap", "print the offset -> overlap table for the configured probe");
    overlap_cmd->add_option("--offsets", offsets, "offsets in pixels");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (simulate->parsed()) {
            require_out(g);
            const auto m = simulate_dataset(config_from(g).simulate, g.out);
            std::printf("canvas=%zux%zu positions=%zu", m.canvas.rows, m.canvas.cols, m.plan.positions.size());
            if (m.extra.contains("overlap_percent")) std::printf(" overlap_percent=%.2f", m.extra["overlap_percent"].get<double>());
            std::printf("\n");
        } else if (epie_cmd->parsed()) {
            return epie(g, dataset, init_dir.empty() ? std::nullopt : std::optional<std::string>(init_dir));
        } else if (epf_cmd->parsed()) {
            return epie(g, dataset, init_dir);
        } else if (stitch_cmd->parsed()) {
            require_out(g);
            const auto r = run_stitch_command(patches_dir, config_from(g), g.out);
            std::size_t covered = 0;
            for (double w : r.coverage) covered += w > 0.0 ? 1 : 0;
            std::printf("canvas=%zux%zu covered_pixels=%zu\n", r.coverage.rows(), r.coverage.cols(), covered);
        } else if (metrics_cmd->parsed()) {
            require_out(g);
            const auto r = run_metrics_command(recon_dir, dataset, g.out);
            std::cout << metrics_to_json(r).dump(2) << '\n';
        } else if (sweep_cmd->parsed()) {
            require_out(g);
            const auto records = run_sweep(config_from(g), g.out, g.threads);
            std::printf("runs=%zu written to %s\n", records.size(), g.out.c_str());
        } else if (synth_cmd->parsed()) {
            require_out(g);
            const PipelineConfig cfg = config_from(g);
            const Dataset ds = load_dataset(dataset);
            const MaskedLabel noisy = corrupt_label(ds.truth, cfg.simulate.seed, cfg.sweep.prediction);
            write_patches(g.out, {ds.manifest.canvas, slice_patches(noisy, ds.probe, ds.manifest.plan),
                                  ds.manifest.probe_params.edge_smooth});
            std::printf("phase_nrmse=%.4g\n", nrmse(noisy.phase, ds.truth.phase, ds.truth.mask, true));
        } else if (overlap_cmd->parsed()) {
            const auto pp = config_from(g).simulate.probe;
            std::cout << overlap_table(make_disc_probe(pp.window, pp.radius, pp.edge_smooth, pp.phase_curvature), offsets);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
        return e.code() == ErrorCode::InvalidConfig ? kExitConfig : kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return kExitOk;
}
