#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "ptycho/io/npy.hpp"
#include "ptycho/pipeline.hpp"
#include "scratch_dir.hpp"

namespace {

using namespace ptycho;
using io::Json;

std::size_t count_lines(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

PipelineConfig small_config(std::size_t offset = 12) {
    return parse_config(Json::parse(R"({"simulate": {"window": 64, "plan": {"rows": 3, "cols": 3, "offset": )" +
                                    std::to_string(offset) + "}}}"));
}

StitchResult uniform_prediction(Shape canvas, double amp, double phase) {
    return {RealField(canvas, amp), RealField(canvas, phase), RealField(canvas, 1.0)};
}

StitchResult label_prediction(const MaskedLabel& label, double phase_shift = 0.0) {
    StitchResult r{label.amplitude, label.phase, label.mask};
    for (std::size_t i = 0; i < r.phase.size(); ++i)
        if (label.mask[i] != 0.0) r.phase[i] += phase_shift;
    return r;
}

// ---- configuration ----

TEST(Config, DefaultsWhenEmpty) {
    const auto cfg = parse_config(Json::object());
    EXPECT_EQ(cfg.simulate.probe, ProbeParams{});
    EXPECT_EQ(cfg.simulate.plan.offset, 20u);
    EXPECT_EQ(cfg.epie.max_iterations, 1500u);
    EXPECT_EQ(cfg.sweep.offsets, (std::vector<std::size_t>{20, 30, 40, 50, 60}));
    EXPECT_EQ(cfg.stitch_for(cfg.simulate.probe).crop_margin, 0u);
}

TEST(Config, WindowRescalesDefaultProbe) {
    const auto cfg = small_config();
    EXPECT_EQ(cfg.simulate.probe.window, 64u);
    EXPECT_DOUBLE_EQ(cfg.simulate.probe.radius, kDefaultRadius / 2);
}

TEST(Config, CropMarginFollowsEdgeUnlessSet) {
    auto cfg = parse_config(Json::parse(R"({"simulate": {"probe": {"edge_smooth": 2.5}}})"));
    EXPECT_EQ(cfg.stitch_for(cfg.simulate.probe).crop_margin, 3u);
    cfg = parse_config(Json::parse(R"({"simulate": {"probe": {"edge_smooth": 2.5}}, "stitch": {"crop_margin": 1}})"));
    EXPECT_EQ(cfg.stitch_for(cfg.simulate.probe).crop_margin, 1u);
}

TEST(Config, RejectsInvalidInput) {
    for (const char* text : {
             R"({"simulate": {"sed": 1}})",
             R"({"extra": {}})",
             R"({"epie": {"alpha": 3.0}})",
             R"({"epie": {"max_iterations": -1}})",
             R"({"epie": {"scan_order": "spiral"}})",
             R"({"simulate": {"phantom": "cats"}})",
             R"({"simulate": {"plan": {"kind": "hexagon"}}})",
             R"({"simulate": {"probe": {"radius": 100.0}}})",
             R"({"stitch": {"taper_width": 0}})",
             R"({"sweep": {"methods": ["epie", "magic"]}})",
             R"({"sweep": {"offsets": []}})",
             R"({"epie": {"alpha": "big"}})",
         }) {
        try {
            parse_config(Json::parse(text));
            ADD_FAILURE() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidConfig) << text;
        }
    }
}

TEST(Config, LoadReportsUnreadableFiles) {
    ScratchDir dir;
    io::write_text(dir / "bad.json", "{not json");
    try {
        load_config(dir / "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    }
    EXPECT_NO_THROW(load_config(std::nullopt));
}

// ---- simulate ----

TEST(Simulate, DefaultGridGeometry) {
    ScratchDir dir;
    const auto m = simulate_dataset(SimulateConfig{}, dir.path());
    EXPECT_EQ(m.canvas, (Shape{168, 168}));
    EXPECT_EQ(m.plan.positions.size(), 9u);
    const auto h = io::read_npy_header(dir / m.array_files.at("diffraction_stack"));
    EXPECT_EQ(h.shape, (std::vector<std::size_t>{9, 128, 128}));
    EXPECT_EQ(io::read_real_npy(dir / m.array_files.at("true_phase")).shape(), (Shape{168, 168}));
    EXPECT_NEAR(m.extra.at("overlap_percent").get<double>(), 68.7, 1.5);

    const auto ds = load_dataset(dir.path());
    EXPECT_EQ(ds.stack.patterns.size(), 9u);
    EXPECT_EQ(ds.clamped_negatives, 0u);
    EXPECT_EQ(ds.truth.mask, union_support(m.canvas, ds.probe, m.plan.positions));
}

TEST(Simulate, RerunIsBitIdentical) {
    ScratchDir a_dir, b_dir;
    const auto cfg = small_config().simulate;
    simulate_dataset(cfg, a_dir / "a");
    simulate_dataset(cfg, b_dir / "b");
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a_dir / "a")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a_dir / "a");
        EXPECT_EQ(slurp(entry.path()), slurp(b_dir / "b" / rel)) << rel;
        ++files;
    }
    EXPECT_GT(files, 8u);
}

TEST(Simulate, SixBySixAtOffsetSixtyReportsOverlap) {
    ScratchDir dir;
    SimulateConfig cfg;
    cfg.plan = {"grid", 6, 6, 60};
    const auto m = simulate_dataset(cfg, dir.path());
    EXPECT_EQ(m.plan.positions.size(), 36u);
    EXPECT_NEAR(m.extra.at("overlap_percent").get<double>(), 14.9, 1.5);
}

TEST(LoadDataset, ClampsNegativeIntensities) {
    ScratchDir dir;
    const auto m = simulate_dataset(small_config().simulate, dir.path());
    auto stack = io::read_real_stack_npy(dir / m.array_files.at("diffraction_stack"));
    stack[0](0, 0) = -1.0;
    stack[2](5, 7) = -0.5;
    io::write_npy(dir / m.array_files.at("diffraction_stack"), stack);
    const auto ds = load_dataset(dir.path());
    EXPECT_EQ(ds.clamped_negatives, 2u);
    EXPECT_EQ(ds.stack.patterns[0](0, 0), 0.0);
}

TEST(LoadDataset, RejectsCorruptArrays) {
    ScratchDir dir;
    const auto m = simulate_dataset(small_config().simulate, dir.path());
    const auto expect_error = [&](ErrorCode code) {
        try {
            load_dataset(dir.path());
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), code);
        }
    };

    auto stack = io::read_real_stack_npy(dir / m.array_files.at("diffraction_stack"));
    const auto good_stack = stack;
    stack[1](3, 3) = std::numeric_limits<double>::quiet_NaN();
    io::write_npy(dir / m.array_files.at("diffraction_stack"), stack);
    expect_error(ErrorCode::DataError);
    io::write_npy(dir / m.array_files.at("diffraction_stack"), good_stack);

    stack.pop_back();
    io::write_npy(dir / m.array_files.at("diffraction_stack"), stack);
    expect_error(ErrorCode::ShapeMismatch);
    io::write_npy(dir / m.array_files.at("diffraction_stack"), good_stack);

    auto probe_real = io::read_real_npy(dir / m.array_files.at("probe_real"));
    probe_real(32, 32) += 0.5;
    io::write_npy(dir / m.array_files.at("probe_real"), probe_real);
    expect_error(ErrorCode::DataError);
}

// ---- predictions ----

TEST(Prediction, CorruptedLabelHitsTargetError) {
    const auto cfg = small_config();
    const auto plan = make_plan(cfg.simulate.plan, 64, 1);
    const auto probe = make_default_probe(64);
    const auto truth = make_masked_label(make_phantom(plan.canvas, 4, PhantomKind::Blobs), probe, plan.positions);
    const auto noisy = corrupt_label(truth, 4, cfg.sweep.prediction);
    EXPECT_NEAR(nrmse(noisy.phase, truth.phase, truth.mask, true), 0.3, 1e-9);
    EXPECT_EQ(noisy.mask, truth.mask);
    for (std::size_t i = 0; i < truth.mask.size(); ++i) {
        if (truth.mask[i] == 0.0) continue;
        EXPECT_GE(noisy.amplitude[i], 0.05);
        EXPECT_LE(noisy.amplitude[i], 1.0);
    }
    EXPECT_EQ(corrupt_label(truth, 4, cfg.sweep.prediction).phase, noisy.phase);
}

TEST(Prediction, PatchDirRoundTrip) {
    ScratchDir dir;
    const auto plan = make_grid_plan(3, 3, 12, 64);
    const auto probe = make_default_probe(64);
    const auto truth = make_masked_label(make_phantom(plan.canvas, 2, PhantomKind::Gradients), probe, plan.positions);
    const PatchSet set{plan.canvas, slice_patches(truth, probe, plan), 0.0};
    write_patches(dir.path(), set);
    const auto back = read_patches(dir.path());
    EXPECT_EQ(back.canvas, set.canvas);
    ASSERT_EQ(back.patches.size(), set.patches.size());
    EXPECT_EQ(back.patches[0].origin, set.patches[0].origin);
    EXPECT_EQ(back.patches[0].support_mask, set.patches[0].support_mask);
}

TEST(Prediction, WarmStartFallsBackToOnes) {
    StitchResult p = uniform_prediction({4, 4}, 0.5, 1.0);
    p.coverage(0, 0) = 0.0;
    p.amplitude(1, 1) = 0.0;
    const auto obj = warm_start_object(p);
    EXPECT_EQ(obj(0, 0), Complex(1.0, 0.0));
    EXPECT_EQ(obj(1, 1), Complex(1.0, 0.0));
    EXPECT_NEAR(std::abs(obj(2, 2) - std::polar(0.5, 1.0)), 0.0, 1e-15);
    p.phase(3, 3) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(warm_start_object(p), Error);
}

// ---- epie / epf ----

class EpieCommand : public ::testing::Test {
protected:
    void SetUp() override {
        cfg = small_config();
        cfg.epie.max_iterations = 60;
        simulate_dataset(cfg.simulate, data / "ds");
    }
    ScratchDir data;
    PipelineConfig cfg;
};

TEST_F(EpieCommand, ColdRunWritesOutputs) {
    const auto s = run_epie_command(data / "ds", cfg, std::nullopt, data / "cold");
    EXPECT_EQ(s.init_source, "cold");
    for (const char* f : {"recon_amplitude.npy", "recon_phase.npy", "recon_phase_wrapped.npy", "recon_object.npy",
                          "recon_amplitude.png", "recon_phase.png", "manifest.json", "summary.json", "timing.json"}) {
        EXPECT_TRUE(fs::exists(data / "cold" / f)) << f;
    }
    EXPECT_EQ(count_lines(data / "cold" / "sse_history.jsonl"), s.iterations);
    const auto summary = io::read_json(data / "cold" / "summary.json");
    EXPECT_EQ(summary.at("iterations").get<std::size_t>(), s.iterations);
    EXPECT_EQ(summary.at("converged").get<bool>(), s.converged);
    EXPECT_NO_THROW(io::load_manifest(data / "cold"));
}

TEST_F(EpieCommand, UniformPredictionMatchesColdStart) {
    write_prediction(data / "ones", uniform_prediction(load_dataset(data / "ds").manifest.canvas, 1.0, 0.0));
    const auto cold = run_epie_command(data / "ds", cfg, std::nullopt, data / "cold");
    const auto warm = run_epie_command(data / "ds", cfg, data / "ones", data / "warm");
    EXPECT_EQ(warm.init_source, "stitched_prediction");
    EXPECT_EQ(warm.iterations, cold.iterations);
    EXPECT_LT(std::abs(warm.final_sse - cold.final_sse), 1e-9 * cold.final_sse);
}

TEST_F(EpieCommand, GroundTruthStartConvergesImmediately) {
    write_prediction(data / "truth", label_prediction(load_dataset(data / "ds").truth));
    const auto s = run_epie_command(data / "ds", cfg, data / "truth", data / "warm");
    EXPECT_TRUE(s.converged);
    EXPECT_EQ(s.iterations, 1u);
}

TEST_F(EpieCommand, RejectsMismatchedPrediction) {
    write_prediction(data / "small", uniform_prediction({10, 10}, 1.0, 0.0));
    try {
        run_epie_command(data / "ds", cfg, data / "small", data / "warm");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(Epf, NoisyPredictionNeedsFewerIterationsThanColdStart) {
    ScratchDir dir;
    const PipelineConfig cfg;
    simulate_dataset(cfg.simulate, dir / "ds");
    const auto ds = load_dataset(dir / "ds");
    const auto noisy = corrupt_label(ds.truth, cfg.simulate.seed, cfg.sweep.prediction);
    ASSERT_NEAR(nrmse(noisy.phase, ds.truth.phase, ds.truth.mask, true), 0.3, 1e-9);
    write_patches(dir / "patches", {ds.manifest.canvas, slice_patches(noisy, ds.probe, ds.manifest.plan), 0.0});
    const auto cold = run_epie_command(dir / "ds", cfg, std::nullopt, dir / "cold");
    const auto warm = run_epie_command(dir / "ds", cfg, dir / "patches", dir / "warm");
    ASSERT_TRUE(cold.converged);
    ASSERT_TRUE(warm.converged);
    EXPECT_LT(warm.iterations, cold.iterations);
}

// ---- stitch ----

TEST(StitchCommand, SlicedLabelsStitchBack) {
    ScratchDir dir;
    const auto cfg = small_config();
    simulate_dataset(cfg.simulate, dir / "ds");
    const auto ds = load_dataset(dir / "ds");
    write_patches(dir / "patches", {ds.manifest.canvas, slice_patches(ds.truth, ds.probe, ds.manifest.plan), 0.0});
    const auto r = run_stitch_command(dir / "patches", cfg, dir / "stitched");
    for (const char* f : {"prediction.json", "pred_amplitude.npy", "pred_phase.npy", "coverage.npy", "pred_amplitude.png",
                          "pred_phase.png", "coverage.png"}) {
        EXPECT_TRUE(fs::exists(dir / "stitched" / f)) << f;
    }
    EXPECT_EQ(r.coverage, ds.truth.mask);
    // Patches are stored as float32, so agreement is at single precision.
    EXPECT_LT(nrmse(r.amplitude, ds.truth.amplitude, ds.truth.mask, false), 1e-6);
    EXPECT_LT(nrmse(r.phase, ds.truth.phase, ds.truth.mask, false), 1e-6);
    const auto back = read_prediction(dir / "stitched", cfg);
    EXPECT_EQ(back.coverage, r.coverage);
}

TEST(StitchCommand, SinglePatchIsReproduced) {
    ScratchDir dir;
    const auto probe = make_disc_probe(16, 6, 0, 0);
    const auto support = probe.support();
    RealField amp(16, 16), phase(16, 16);
    for (std::size_t i = 0; i < support.size(); ++i) {
        amp[i] = support[i] * 0.25 * (1 + i % 3);
        phase[i] = support[i] * (0.5 - 0.125 * (i % 5));
    }
    write_patches(dir / "p", {{20, 24}, {{amp, phase, support, {2, 5}}}, std::nullopt});
    const auto r = run_stitch_command(dir / "p", PipelineConfig{}, dir / "out");
    for (std::size_t row = 0; row < 16; ++row) {
        for (std::size_t col = 0; col < 16; ++col) {
            EXPECT_EQ(r.amplitude(row + 2, col + 5), amp(row, col));
            EXPECT_EQ(r.phase(row + 2, col + 5), phase(row, col));
        }
    }
    EXPECT_EQ(r.coverage(0, 0), 0.0);
}

TEST(StitchCommand, ConstantPatchesGiveConstantOutput) {
    ScratchDir dir;
    const auto plan = make_grid_plan(3, 3, 12, 64);
    const auto probe = make_default_probe(64);
    MaskedLabel flat{RealField(plan.canvas, 0.75), RealField(plan.canvas, -0.5), union_support(plan.canvas, probe, plan.positions)};
    write_patches(dir / "p", {plan.canvas, slice_patches(flat, probe, plan), 0.0});
    const auto r = run_stitch_command(dir / "p", PipelineConfig{}, dir / "out");
    for (std::size_t i = 0; i < r.coverage.size(); ++i) {
        if (r.coverage[i] == 0.0) continue;
        EXPECT_NEAR(r.amplitude[i], 0.75, 1e-12);
        EXPECT_NEAR(r.phase[i], -0.5, 1e-12);
    }
}

// ---- metrics ----

class MetricsCommand : public ::testing::Test {
protected:
    void SetUp() override {
        simulate_dataset(small_config().simulate, dir / "ds");
        truth = load_dataset(dir / "ds").truth;
    }
    ScratchDir dir;
    MaskedLabel truth;
};

TEST_F(MetricsCommand, LabelsGiveZeroError) {
    write_prediction(dir / "pred", label_prediction(truth));
    const auto r = run_metrics_command(dir / "pred", dir / "ds", dir / "m");
    EXPECT_LT(r.amp_mae, 1e-7);
    EXPECT_LT(r.amp_nrmse, 1e-7);
    EXPECT_LT(r.phase_mae, 1e-6);
    EXPECT_LT(r.phase_nrmse, 1e-6);
    const auto j = io::read_json(dir / "m" / "metrics.json");
    EXPECT_EQ(j.at("pixel_count").get<std::size_t>(), r.pixel_count);
    EXPECT_TRUE(fs::exists(dir / "m" / "frc.png"));
}

TEST_F(MetricsCommand, ConstantPhaseShiftSignature) {
    write_prediction(dir / "pred", label_prediction(truth, 1.0));
    const auto r = run_metrics_command(dir / "pred", dir / "ds", dir / "m");
    EXPECT_NEAR(r.phase_mae, 1.0, 1e-6);
    EXPECT_NEAR(r.phase_offset.a, 1.0, 1e-6);
    EXPECT_LT(r.phase_nrmse, 1e-6);
    EXPECT_LT(r.amp_nrmse, 1e-7);
}

TEST_F(MetricsCommand, FrcCsvHasOneRowPerRing) {
    write_prediction(dir / "pred", label_prediction(truth, 0.2));
    run_metrics_command(dir / "pred", dir / "ds", dir / "m");
    for (const char* name : {"frc_amplitude.csv", "frc_phase.csv"}) {
        std::istringstream in(slurp(dir / "m" / name));
        std::string line;
        std::getline(in, line);
        EXPECT_EQ(line, "ring,frequency,correlation");
        std::vector<double> freq;
        for (std::size_t k = 0; std::getline(in, line); ++k) {
            std::istringstream row(line);
            std::string ring, f;
            std::getline(row, ring, ',');
            std::getline(row, f, ',');
            EXPECT_EQ(std::stoul(ring), k);
            freq.push_back(std::stod(f));
        }
        // Rings run from DC to Nyquist in 1-pixel steps: n/2 + 1 rows for an n×n region.
        ASSERT_GE(freq.size(), 2u);
        const std::size_t nyquist = freq.size() - 1;
        for (std::size_t k = 0; k < freq.size(); ++k) EXPECT_NEAR(freq[k], double(k) / nyquist, 1e-9);
    }
}

// ---- sweep ----

TEST(Sweep, DeterministicAcrossRunsAndThreads) {
    ScratchDir dir;
    auto cfg = small_config();
    cfg.sweep.offsets = {10, 16};
    cfg.sweep.seeds = {1, 2};
    cfg.epie.max_iterations = 40;
    const auto a = run_sweep(cfg, dir / "a", 1);
    const auto b = run_sweep(cfg, dir / "b", 2);
    ASSERT_EQ(a.size(), 2u * 2u * 3u);
    EXPECT_EQ(slurp(dir / "a" / "runs.csv"), slurp(dir / "b" / "runs.csv"));
    EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "b" / "summary.csv"));
    EXPECT_TRUE(fs::exists(dir / "a" / "timing.csv"));
    EXPECT_EQ(count_lines(dir / "a" / "runs.csv"), 1u + a.size());
    for (const auto& rec : a) {
        if (rec.method == Method::StitchedOnly) EXPECT_EQ(rec.iterations, 0u);
    }
}

TEST(Overlap, TableListsEachOffset) {
    const auto table = overlap_table(make_default_probe(), {0, 20, 300});
    EXPECT_EQ(table, "offset\toverlap_percent\n0\t100.00\n20\t68.93\n300\t0.00\n");
}

}  // namespace
