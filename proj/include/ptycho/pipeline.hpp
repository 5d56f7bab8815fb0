#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ptycho/epie.hpp"
#include "ptycho/forward_model.hpp"
#include "ptycho/io/manifest.hpp"
#include "ptycho/metrics.hpp"
#include "ptycho/stitch.hpp"

namespace ptycho {

namespace fs = std::filesystem;

/// `kind` is "grid" or an alternative layout name (diamond, random, count5, ...).
struct PlanSpec {
    std::string kind = "grid";
    std::size_t rows = 3;
    std::size_t cols = 3;
    std::size_t offset = 20;
};

ScanPlan make_plan(const PlanSpec& spec, std::size_t window, std::uint64_t seed);

struct SimulateConfig {
    std::uint64_t seed = 1;
    PhantomKind phantom = PhantomKind::Blobs;
    ProbeParams probe;
    PlanSpec plan;
};

/// Smooth-noise corruption of a masked label, standing in for a learned prediction.
struct SyntheticPredictionConfig {
    double phase_nrmse = 0.3;
    double amp_nrmse = 0.1;
    double noise_sigma = 6.0;
};

enum class Method { Epie, Epf, StitchedOnly };

Method parse_method(std::string_view name);
std::string_view to_string(Method m);

struct SweepConfig {
    std::vector<std::size_t> offsets{20, 30, 40, 50, 60};
    std::vector<Method> methods{Method::Epie, Method::Epf, Method::StitchedOnly};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::size_t rows = 3;
    std::size_t cols = 3;
    SyntheticPredictionConfig prediction;
};

/// One JSON config file feeds every command. Sections: "simulate", "epie",
/// "stitch", "sweep"; unknown keys are rejected.
struct PipelineConfig {
    SimulateConfig simulate;
    EpieConfig epie;
    StitchConfig stitch;
    /// When the config leaves crop_margin unset it follows the probe's edge width.
    bool crop_margin_explicit = false;
    SweepConfig sweep;

    StitchConfig stitch_for(const ProbeParams& probe) const;
};

/// Throws InvalidConfig.
PipelineConfig parse_config(const io::Json& j);
/// Defaults when `path` is empty.
PipelineConfig load_config(const std::optional<fs::path>& path);

io::Json epie_config_to_json(const EpieConfig& cfg);

// ---- datasets ----

struct Dataset {
    io::Manifest manifest;
    DiffractionStack stack;
    Probe probe;
    MaskedLabel truth;
    std::size_t clamped_negatives = 0;  // negative intensities set to 0 while loading
};

/// Writes manifest.json, the diffraction stack (one 3D array), masked labels,
/// the probe, and the grouped nine-channel input sets under sets/.
io::Manifest simulate_dataset(const SimulateConfig& cfg, const fs::path& out);

/// Validates the manifest and all arrays before returning. The probe is rebuilt
/// from probe_params and must match the stored probe arrays.
Dataset load_dataset(const fs::path& dir);

// ---- predictions ----

MaskedLabel corrupt_label(const MaskedLabel& truth, std::uint64_t seed, const SyntheticPredictionConfig& cfg);

/// Cuts a canvas-sized field into one patch per input set, masked to the set's support.
std::vector<PatchPrediction> slice_patches(const MaskedLabel& field, const Probe& probe, const ScanPlan& plan);

inline constexpr const char* kPatchesName = "patches.json";
inline constexpr const char* kPredictionName = "prediction.json";

struct PatchSet {
    Shape canvas;
    std::vector<PatchPrediction> patches;
    std::optional<double> edge_smooth;  // probe edge width, used for the default crop
};

void write_patches(const fs::path& dir, const PatchSet& set);
PatchSet read_patches(const fs::path& dir);

void write_prediction(const fs::path& dir, const StitchResult& stitched);

/// Accepts a stitched prediction dir, a raw patch dir (stitched here with
/// `cfg`), or a dataset-style manifest naming pred_amplitude/pred_phase.
StitchResult read_prediction(const fs::path& dir, const PipelineConfig& cfg);

/// Object estimate for a warm start. Uncovered or zero-amplitude pixels fall back to 1+0i.
ComplexField warm_start_object(const StitchResult& prediction);

// ---- commands ----

struct EpieRunSummary {
    bool converged = false;
    std::size_t iterations = 0;
    double final_sse = 0.0;
    std::string init_source;
    double total_seconds = 0.0;
    double median_iteration_seconds = 0.0;
};

EpieRunSummary run_epie_command(const fs::path& dataset_dir, const PipelineConfig& cfg,
                                const std::optional<fs::path>& init_dir, const fs::path& out);

StitchResult run_stitch_command(const fs::path& patches_dir, const PipelineConfig& cfg, const fs::path& out);

/// Compares a reconstruction (recon_* roles) or stitched prediction against the dataset labels.
MetricsReport run_metrics_command(const fs::path& recon_dir, const fs::path& dataset_dir, const fs::path& out);

io::Json metrics_to_json(const MetricsReport& r);

struct SweepRecord {
    std::size_t offset = 0;
    Method method = Method::Epie;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    std::size_t iterations = 0;
    bool converged = false;
    double seconds = 0.0;
};

/// One (offset, seed) job: simulate in memory and evaluate the requested methods.
std::vector<SweepRecord> run_sweep_job(const PipelineConfig& cfg, std::size_t offset, std::uint64_t seed);

/// Runs every job (on up to `threads` workers) and writes runs.csv, summary.csv and timing.csv.
std::vector<SweepRecord> run_sweep(const PipelineConfig& cfg, const fs::path& out, std::size_t threads);

/// Tab-separated offset / overlap-percent lines.
std::string overlap_table(const Probe& probe, const std::vector<std::size_t>& offsets);

}  // namespace ptycho
