#include "ptycho/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "ptycho/io/npy.hpp"
#include "ptycho/io/png.hpp"

namespace ptycho {
namespace {

using io::Json;
using Clock = std::chrono::steady_clock;

constexpr double kPi = std::numbers::pi;
constexpr double kTinyAmplitude = 1e-12;

std::string numbered(const char* stem, std::size_t i, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03zu_%s", stem, i, suffix);
    return buf;
}

Json canvas_json(Shape s) { return Json{{"height", s.rows}, {"width", s.cols}}; }

Shape canvas_from(const Json& j) {
    try {
        return {j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::DataError, std::string("bad canvas entry: ") + e.what());
    }
}

std::string required_role(const io::Manifest& m, const std::string& role, const fs::path& dir) {
    const auto it = m.array_files.find(role);
    if (it == m.array_files.end()) {
        throw Error(ErrorCode::DataError, dir.string() + ": manifest has no '" + role + "' array");
    }
    return it->second;
}

std::string json_string(const Json& j, const char* key, const fs::path& where) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(ErrorCode::DataError, where.string() + ": expected a string '" + key + "'");
    }
    return j.at(key).get<std::string>();
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

void write_previews(const fs::path& dir, const std::string& stem, const RealField& amplitude, const RealField& phase) {
    io::write_png(dir / (stem + "_amplitude.png"), io::to_gray(amplitude, 0.0, 1.0));
    io::write_png(dir / (stem + "_phase.png"), io::to_gray(phase, -kPi, kPi));
}

/// Estimate planes from a reconstruction or prediction directory.
struct Estimate {
    RealField amplitude;
    RealField phase;
};

Estimate load_estimate(const fs::path& dir, const PipelineConfig& cfg) {
    if (fs::exists(dir / io::kManifestName)) {
        const auto m = io::load_manifest(dir);
        if (m.array_files.contains("recon_amplitude")) {
            return {io::read_real_npy(dir / m.array_files.at("recon_amplitude")),
                    io::read_real_npy(dir / required_role(m, "recon_phase", dir))};
        }
    }
    auto p = read_prediction(dir, cfg);
    return {std::move(p.amplitude), std::move(p.phase)};
}

// Largest square centred in the bounding box of the mask.
std::pair<Offset, Shape> frc_window(const RealField& mask) {
    std::size_t r0 = mask.rows(), r1 = 0, c0 = mask.cols(), c1 = 0;
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        for (std::size_t c = 0; c < mask.cols(); ++c) {
            if (mask(r, c) == 0.0) continue;
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
        }
    }
    if (r0 > r1) throw Error(ErrorCode::EmptyMask, "mask selects no pixels");
    const std::size_t h = r1 - r0 + 1, w = c1 - c0 + 1, side = std::min(h, w);
    return {{static_cast<int>(r0 + (h - side) / 2), static_cast<int>(c0 + (w - side) / 2)}, {side, side}};
}

void write_frc_csv(const fs::path& path, const FrcCurve& curve) {
    std::ostringstream os;
    os << "ring,frequency,correlation\n";
    char buf[96];
    for (std::size_t i = 0; i < curve.frequencies.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", i, curve.frequencies[i], curve.correlations[i]);
        os << buf;
    }
    io::write_text(path, os.str());
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

// ---- datasets ----

io::Manifest simulate_dataset(const SimulateConfig& cfg, const fs::path& out) {
    const auto& pp = cfg.probe;
    const Probe probe = make_disc_probe(pp.window, pp.radius, pp.edge_smooth, pp.phase_curvature);
    const ScanPlan plan = make_plan(cfg.plan, pp.window, cfg.seed);
    const ComplexField transmission = make_phantom(plan.canvas, cfg.seed, cfg.phantom);
    const DiffractionStack stack = simulate_stack(transmission, probe, plan);
    const MaskedLabel label = make_masked_label(transmission, probe, plan.positions);

    fs::create_directories(out / "sets");
    io::Manifest m;
    m.canvas = plan.canvas;
    m.window = plan.window;
    m.plan = plan;
    m.probe_params = pp;
    m.seed = cfg.seed;
    m.array_files = {{"diffraction_stack", "diffraction_stack.npy"}, {"true_amplitude", "true_amplitude.npy"},
                     {"true_phase", "true_phase.npy"},               {"mask", "mask.npy"},
                     {"probe_real", "probe_real.npy"},               {"probe_imag", "probe_imag.npy"}};

    io::write_npy(out / "diffraction_stack.npy", stack.patterns);
    io::write_npy(out / "true_amplitude.npy", label.amplitude);
    io::write_npy(out / "true_phase.npy", label.phase);
    io::write_npy(out / "mask.npy", label.mask);
    RealField re(probe.field.shape()), im(probe.field.shape());
    for (std::size_t i = 0; i < re.size(); ++i) {
        re[i] = probe.field[i].real();
        im[i] = probe.field[i].imag();
    }
    io::write_npy(out / "probe_real.npy", re);
    io::write_npy(out / "probe_imag.npy", im);

    // Nine-channel input sets with their own masked labels, for the learned predictor.
    Json sets = Json::array();
    const auto groups = partition_into_sets(plan);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const InputSet set = assemble_input_set(stack, probe, groups[g]);
        std::vector<RealField> channels = set.channels;
        while (channels.size() < kMaxSetChannels) channels.emplace_back(set.support_mask.shape());
        RealField amp(set.support_mask.shape()), phase(set.support_mask.shape());
        for (std::size_t r = 0; r < amp.rows(); ++r) {
            for (std::size_t c = 0; c < amp.cols(); ++c) {
                if (set.support_mask(r, c) == 0.0) continue;
                const std::size_t gr = r + set.origin.row, gc = c + set.origin.col;
                amp(r, c) = label.amplitude(gr, gc);
                phase(r, c) = label.phase(gr, gc);
            }
        }
        const Json entry{{"indices", set.indices},
                         {"origin", {set.origin.row, set.origin.col}},
                         {"shape", {amp.rows(), amp.cols()}},
                         {"inputs", numbered("set", g, "inputs.npy")},
                         {"mask", numbered("set", g, "mask.npy")},
                         {"amplitude", numbered("set", g, "amplitude.npy")},
                         {"phase", numbered("set", g, "phase.npy")}};
        io::write_npy(out / "sets" / entry["inputs"].get<std::string>(), channels);
        io::write_npy(out / "sets" / entry["mask"].get<std::string>(), set.support_mask);
        io::write_npy(out / "sets" / entry["amplitude"].get<std::string>(), amp);
        io::write_npy(out / "sets" / entry["phase"].get<std::string>(), phase);
        sets.push_back(entry);
    }
    io::write_text(out / "sets" / "sets.json",
                   Json{{"schema_version", io::kSchemaVersion}, {"channels", kMaxSetChannels}, {"sets", sets}}.dump(2) + "\n");

    m.extra["phantom"] = std::string(to_string(cfg.phantom));
    m.extra["sets"] = "sets/sets.json";
    if (plan.grid) m.extra["overlap_percent"] = overlap_percent(plan.grid->offset, probe);
    io::save_manifest(out, m);
    return m;
}

Dataset load_dataset(const fs::path& dir) {
    Dataset ds;
    ds.manifest = io::load_manifest(dir);
    const auto& m = ds.manifest;
    const auto& pp = m.probe_params;
    ds.probe = make_disc_probe(pp.window, pp.radius, pp.edge_smooth, pp.phase_curvature);
    if (m.array_files.contains("probe_real") && m.array_files.contains("probe_imag")) {
        const RealField re = io::read_real_npy(dir / m.array_files.at("probe_real"));
        const RealField im = io::read_real_npy(dir / m.array_files.at("probe_imag"));
        double worst = 0.0;
        for (std::size_t i = 0; i < re.size(); ++i) {
            worst = std::max(worst, std::abs(Complex(re[i], im[i]) - ds.probe.field[i]));
        }
        // float32 storage limits agreement to about 1e-7.
        if (worst > 1e-6) {
            throw Error(ErrorCode::DataError, "stored probe differs from probe_params by " + std::to_string(worst));
        }
    }

    ds.stack.plan = m.plan;
    ds.stack.patterns = io::read_real_stack_npy(dir / required_role(m, "diffraction_stack", dir));
    for (auto& p : ds.stack.patterns) {
        for (double& v : p) {
            if (!std::isfinite(v)) throw Error(ErrorCode::DataError, "diffraction stack contains non-finite values");
            if (v < 0.0) {
                v = 0.0;
                ++ds.clamped_negatives;
            }
        }
    }
    ds.truth.amplitude = io::read_real_npy(dir / required_role(m, "true_amplitude", dir));
    ds.truth.phase = io::read_real_npy(dir / required_role(m, "true_phase", dir));
    ds.truth.mask = io::read_real_npy(dir / required_role(m, "mask", dir));
    return ds;
}

// ---- predictions ----

MaskedLabel corrupt_label(const MaskedLabel& truth, std::uint64_t seed, const SyntheticPredictionConfig& cfg) {
    const Shape shape = truth.mask.shape();
    require_same_shape(truth.amplitude, truth.mask, "label amplitude and mask differ in shape");
    require_same_shape(truth.phase, truth.mask, "label phase and mask differ in shape");
    const RealField phase_noise = smooth_noise(shape, seed + 1000, cfg.noise_sigma);
    const RealField amp_noise = smooth_noise(shape, seed + 2000, cfg.noise_sigma);

    double count = 0.0, noise_mean = 0.0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (truth.mask[i] == 0.0) continue;
        count += 1.0;
        noise_mean += phase_noise[i];
    }
    if (count == 0.0) throw Error(ErrorCode::EmptyMask, "label mask selects no pixels");
    noise_mean /= count;

    double noise_sq = 0.0, phase_sq = 0.0, amp_sq = 0.0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (truth.mask[i] == 0.0) continue;
        noise_sq += (phase_noise[i] - noise_mean) * (phase_noise[i] - noise_mean);
        phase_sq += truth.phase[i] * truth.phase[i];
        amp_sq += truth.amplitude[i] * truth.amplitude[i];
    }
    // Zero-mean phase noise scaled so the offset-corrected phase NRMSE is exactly cfg.phase_nrmse.
    const double phase_scale = noise_sq > 0.0 ? cfg.phase_nrmse * std::sqrt(phase_sq / noise_sq) : 0.0;
    const double amp_scale = cfg.amp_nrmse * std::sqrt(amp_sq / count);

    MaskedLabel out{RealField(shape), RealField(shape), truth.mask};
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (truth.mask[i] == 0.0) continue;
        out.phase[i] = truth.phase[i] + phase_scale * (phase_noise[i] - noise_mean);
        out.amplitude[i] = std::clamp(truth.amplitude[i] + amp_scale * amp_noise[i], 0.05, 1.0);
    }
    return out;
}

std::vector<PatchPrediction> slice_patches(const MaskedLabel& field, const Probe& probe, const ScanPlan& plan) {
    require_same_shape(field.amplitude, field.phase, "amplitude and phase differ in shape");
    if (field.amplitude.shape() != plan.canvas) throw Error(ErrorCode::ShapeMismatch, "field does not match the plan canvas");
    std::vector<PatchPrediction> patches;
    for (const auto& group : partition_into_sets(plan)) {
        Offset lo = plan.positions[group.front()], hi = lo;
        for (auto idx : group) {
            const auto& p = plan.positions[idx];
            lo = {std::min(lo.row, p.row), std::min(lo.col, p.col)};
            hi = {std::max(hi.row, p.row), std::max(hi.col, p.col)};
        }
        const Shape shape{plan.window + static_cast<std::size_t>(hi.row - lo.row),
                          plan.window + static_cast<std::size_t>(hi.col - lo.col)};
        std::vector<Offset> rel;
        for (auto idx : group) rel.push_back({plan.positions[idx].row - lo.row, plan.positions[idx].col - lo.col});

        PatchPrediction patch{RealField(shape), RealField(shape), union_support(shape, probe, rel), lo};
        for (std::size_t r = 0; r < shape.rows; ++r) {
            for (std::size_t c = 0; c < shape.cols; ++c) {
                if (patch.support_mask(r, c) == 0.0) continue;
                patch.amplitude(r, c) = field.amplitude(r + lo.row, c + lo.col);
                patch.phase(r, c) = field.phase(r + lo.row, c + lo.col);
            }
        }
        patches.push_back(std::move(patch));
    }
    return patches;
}

void write_patches(const fs::path& dir, const PatchSet& set) {
    fs::create_directories(dir);
    Json entries = Json::array();
    for (std::size_t i = 0; i < set.patches.size(); ++i) {
        const auto& p = set.patches[i];
        const Json e{{"origin", {p.origin.row, p.origin.col}},
                     {"amplitude", numbered("patch", i, "amplitude.npy")},
                     {"phase", numbered("patch", i, "phase.npy")},
                     {"mask", numbered("patch", i, "mask.npy")}};
        io::write_npy(dir / e["amplitude"].get<std::string>(), p.amplitude);
        io::write_npy(dir / e["phase"].get<std::string>(), p.phase);
        io::write_npy(dir / e["mask"].get<std::string>(), p.support_mask);
        entries.push_back(e);
    }
    Json j{{"schema_version", io::kSchemaVersion}, {"canvas", canvas_json(set.canvas)}};
    if (set.edge_smooth) j["edge_smooth"] = *set.edge_smooth;
    j["patches"] = std::move(entries);
    io::write_text(dir / kPatchesName, j.dump(2) + "\n");
}

PatchSet read_patches(const fs::path& dir) {
    const fs::path index = dir / kPatchesName;
    Json j;
    try {
        j = io::read_json(index);
    } catch (const Error& e) {
        throw Error(ErrorCode::DataError, e.what());
    }
    if (json_string(j, "schema_version", index) != io::kSchemaVersion) {
        throw Error(ErrorCode::DataError, index.string() + ": unsupported schema_version");
    }
    PatchSet set;
    set.canvas = canvas_from(j.value("canvas", Json::object()));
    if (j.contains("edge_smooth") && j.at("edge_smooth").is_number()) set.edge_smooth = j.at("edge_smooth").get<double>();
    if (!j.contains("patches") || !j.at("patches").is_array() || j.at("patches").empty()) {
        throw Error(ErrorCode::DataError, index.string() + ": needs a non-empty 'patches' list");
    }
    for (const auto& e : j.at("patches")) {
        const auto& o = e.value("origin", Json::array());
        if (!o.is_array() || o.size() != 2 || !o[0].is_number_integer() || !o[1].is_number_integer()) {
            throw Error(ErrorCode::DataError, index.string() + ": patch origin must be [row, col]");
        }
        PatchPrediction p;
        p.origin = {o[0].get<int>(), o[1].get<int>()};
        for (const char* key : {"amplitude", "phase", "mask"}) {
            const fs::path file = dir / json_string(e, key, index);
            if (!fs::exists(file)) throw Error(ErrorCode::IoError, "missing patch array " + file.string());
        }
        p.amplitude = io::read_real_npy(dir / e.at("amplitude").get<std::string>());
        p.phase = io::read_real_npy(dir / e.at("phase").get<std::string>());
        p.support_mask = io::read_real_npy(dir / e.at("mask").get<std::string>());
        if (p.phase.shape() != p.amplitude.shape() || p.support_mask.shape() != p.amplitude.shape()) {
            throw Error(ErrorCode::ShapeMismatch, index.string() + ": patch planes differ in shape");
        }
        if (p.origin.row < 0 || p.origin.col < 0 || p.origin.row + p.amplitude.rows() > set.canvas.rows ||
            p.origin.col + p.amplitude.cols() > set.canvas.cols) {
            throw Error(ErrorCode::PlanOutOfBounds, index.string() + ": a patch extends past the canvas");
        }
        set.patches.push_back(std::move(p));
    }
    return set;
}

void write_prediction(const fs::path& dir, const StitchResult& stitched) {
    fs::create_directories(dir);
    io::write_npy(dir / "pred_amplitude.npy", stitched.amplitude);
    io::write_npy(dir / "pred_phase.npy", stitched.phase);
    io::write_npy(dir / "coverage.npy", stitched.coverage);
    const Json j{{"schema_version", io::kSchemaVersion},
                 {"canvas", canvas_json(stitched.amplitude.shape())},
                 {"array_files",
                  {{"pred_amplitude", "pred_amplitude.npy"}, {"pred_phase", "pred_phase.npy"}, {"coverage", "coverage.npy"}}}};
    io::write_text(dir / kPredictionName, j.dump(2) + "\n");
}

StitchResult read_prediction(const fs::path& dir, const PipelineConfig& cfg) {
    if (fs::exists(dir / kPredictionName)) {
        const fs::path index = dir / kPredictionName;
        Json j;
        try {
            j = io::read_json(index);
        } catch (const Error& e) {
            throw Error(ErrorCode::DataError, e.what());
        }
        const Shape canvas = canvas_from(j.value("canvas", Json::object()));
        const Json files = j.value("array_files", Json::object());
        StitchResult out;
        out.amplitude = io::read_real_npy(dir / json_string(files, "pred_amplitude", index));
        out.phase = io::read_real_npy(dir / json_string(files, "pred_phase", index));
        out.coverage = files.contains("coverage") ? io::read_real_npy(dir / json_string(files, "coverage", index))
                                                  : RealField(canvas, 1.0);
        for (const auto* plane : {&out.amplitude, &out.phase, &out.coverage}) {
            if (plane->shape() != canvas) throw Error(ErrorCode::ShapeMismatch, index.string() + ": array does not match canvas");
        }
        return out;
    }
    if (fs::exists(dir / kPatchesName)) {
        const PatchSet set = read_patches(dir);
        StitchConfig sc = cfg.stitch;
        if (!cfg.crop_margin_explicit && set.edge_smooth) {
            sc.crop_margin = static_cast<std::size_t>(std::ceil(*set.edge_smooth));
        }
        return stitch(set.patches, set.canvas, sc);
    }
    if (fs::exists(dir / io::kManifestName)) {
        const auto m = io::load_manifest(dir);
        StitchResult out;
        out.amplitude = io::read_real_npy(dir / required_role(m, "pred_amplitude", dir));
        out.phase = io::read_real_npy(dir / required_role(m, "pred_phase", dir));
        out.coverage = m.array_files.contains("coverage") ? io::read_real_npy(dir / m.array_files.at("coverage"))
                                                          : RealField(m.canvas, 1.0);
        return out;
    }
    throw Error(ErrorCode::DataError, dir.string() + " holds no prediction.json, patches.json or manifest.json");
}

ComplexField warm_start_object(const StitchResult& prediction) {
    require_same_shape(prediction.amplitude, prediction.phase, "prediction amplitude and phase differ in shape");
    require_same_shape(prediction.amplitude, prediction.coverage, "prediction amplitude and coverage differ in shape");
    ComplexField object(prediction.amplitude.shape(), Complex{1.0, 0.0});
    for (std::size_t i = 0; i < object.size(); ++i) {
        const double a = prediction.amplitude[i];
        if (!std::isfinite(a) || !std::isfinite(prediction.phase[i])) {
            throw Error(ErrorCode::DataError, "prediction contains non-finite values");
        }
        if (prediction.coverage[i] > 0.0 && a >= kTinyAmplitude) object[i] = std::polar(a, prediction.phase[i]);
    }
    return object;
}

// ---- commands ----

EpieRunSummary run_epie_command(const fs::path& dataset_dir, const PipelineConfig& cfg,
                                const std::optional<fs::path>& init_dir, const fs::path& out) {
    cfg.epie.validate();
    const Dataset ds = load_dataset(dataset_dir);

    std::optional<ComplexField> init;
    EpieRunSummary summary;
    summary.init_source = "cold";
    if (init_dir) {
        const StitchResult pred = read_prediction(*init_dir, cfg);
        if (pred.amplitude.shape() != ds.manifest.canvas) {
            throw Error(ErrorCode::ShapeMismatch, "prediction canvas does not match the dataset canvas");
        }
        init = warm_start_object(pred);
        summary.init_source = "stitched_prediction";
    }

    fs::create_directories(out);
    std::ostringstream history;
    std::vector<double> seconds;
    auto last = Clock::now();
    const auto start = last;
    const auto observer = [&](std::size_t k, double sse) {
        const auto now = Clock::now();
        seconds.push_back(std::chrono::duration<double>(now - last).count());
        last = now;
        history << Json{{"k", k}, {"sse", sse}}.dump() << '\n';
    };
    const EpieResult result = run_epie(ds.stack, ds.probe, cfg.epie, init, observer);
    summary.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    summary.median_iteration_seconds = median(seconds);
    summary.converged = result.converged;
    summary.iterations = result.state.iteration;
    summary.final_sse = result.state.sse_history.empty() ? 0.0 : result.state.sse_history.back();

    const Reconstruction rec = finalize(result.state, ds.stack.plan);
    io::write_npy(out / "recon_amplitude.npy", rec.amplitude);
    io::write_npy(out / "recon_phase.npy", rec.phase);
    io::write_npy(out / "recon_phase_wrapped.npy", rec.phase_wrapped);
    io::write_npy(out / "recon_object.npy", result.state.object);
    io::write_npy(out / "mask.npy", rec.mask);
    RealField re(result.state.probe.shape()), im(result.state.probe.shape());
    for (std::size_t i = 0; i < re.size(); ++i) {
        re[i] = result.state.probe[i].real();
        im[i] = result.state.probe[i].imag();
    }
    io::write_npy(out / "probe_real.npy", re);
    io::write_npy(out / "probe_imag.npy", im);
    write_previews(out, "recon", rec.amplitude, rec.phase_wrapped);

    io::Manifest m = ds.manifest;
    m.array_files = {{"recon_amplitude", "recon_amplitude.npy"}, {"recon_phase", "recon_phase.npy"},
                     {"recon_phase_wrapped", "recon_phase_wrapped.npy"}, {"recon_object", "recon_object.npy"},
                     {"mask", "mask.npy"}};
    // A refined probe no longer matches probe_params, so only the fixed probe is listed.
    if (!cfg.epie.update_probe) {
        m.array_files["probe_real"] = "probe_real.npy";
        m.array_files["probe_imag"] = "probe_imag.npy";
    } else {
        m.extra["refined_probe"] = {{"real", "probe_real.npy"}, {"imag", "probe_imag.npy"}};
    }
    io::save_manifest(out, m);

    io::write_text(out / "sse_history.jsonl", history.str());
    const Json s{{"converged", summary.converged},
                 {"iterations", summary.iterations},
                 {"final_sse", summary.final_sse},
                 {"init_source", summary.init_source},
                 {"clamped_negative_intensities", ds.clamped_negatives},
                 {"epie", epie_config_to_json(cfg.epie)}};
    io::write_text(out / "summary.json", s.dump(2) + "\n");
    const Json t{{"total_seconds", summary.total_seconds},
                 {"median_iteration_seconds", summary.median_iteration_seconds},
                 {"iteration_seconds", seconds}};
    io::write_text(out / "timing.json", t.dump(2) + "\n");
    return summary;
}

StitchResult run_stitch_command(const fs::path& patches_dir, const PipelineConfig& cfg, const fs::path& out) {
    const PatchSet set = read_patches(patches_dir);
    StitchConfig sc = cfg.stitch;
    if (!cfg.crop_margin_explicit && set.edge_smooth) sc.crop_margin = static_cast<std::size_t>(std::ceil(*set.edge_smooth));
    StitchResult result = stitch(set.patches, set.canvas, sc);
    write_prediction(out, result);
    write_previews(out, "pred", result.amplitude, result.phase);
    io::write_png(out / "coverage.png", io::to_gray(result.coverage, 0.0, 1.0));
    return result;
}

io::Json metrics_to_json(const MetricsReport& r) {
    return Json{{"amp_mae", r.amp_mae},         {"amp_nrmse", r.amp_nrmse},           {"phase_mae", r.phase_mae},
                {"phase_nrmse", r.phase_nrmse}, {"phase_offset", r.phase_offset.a}, {"pixel_count", r.pixel_count}};
}

MetricsReport run_metrics_command(const fs::path& recon_dir, const fs::path& dataset_dir, const fs::path& out) {
    const Dataset ds = load_dataset(dataset_dir);
    const Estimate est = load_estimate(recon_dir, PipelineConfig{});
    const auto& truth = ds.truth;
    if (est.amplitude.shape() != truth.mask.shape() || est.phase.shape() != truth.mask.shape()) {
        throw Error(ErrorCode::ShapeMismatch, "reconstruction and dataset canvases differ");
    }
    const MetricsReport rep = report(est.amplitude, est.phase, truth.amplitude, truth.phase, truth.mask);

    const auto [at, shape] = frc_window(truth.mask);
    RealField ea(shape), ta(shape), ep(shape), tp(shape);
    for (std::size_t r = 0; r < shape.rows; ++r) {
        for (std::size_t c = 0; c < shape.cols; ++c) {
            const std::size_t gr = r + at.row, gc = c + at.col;
            if (truth.mask(gr, gc) == 0.0) continue;
            ea(r, c) = est.amplitude(gr, gc);
            ta(r, c) = truth.amplitude(gr, gc);
            ep(r, c) = est.phase(gr, gc) - rep.phase_offset.a;
            tp(r, c) = truth.phase(gr, gc);
        }
    }
    const FrcCurve amp_frc = frc(ea, ta);
    const FrcCurve phase_frc = frc(ep, tp);

    fs::create_directories(out);
    Json j = metrics_to_json(rep);
    j["frc_amplitude_crossing"] = optional_number(amp_frc.crossing);
    j["frc_phase_crossing"] = optional_number(phase_frc.crossing);
    io::write_text(out / "metrics.json", j.dump(2) + "\n");
    write_frc_csv(out / "frc_amplitude.csv", amp_frc);
    write_frc_csv(out / "frc_phase.csv", phase_frc);
    io::write_png(out / "frc.png", io::render_line_plot({{amp_frc.frequencies, amp_frc.correlations, 0},
                                                          {phase_frc.frequencies, phase_frc.correlations, 140}},
                                                         -0.2, 1.05, kFrcThreshold));
    return rep;
}

std::string overlap_table(const Probe& probe, const std::vector<std::size_t>& offsets) {
    std::ostringstream os;
    os << "offset\toverlap_percent\n";
    char buf[64];
    for (auto d : offsets) {
        std::snprintf(buf, sizeof buf, "%zu\t%.2f\n", d, overlap_percent(d, probe));
        os << buf;
    }
    return os.str();
}

}  // namespace ptycho
