#include <algorithm>
#include <cmath>
#include <set>

#include "ptycho/pipeline.hpp"

namespace ptycho {
namespace {

using io::Json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

void check_keys(const Json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) bad(std::string("config section '") + section + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!ok.contains(key)) bad(std::string("unknown key '") + key + "' in config section '" + section + "'");
    }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        bad(std::string("config key '") + key + "' has the wrong type");
    }
}

// JSON integers may be negative; reject those rather than wrap around.
void read_count(const Json& j, const char* key, std::size_t& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad(std::string("config key '") + key + "' must be a non-negative integer");
    out = v.get<std::size_t>();
}

void read_seed(const Json& j, const char* key, std::uint64_t& out) {
    std::size_t v = out;
    read_count(j, key, v);
    out = v;
}

std::vector<std::size_t> read_counts(const Json& j, const char* key) {
    if (!j.at(key).is_array()) bad(std::string("config key '") + key + "' must be a list");
    std::vector<std::size_t> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad(std::string("entries of '") + key + "' must be non-negative integers");
        out.push_back(v.get<std::size_t>());
    }
    if (out.empty()) bad(std::string("config key '") + key + "' must not be empty");
    return out;
}

void parse_simulate(const Json& j, SimulateConfig& cfg) {
    check_keys(j, "simulate", {"seed", "phantom", "window", "probe", "plan"});
    read_seed(j, "seed", cfg.seed);
    if (j.contains("phantom")) {
        std::string name;
        read(j, "phantom", name);
        cfg.phantom = parse_phantom_kind(name);
    }
    std::size_t window = cfg.probe.window;
    read_count(j, "window", window);
    if (window == 0) bad("simulate.window must be >= 1");
    if (window != cfg.probe.window) {
        // Keep the calibrated geometry unless the probe section says otherwise.
        const double scale = static_cast<double>(window) / kDefaultWindow;
        cfg.probe = {window, kDefaultRadius * scale, kDefaultEdgeSmooth * scale, kDefaultPhaseCurvature};
    }
    if (j.contains("probe")) {
        const auto& p = j.at("probe");
        check_keys(p, "simulate.probe", {"radius", "edge_smooth", "phase_curvature"});
        read(p, "radius", cfg.probe.radius);
        read(p, "edge_smooth", cfg.probe.edge_smooth);
        read(p, "phase_curvature", cfg.probe.phase_curvature);
    }
    if (j.contains("plan")) {
        const auto& p = j.at("plan");
        check_keys(p, "simulate.plan", {"kind", "rows", "cols", "offset"});
        read(p, "kind", cfg.plan.kind);
        read_count(p, "rows", cfg.plan.rows);
        read_count(p, "cols", cfg.plan.cols);
        read_count(p, "offset", cfg.plan.offset);
    }
}

void parse_epie(const Json& j, EpieConfig& cfg) {
    check_keys(j, "epie", {"alpha", "beta", "max_iterations", "sse_rel_tol", "sse_abs_tol", "update_probe", "scan_order",
                           "shuffle_seed"});
    read(j, "alpha", cfg.alpha);
    read(j, "beta", cfg.beta);
    read_count(j, "max_iterations", cfg.max_iterations);
    read(j, "sse_rel_tol", cfg.sse_rel_tol);
    read(j, "sse_abs_tol", cfg.sse_abs_tol);
    read(j, "update_probe", cfg.update_probe);
    if (j.contains("scan_order")) {
        std::string order;
        read(j, "scan_order", order);
        if (order == "sequential") {
            cfg.scan_order = ScanOrder::Sequential;
        } else if (order == "shuffled") {
            cfg.scan_order = ScanOrder::Shuffled;
        } else {
            bad("epie.scan_order must be 'sequential' or 'shuffled'");
        }
    }
    read_seed(j, "shuffle_seed", cfg.shuffle_seed);
}

void parse_stitch(const Json& j, PipelineConfig& cfg) {
    check_keys(j, "stitch", {"crop_margin", "taper_width"});
    if (j.contains("crop_margin")) {
        read_count(j, "crop_margin", cfg.stitch.crop_margin);
        cfg.crop_margin_explicit = true;
    }
    if (j.contains("taper_width")) {
        const auto& t = j.at("taper_width");
        if (t.is_null() || (t.is_string() && t.get<std::string>() == "auto")) {
            cfg.stitch.taper_width.reset();
        } else {
            std::size_t width = 0;
            read_count(j, "taper_width", width);
            cfg.stitch.taper_width = width;
        }
    }
}

void parse_sweep(const Json& j, SweepConfig& cfg) {
    check_keys(j, "sweep", {"offsets", "methods", "seeds", "rows", "cols", "prediction"});
    if (j.contains("offsets")) cfg.offsets = read_counts(j, "offsets");
    if (j.contains("seeds")) {
        cfg.seeds.clear();
        for (auto s : read_counts(j, "seeds")) cfg.seeds.push_back(s);
    }
    if (j.contains("methods")) {
        std::vector<std::string> names;
        read(j, "methods", names);
        if (names.empty()) bad("sweep.methods must not be empty");
        cfg.methods.clear();
        for (const auto& n : names) cfg.methods.push_back(parse_method(n));
    }
    read_count(j, "rows", cfg.rows);
    read_count(j, "cols", cfg.cols);
    if (cfg.rows == 0 || cfg.cols == 0) bad("sweep.rows and sweep.cols must be >= 1");
    if (j.contains("prediction")) {
        const auto& p = j.at("prediction");
        check_keys(p, "sweep.prediction", {"phase_nrmse", "amp_nrmse", "noise_sigma"});
        read(p, "phase_nrmse", cfg.prediction.phase_nrmse);
        read(p, "amp_nrmse", cfg.prediction.amp_nrmse);
        read(p, "noise_sigma", cfg.prediction.noise_sigma);
        if (!(cfg.prediction.phase_nrmse >= 0) || !(cfg.prediction.amp_nrmse >= 0) || !(cfg.prediction.noise_sigma > 0)) {
            bad("sweep.prediction values must be non-negative (noise_sigma positive)");
        }
    }
}

}  // namespace

Method parse_method(std::string_view name) {
    if (name == "epie") return Method::Epie;
    if (name == "epf") return Method::Epf;
    if (name == "stitched-only") return Method::StitchedOnly;
    throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(name) + "' (epie, epf, stitched-only)");
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Epie: return "epie";
        case Method::Epf: return "epf";
        case Method::StitchedOnly: return "stitched-only";
    }
    return "?";
}

StitchConfig PipelineConfig::stitch_for(const ProbeParams& probe) const {
    StitchConfig out = stitch;
    if (!crop_margin_explicit) out.crop_margin = static_cast<std::size_t>(std::ceil(probe.edge_smooth));
    return out;
}

PipelineConfig parse_config(const io::Json& j) {
    PipelineConfig cfg;
    check_keys(j, "<root>", {"simulate", "epie", "stitch", "sweep"});
    if (j.contains("simulate")) parse_simulate(j.at("simulate"), cfg.simulate);
    if (j.contains("epie")) parse_epie(j.at("epie"), cfg.epie);
    if (j.contains("stitch")) parse_stitch(j.at("stitch"), cfg);
    if (j.contains("sweep")) parse_sweep(j.at("sweep"), cfg.sweep);

    cfg.epie.validate();
    cfg.stitch.validate();
    // Geometry problems surface here rather than halfway through a command.
    try {
        make_disc_probe(cfg.simulate.probe.window, cfg.simulate.probe.radius, cfg.simulate.probe.edge_smooth,
                        cfg.simulate.probe.phase_curvature);
        make_plan(cfg.simulate.plan, cfg.simulate.probe.window, cfg.simulate.seed);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidConfig) throw;
        bad(std::string("simulate: ") + e.what());
    }
    return cfg;
}

PipelineConfig load_config(const std::optional<fs::path>& path) {
    if (!path) return parse_config(io::Json::object());
    if (!fs::exists(*path)) bad("config file not found: " + path->string());
    return parse_config(io::read_json(*path));
}

io::Json epie_config_to_json(const EpieConfig& cfg) {
    return io::Json{{"alpha", cfg.alpha},
                    {"beta", cfg.beta},
                    {"max_iterations", cfg.max_iterations},
                    {"sse_rel_tol", cfg.sse_rel_tol},
                    {"sse_abs_tol", cfg.sse_abs_tol},
                    {"update_probe", cfg.update_probe},
                    {"scan_order", cfg.scan_order == ScanOrder::Sequential ? "sequential" : "shuffled"},
                    {"shuffle_seed", cfg.shuffle_seed}};
}

ScanPlan make_plan(const PlanSpec& spec, std::size_t window, std::uint64_t seed) {
    if (spec.kind == "grid") return make_grid_plan(spec.rows, spec.cols, spec.offset, window);
    return make_alt_plan(parse_alt_layout(spec.kind), window, seed);
}

}  // namespace ptycho
