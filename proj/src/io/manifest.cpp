#include "ptycho/io/manifest.hpp"

#include <fstream>
#include <sstream>

#include "ptycho/io/npy.hpp"

namespace ptycho::io {
namespace {

template <class T>
T field(const Json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::DataError, std::string("manifest is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::DataError, std::string("manifest field '") + key + "': " + e.what());
    }
}

void expect_shape(const std::string& role, const std::filesystem::path& path, const std::vector<std::size_t>& expected) {
    const auto header = read_npy_header(path);
    if (header.shape != expected) {
        std::ostringstream os;
        os << role << " (" << path.filename().string() << ") has shape (";
        for (auto d : header.shape) os << d << ' ';
        os << ") but the manifest implies (";
        for (auto d : expected) os << d << ' ';
        os << ')';
        throw Error(ErrorCode::ShapeMismatch, os.str());
    }
}

}  // namespace

Json plan_to_json(const ScanPlan& plan) {
    Json j;
    j["kind"] = plan.kind;
    if (plan.grid) {
        j["grid"] = {{"rows", plan.grid->rows}, {"cols", plan.grid->cols}, {"offset", plan.grid->offset}};
    }
    j["window"] = plan.window;
    j["canvas_height"] = plan.canvas.rows;
    j["canvas_width"] = plan.canvas.cols;
    Json positions = Json::array();
    for (const auto& p : plan.positions) positions.push_back({p.row, p.col});
    j["positions"] = std::move(positions);
    return j;
}

ScanPlan plan_from_json(const Json& j) {
    ScanPlan plan;
    plan.kind = field<std::string>(j, "kind");
    plan.window = field<std::size_t>(j, "window");
    plan.canvas = {field<std::size_t>(j, "canvas_height"), field<std::size_t>(j, "canvas_width")};
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        plan.grid = GridLayout{field<std::size_t>(g, "rows"), field<std::size_t>(g, "cols"), field<std::size_t>(g, "offset")};
    }
    for (const auto& p : field<Json>(j, "positions")) {
        if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::DataError, "scan positions must be [row, col] pairs");
        plan.positions.push_back({p[0].get<int>(), p[1].get<int>()});
    }
    if (plan.positions.empty()) throw Error(ErrorCode::DataError, "scan plan has no positions");
    plan.validate();
    return plan;
}

Json probe_params_to_json(const ProbeParams& p) {
    return Json{{"radius", p.radius}, {"edge_smooth", p.edge_smooth}, {"phase_curvature", p.phase_curvature}};
}

ProbeParams probe_params_from_json(const Json& j, std::size_t window) {
    return {window, field<double>(j, "radius"), field<double>(j, "edge_smooth"), field<double>(j, "phase_curvature")};
}

Json manifest_to_json(const Manifest& m) {
    Json j;
    j["schema_version"] = m.schema_version;
    j["canvas"] = {{"height", m.canvas.rows}, {"width", m.canvas.cols}};
    j["window"] = m.window;
    j["plan"] = plan_to_json(m.plan);
    j["probe_params"] = probe_params_to_json(m.probe_params);
    j["seed"] = m.seed;
    Json files = Json::object();
    for (const auto& [role, path] : m.array_files) files[role] = path;
    j["array_files"] = std::move(files);
    j["extra"] = m.extra;
    return j;
}

Manifest manifest_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::DataError, "manifest must be a JSON object");
    Manifest m;
    m.schema_version = field<std::string>(j, "schema_version");
    if (m.schema_version != kSchemaVersion) {
        throw Error(ErrorCode::DataError, "unsupported manifest schema_version '" + m.schema_version + "'");
    }
    const auto canvas = field<Json>(j, "canvas");
    m.canvas = {field<std::size_t>(canvas, "height"), field<std::size_t>(canvas, "width")};
    m.window = field<std::size_t>(j, "window");
    m.plan = plan_from_json(field<Json>(j, "plan"));
    m.probe_params = probe_params_from_json(field<Json>(j, "probe_params"), m.window);
    m.seed = field<std::uint64_t>(j, "seed");
    const auto files = field<Json>(j, "array_files");
    if (!files.is_object()) throw Error(ErrorCode::DataError, "manifest array_files must be an object");
    for (const auto& [role, path] : files.items()) {
        if (!path.is_string()) throw Error(ErrorCode::DataError, "array_files entry '" + role + "' must be a path");
        m.array_files[role] = path.get<std::string>();
    }
    if (j.contains("extra")) m.extra = j.at("extra");
    if (m.plan.canvas != m.canvas || m.plan.window != m.window) {
        throw Error(ErrorCode::ShapeMismatch, "manifest canvas/window disagree with its scan plan");
    }
    return m;
}

std::string dump_manifest(const Manifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

void save_manifest(const std::filesystem::path& dir, const Manifest& m) {
    std::filesystem::create_directories(dir);
    write_text(dir / kManifestName, dump_manifest(m));
}

Manifest load_manifest(const std::filesystem::path& dir) {
    Manifest m;
    try {
        m = manifest_from_json(read_json(dir / kManifestName));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidConfig) throw Error(ErrorCode::DataError, e.what());
        throw;
    }
    const std::vector<std::size_t> canvas{m.canvas.rows, m.canvas.cols};
    const std::vector<std::size_t> window{m.window, m.window};
    for (const auto& [role, rel] : m.array_files) {
        const auto path = dir / rel;
        if (!std::filesystem::exists(path)) {
            throw Error(ErrorCode::IoError, "array file for role '" + role + "' is missing: " + path.string());
        }
        if (role == "diffraction_stack") {
            expect_shape(role, path, {m.plan.positions.size(), m.window, m.window});
        } else if (role == "probe_real" || role == "probe_imag") {
            expect_shape(role, path, window);
        } else if (role.ends_with("amplitude") || role.ends_with("phase") || role == "mask" || role == "coverage" ||
                   role == "recon_object") {
            expect_shape(role, path, canvas);
        } else {
            read_npy_header(path);
        }
    }
    return m;
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace ptycho::io
