#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "ptycho/forward_model.hpp"

namespace ptycho::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kManifestName = "manifest.json";

/// Describes one dataset, prediction, or reconstruction directory.
/// `array_files` maps a role (e.g. "diffraction_stack", "true_phase") to a
/// path relative to the directory.
struct Manifest {
    std::string schema_version = kSchemaVersion;
    Shape canvas;
    std::size_t window = 0;
    ScanPlan plan;
    ProbeParams probe_params;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> array_files;
    Json extra = Json::object();
};

Json plan_to_json(const ScanPlan& plan);
ScanPlan plan_from_json(const Json& j);
Json probe_params_to_json(const ProbeParams& p);
ProbeParams probe_params_from_json(const Json& j, std::size_t window);

Json manifest_to_json(const Manifest& m);
/// Parses without touching the filesystem. Throws DataError on schema problems.
Manifest manifest_from_json(const Json& j);
std::string dump_manifest(const Manifest& m);

void save_manifest(const std::filesystem::path& dir, const Manifest& m);

/// Parses dir/manifest.json, then checks every referenced array exists and
/// that its NPY shape agrees with the canvas, window, and plan.
Manifest load_manifest(const std::filesystem::path& dir);

/// Reads and parses a JSON file. Throws InvalidConfig on parse errors.
Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ptycho::io
