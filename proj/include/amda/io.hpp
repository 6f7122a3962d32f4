#pragma once

// File formats: facility CSV, `key = value` configuration files and run
// manifests with SHA-256 digests.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amda/pipeline.hpp"
#include "amda/sim_core.hpp"

namespace amda::io {

/// Fixed column order of the facility CSV. Timestamps are ISO 8601
/// (`YYYY-MM-DDTHH:MM:SS`); power columns are watts, producers negative.
inline constexpr std::array<std::string_view, 10> kCsvColumns{
    "timestamp", "temperature_K", "diffuse_Wm2", "direct_Wm2", "aggregate_W",
    "evse_W",    "pv_W",          "cs_W",        "chp_W",      "ba_W"};

struct CsvReadOptions {
  /// Strict: violations of sign discipline or the aggregate identity throw
  /// DataError. Otherwise they are reported through `warnings`.
  bool strict = true;
  double aggregate_tolerance = 1e-6;  // relative to sum_i |x_i| (at least 1 W)
};

/// Writes the dataset with shortest round-trip number formatting.
void write_facility_csv(const sim::FacilityDataset& ds, const std::filesystem::path& path);

/// Reads and validates a facility CSV. The dataset id is the file stem.
/// Throws DataError for schema mismatches (naming the column), malformed
/// numbers, a non-uniform grid, or (strict mode) invariant violations.
sim::FacilityDataset read_facility_csv(const std::filesystem::path& path, const CsvReadOptions& opts = {},
                                       std::vector<std::string>* warnings = nullptr);

/// Sign and aggregate-identity violations of a dataset, one message each
/// (at most `limit`).
std::vector<std::string> check_invariants(const sim::FacilityDataset& ds, double aggregate_tolerance = 1e-6,
                                          std::size_t limit = 10);

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

/// Grammar: one `key = value` per line; `#` starts a comment; blank lines
/// are ignored; keys are `[A-Za-z0-9_.-]+`; duplicate keys are an error.
/// Throws ConfigError citing `source` and the line number.
std::vector<ConfigEntry> parse_config(std::string_view text, std::string_view source = "<config>");
std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path);
/// Inverse of parse_config for canonical settings.
std::string format_config(const std::vector<std::pair<std::string, std::string>>& settings);

/// Facility configuration as canonical `key = value` settings. An optional
/// `preset` key selects the starting point; other keys override fields.
std::vector<std::pair<std::string, std::string>> facility_settings(const sim::FacilityConfig& cfg);
void set_facility_field(sim::FacilityConfig& cfg, const std::string& key, const std::string& value);
sim::FacilityConfig facility_config_from(const std::vector<ConfigEntry>& entries);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string path;  // as given (inputs) or relative to the manifest directory (outputs)
  std::string sha256;
};

struct RunManifest {
  std::string tool_version;
  std::vector<std::string> command_line;
  std::string config_digest;  // SHA-256 of the canonical settings text
  std::vector<std::uint64_t> seeds;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  /// Wall-clock lives in this file (relative path), outside the digests.
  std::string timing_file;
};

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kToolVersion = "amda 1.0.0";

/// Digests `outputs` (paths under `dir`) and writes dir/manifest.json.
std::filesystem::path write_manifest(RunManifest manifest, const std::filesystem::path& dir,
                                     const std::vector<std::filesystem::path>& outputs);
RunManifest read_manifest(const std::filesystem::path& path);
/// Paths whose current digest differs from the manifest (missing files included).
std::vector<std::string> verify_manifest(const std::filesystem::path& path);

/// Flat little-endian layout of a windowed dataset: the 8-byte magic
/// "AMDAWIN1", uint64 count, window_len, stride and center_index, then
/// count x window_len float32 inputs (row-major) and count float32 targets.
inline constexpr std::string_view kWindowMagic = "AMDAWIN1";
void write_windows(const pipeline::WindowedDataset& ds, const std::filesystem::path& path);
/// Centers are rebuilt as k * stride + center_index; timestamps are not stored.
pipeline::WindowedDataset read_windows(const std::filesystem::path& path);

/// Whole-file read; throws DataError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace amda::io
