#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace placeboiv {

/// Everything needed to replay an output byte-for-byte.
struct RunManifest {
  std::string tool_version;
  /// argv without options that cannot change the output (--workers).
  std::vector<std::string> command;
  nlohmann::json config;
  /// SHA-256 of config.dump() (sorted keys, no whitespace).
  std::string config_digest;
  std::uint64_t seed = 0;
  bool seed_drawn = false;
  /// UTC ISO-8601. SOURCE_DATE_EPOCH, when set, replaces the clock.
  std::string created;
};

std::string sha256_hex(std::string_view data);
std::string utc_timestamp();

RunManifest make_manifest(std::vector<std::string> command, nlohmann::json config,
                          std::uint64_t seed, bool seed_drawn);
nlohmann::json to_json(const RunManifest& manifest);

/// Writes `to_json(manifest)` to `path` with two-space indentation. Throws IoError.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace placeboiv
