#include "placeboiv/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "placeboiv/error.hpp"

namespace placeboiv {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * length);
  constexpr char kDigits[] = "0123456789abcdef";
  for (unsigned int k = 0; k < length; ++k) {
    hex += kDigits[digest[k] >> 4];
    hex += kDigits[digest[k] & 0xF];
  }
  return hex;
}

std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    long long value = 0;
    const char* end = epoch + std::char_traits<char>::length(epoch);
    if (std::from_chars(epoch, end, value).ec == std::errc{}) t = static_cast<std::time_t>(value);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

RunManifest make_manifest(std::vector<std::string> command, nlohmann::json config,
                          std::uint64_t seed, bool seed_drawn) {
  RunManifest m;
  m.tool_version = PLACEBOIV_VERSION;
  m.command = std::move(command);
  m.config_digest = sha256_hex(config.dump());
  m.config = std::move(config);
  m.seed = seed;
  m.seed_drawn = seed_drawn;
  m.created = utc_timestamp();
  return m;
}

nlohmann::json to_json(const RunManifest& m) {
  return nlohmann::json{
      {"tool", "placeboiv"},
      {"tool_version", m.tool_version},
      {"command", m.command},
      {"config", m.config},
      {"config_sha256", m.config_digest},
      {"seed", m.seed},
      {"seed_drawn", m.seed_drawn},
      {"created", m.created},
      {"conventions",
       {{"p_value", "(1 + #{T_b >= T_obs}) / (B + 1)"},
        {"two_sided", "absolute value statistic"},
        {"ties", "count as extreme within relative 1e-9"},
        {"rejection", "p <= alpha"},
        {"covariance_divisor", "n"}}},
  };
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_json(manifest).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace placeboiv
