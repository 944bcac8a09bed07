#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "placeboiv/harness.hpp"
#include "placeboiv/simulator.hpp"

namespace placeboiv {

using Json = nlohmann::json;

/// Reads and parses a JSON document. Throws IoError or ParseError.
Json load_json_file(const std::filesystem::path& path);

/// {"blinded": bool, "confounded": bool, "psi_null": bool, "beta_null": bool,
///  "extended_mediator": bool}; every key optional with ScenarioConfig defaults.
ScenarioConfig scenario_from_json(const Json& j, const std::string& pointer = "/scenario");
Json to_json(const ScenarioConfig& scenario);

/// {"n": int, "fill": number, "theta_XZ": number, ...}. "fill" sets every
/// coefficient the scenario leaves free; unnamed pinned coefficients stay 0.
/// The result is checked against the scenario.
ParameterPoint point_from_json(const Json& j, const ScenarioConfig& scenario,
                               const std::string& pointer = "/point");
Json to_json(const ParameterPoint& point);

struct SimulationConfig {
  ScenarioConfig scenario;
  ParameterPoint point;
};

/// {"scenario": {...}, "point": {...}}
SimulationConfig simulation_from_json(const Json& j);
Json to_json(const SimulationConfig& config);

enum class StudyKind { curves, consistency, coverage };

struct PlanDocument {
  StudyKind study = StudyKind::curves;
  std::string name = "experiment";
  ExperimentPlan curves;
  ConsistencyOptions consistency;
  CoverageOptions coverage;
  /// Whether the document carried "seed".
  bool has_seed = false;

  std::uint64_t seed() const noexcept;
  void set_seed(std::uint64_t seed) noexcept;
};

/// Plan documents select a study with "study" (default "curves"). Unknown
/// keys and type mismatches raise ConfigError with a JSON pointer.
PlanDocument plan_from_json(const Json& j);
Json to_json(const PlanDocument& plan);

/// The sixteen blinded x confounded x psi x beta experiments: 1000 design
/// points, B = 999, seeds derived from `seed`.
std::vector<PlanDocument> paper_suite(std::uint64_t seed);

}  // namespace placeboiv
