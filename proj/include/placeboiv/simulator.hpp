#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include "placeboiv/trial_data.hpp"

namespace placeboiv {

struct ScenarioConfig {
  bool blinded = false;
  bool confounded = true;
  bool psi_null = false;
  bool beta_null = false;
  /// Adds the second mediator A with its instrument W.
  bool extended_mediator = false;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Structural coefficients of the simulation model. All intercepts are 0.
///
///   X = 1{XZ Z + XU U + XC1 C1 + XC2 C2 + XC3 C3 [+ XC4 C4] + eX > 0}
///   E = 1{EX X + EC1 C1 + EL1 L1 + EV2 V2 + EL3 L3 + eE > 0}
///   D = 1{DQ Q + DV1 V1 + DC2 C2 + DL2 L2 + DL3 L3 + eD > 0}
///   I = E D
///   M = ME E + MD D + MI I + ML1 L1 + ML2 L2 + MC3 C3 + MV3 V3 + eM
///  [A = AW W + AX X + AC4 C4 + AV4 V4 + eA]
///   Y = YX X + YM M + YU U + YV1 V1 + YV2 V2 + YV3 V3 [+ kappa A + YV4 V4] + eY
///
/// Z, Q, W ~ Bernoulli(1/2); confounders and errors ~ Normal(0, 1).
struct ParameterPoint {
  std::size_t n = 300;

  double theta_XZ = 0, theta_DQ = 0, theta_ME = 0, theta_MD = 0, theta_MI = 0;
  double theta_EX = 0;
  double theta_YX = 0;  // beta
  double theta_YM = 0;  // psi

  double theta_XU = 0, theta_XC1 = 0, theta_XC2 = 0, theta_XC3 = 0;
  double theta_EC1 = 0, theta_EL1 = 0, theta_EV2 = 0, theta_EL3 = 0;
  double theta_DV1 = 0, theta_DC2 = 0, theta_DL2 = 0, theta_DL3 = 0;
  double theta_ML1 = 0, theta_ML2 = 0, theta_MC3 = 0, theta_MV3 = 0;
  double theta_YU = 0, theta_YV1 = 0, theta_YV2 = 0, theta_YV3 = 0;

  double theta_AW = 0, theta_AX = 0, kappa = 0;
  double theta_XC4 = 0, theta_AC4 = 0, theta_AV4 = 0, theta_YV4 = 0;

  bool operator==(const ParameterPoint&) const = default;
};

enum class ParameterRole {
  instrument_strength,  // [1, 2]
  expectation_link,     // theta_EX: [1, 2], 0 when blinded
  treatment_effect,     // beta: [-2, 2], 0 under the beta null
  placebo_effect,       // psi: [-2, 2], 0 under the psi null
  confounder,           // [-2, 2], 0 when unconfounded
  extended_strength,    // theta_AW: [1, 2]
  extended_link,        // theta_AX: [1, 2], 0 when blinded
  extended_effect,      // kappa: [-2, 2]
  extended_confounder,  // [-2, 2], 0 when unconfounded
};

struct ParameterInfo {
  std::string_view name;
  double ParameterPoint::*member;
  ParameterRole role;
};

/// Every coefficient of ParameterPoint in a fixed order.
std::span<const ParameterInfo> parameter_table() noexcept;
const ParameterInfo* find_parameter(std::string_view name) noexcept;

/// Sampling range of a role under a scenario; nullopt when the scenario pins it to 0.
std::optional<std::pair<double, double>> free_range(ParameterRole role,
                                                    const ScenarioConfig& config) noexcept;

/// Throws ConstraintViolation (pointer "/point/<name>") when a coefficient the
/// scenario pins to 0 is nonzero, when a coefficient is not finite, or when
/// n < 4.
void check_constraints(const ScenarioConfig& config, const ParameterPoint& point);

/// Every coefficient 1, extended ones only when the scenario is extended,
/// then zeroed wherever the scenario demands.
ParameterPoint unit_point(const ScenarioConfig& config, std::size_t n);

/// Stream layout: variable v of dataset d reads CounterRng(master_seed, d << 32 | v).
struct RngSeedPlan {
  std::uint64_t master_seed = 0;
  std::uint64_t dataset_index = 0;

  enum Variable : std::uint32_t {
    z = 0, q, w, u, c1, c2, c3, c4, v1, v2, v3, v4, l1, l2, l3,
    eps_x, eps_e, eps_d, eps_m, eps_y, eps_a,
  };

  std::uint64_t stream(Variable v) const noexcept { return dataset_index << 32 | v; }
};

/// Pure function of (config, point, seeds). Extended scenarios also fill a and w.
TrialDataset generate(const ScenarioConfig& config, const ParameterPoint& point,
                      const RngSeedPlan& seeds);
TrialDataset generate(const ScenarioConfig& config, const ParameterPoint& point,
                      std::uint64_t seed);

/// As generate, but requires config.extended_mediator.
TrialDataset generate_extended(const ScenarioConfig& config, const ParameterPoint& point,
                               const RngSeedPlan& seeds);

struct TrueEffects {
  double psi = 0.0;
  double beta = 0.0;
  double kappa = 0.0;
};

TrueEffects oracle_effects(const ParameterPoint& point) noexcept;

}  // namespace placeboiv
