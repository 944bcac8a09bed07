#include "placeboiv/simulator.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "placeboiv/error.hpp"
#include "placeboiv/rng.hpp"

namespace placeboiv {

namespace {

using P = ParameterPoint;
using R = ParameterRole;

constexpr std::array<ParameterInfo, 35> kParameters{{
    {"theta_XZ", &P::theta_XZ, R::instrument_strength},
    {"theta_DQ", &P::theta_DQ, R::instrument_strength},
    {"theta_ME", &P::theta_ME, R::instrument_strength},
    {"theta_MD", &P::theta_MD, R::instrument_strength},
    {"theta_MI", &P::theta_MI, R::instrument_strength},
    {"theta_EX", &P::theta_EX, R::expectation_link},
    {"theta_YX", &P::theta_YX, R::treatment_effect},
    {"theta_YM", &P::theta_YM, R::placebo_effect},
    {"theta_XU", &P::theta_XU, R::confounder},
    {"theta_XC1", &P::theta_XC1, R::confounder},
    {"theta_XC2", &P::theta_XC2, R::confounder},
    {"theta_XC3", &P::theta_XC3, R::confounder},
    {"theta_EC1", &P::theta_EC1, R::confounder},
    {"theta_EL1", &P::theta_EL1, R::confounder},
    {"theta_EV2", &P::theta_EV2, R::confounder},
    {"theta_EL3", &P::theta_EL3, R::confounder},
    {"theta_DV1", &P::theta_DV1, R::confounder},
    {"theta_DC2", &P::theta_DC2, R::confounder},
    {"theta_DL2", &P::theta_DL2, R::confounder},
    {"theta_DL3", &P::theta_DL3, R::confounder},
    {"theta_ML1", &P::theta_ML1, R::confounder},
    {"theta_ML2", &P::theta_ML2, R::confounder},
    {"theta_MC3", &P::theta_MC3, R::confounder},
    {"theta_MV3", &P::theta_MV3, R::confounder},
    {"theta_YU", &P::theta_YU, R::confounder},
    {"theta_YV1", &P::theta_YV1, R::confounder},
    {"theta_YV2", &P::theta_YV2, R::confounder},
    {"theta_YV3", &P::theta_YV3, R::confounder},
    {"theta_AW", &P::theta_AW, R::extended_strength},
    {"theta_AX", &P::theta_AX, R::extended_link},
    {"kappa", &P::kappa, R::extended_effect},
    {"theta_XC4", &P::theta_XC4, R::extended_confounder},
    {"theta_AC4", &P::theta_AC4, R::extended_confounder},
    {"theta_AV4", &P::theta_AV4, R::extended_confounder},
    {"theta_YV4", &P::theta_YV4, R::extended_confounder},
}};

std::vector<double> draw_normal(const RngSeedPlan& seeds, RngSeedPlan::Variable v, std::size_t n) {
  CounterRng rng(seeds.master_seed, seeds.stream(v));
  std::vector<double> out(n);
  for (auto& x : out) x = rng.normal();
  return out;
}

std::vector<double> draw_coin(const RngSeedPlan& seeds, RngSeedPlan::Variable v, std::size_t n) {
  CounterRng rng(seeds.master_seed, seeds.stream(v));
  std::vector<double> out(n);
  for (auto& x : out) x = rng.bernoulli_half();
  return out;
}

TrialDataset simulate(const ScenarioConfig& config, const ParameterPoint& p,
                      const RngSeedPlan& seeds) {
  check_constraints(config, p);
  const std::size_t n = p.n;
  using V = RngSeedPlan;

  const auto z = draw_coin(seeds, V::z, n), q = draw_coin(seeds, V::q, n);
  const auto u = draw_normal(seeds, V::u, n);
  const auto c1 = draw_normal(seeds, V::c1, n), c2 = draw_normal(seeds, V::c2, n),
             c3 = draw_normal(seeds, V::c3, n);
  const auto v1 = draw_normal(seeds, V::v1, n), v2 = draw_normal(seeds, V::v2, n),
             v3 = draw_normal(seeds, V::v3, n);
  const auto l1 = draw_normal(seeds, V::l1, n), l2 = draw_normal(seeds, V::l2, n),
             l3 = draw_normal(seeds, V::l3, n);
  const auto ex = draw_normal(seeds, V::eps_x, n), ee = draw_normal(seeds, V::eps_e, n),
             ed = draw_normal(seeds, V::eps_d, n), em = draw_normal(seeds, V::eps_m, n),
             ey = draw_normal(seeds, V::eps_y, n);

  const bool extended = config.extended_mediator;
  std::vector<double> w, c4, v4, ea;
  if (extended) {
    w = draw_coin(seeds, V::w, n);
    c4 = draw_normal(seeds, V::c4, n);
    v4 = draw_normal(seeds, V::v4, n);
    ea = draw_normal(seeds, V::eps_a, n);
  }

  TrialDataset ds;
  ds.z = z;
  ds.q = q;
  for (auto* col : {&ds.x, &ds.e, &ds.d, &ds.i, &ds.m, &ds.y}) col->resize(n);
  std::vector<double> a(extended ? n : 0);

  for (std::size_t k = 0; k < n; ++k) {
    double sx = p.theta_XZ * z[k] + p.theta_XU * u[k] + p.theta_XC1 * c1[k] +
                p.theta_XC2 * c2[k] + p.theta_XC3 * c3[k] + ex[k];
    if (extended) sx += p.theta_XC4 * c4[k];
    const double x = sx > 0 ? 1.0 : 0.0;

    const double se = p.theta_EX * x + p.theta_EC1 * c1[k] + p.theta_EL1 * l1[k] +
                      p.theta_EV2 * v2[k] + p.theta_EL3 * l3[k] + ee[k];
    const double e = se > 0 ? 1.0 : 0.0;

    const double sd = p.theta_DQ * q[k] + p.theta_DV1 * v1[k] + p.theta_DC2 * c2[k] +
                      p.theta_DL2 * l2[k] + p.theta_DL3 * l3[k] + ed[k];
    const double d = sd > 0 ? 1.0 : 0.0;
    const double i = e * d;

    const double m = p.theta_ME * e + p.theta_MD * d + p.theta_MI * i + p.theta_ML1 * l1[k] +
                     p.theta_ML2 * l2[k] + p.theta_MC3 * c3[k] + p.theta_MV3 * v3[k] + em[k];

    double y = p.theta_YX * x + p.theta_YM * m + p.theta_YU * u[k] + p.theta_YV1 * v1[k] +
               p.theta_YV2 * v2[k] + p.theta_YV3 * v3[k] + ey[k];
    if (extended) {
      a[k] = p.theta_AW * w[k] + p.theta_AX * x + p.theta_AC4 * c4[k] + p.theta_AV4 * v4[k] + ea[k];
      y += p.kappa * a[k] + p.theta_YV4 * v4[k];
    }

    ds.x[k] = x;
    ds.e[k] = e;
    ds.d[k] = d;
    ds.i[k] = i;
    ds.m[k] = m;
    ds.y[k] = y;
  }
  if (extended) {
    ds.a = std::move(a);
    ds.w = std::move(w);
  }
  return ds;
}

}  // namespace

std::span<const ParameterInfo> parameter_table() noexcept { return kParameters; }

const ParameterInfo* find_parameter(std::string_view name) noexcept {
  for (const auto& info : kParameters) {
    if (info.name == name) return &info;
  }
  return nullptr;
}

std::optional<std::pair<double, double>> free_range(ParameterRole role,
                                                    const ScenarioConfig& c) noexcept {
  using Range = std::pair<double, double>;
  constexpr Range strength{1.0, 2.0}, loading{-2.0, 2.0};
  switch (role) {
    case R::instrument_strength: return strength;
    case R::expectation_link: return c.blinded ? std::nullopt : std::optional(strength);
    case R::treatment_effect: return c.beta_null ? std::nullopt : std::optional(loading);
    case R::placebo_effect: return c.psi_null ? std::nullopt : std::optional(loading);
    case R::confounder: return c.confounded ? std::optional(loading) : std::nullopt;
    case R::extended_strength:
      return c.extended_mediator ? std::optional(strength) : std::nullopt;
    case R::extended_link:
      return c.extended_mediator && !c.blinded ? std::optional(strength) : std::nullopt;
    case R::extended_effect:
      return c.extended_mediator ? std::optional(loading) : std::nullopt;
    case R::extended_confounder:
      return c.extended_mediator && c.confounded ? std::optional(loading) : std::nullopt;
  }
  return std::nullopt;
}

void check_constraints(const ScenarioConfig& config, const ParameterPoint& point) {
  if (point.n < kMinParticipants) {
    throw ConstraintViolation("/point/n", "n must be at least " + std::to_string(kMinParticipants));
  }
  for (const auto& info : kParameters) {
    const double value = point.*info.member;
    const std::string pointer = "/point/" + std::string(info.name);
    if (!std::isfinite(value)) throw ConstraintViolation(pointer, "value is not finite");
    if (value != 0.0 && !free_range(info.role, config)) {
      throw ConstraintViolation(pointer, "must be 0 under this scenario");
    }
  }
}

ParameterPoint unit_point(const ScenarioConfig& config, std::size_t n) {
  ParameterPoint p;
  p.n = n;
  for (const auto& info : kParameters) {
    p.*info.member = free_range(info.role, config) ? 1.0 : 0.0;
  }
  return p;
}

TrialDataset generate(const ScenarioConfig& config, const ParameterPoint& point,
                      const RngSeedPlan& seeds) {
  return simulate(config, point, seeds);
}

TrialDataset generate(const ScenarioConfig& config, const ParameterPoint& point,
                      std::uint64_t seed) {
  return simulate(config, point, RngSeedPlan{seed, 0});
}

TrialDataset generate_extended(const ScenarioConfig& config, const ParameterPoint& point,
                               const RngSeedPlan& seeds) {
  if (!config.extended_mediator) {
    throw ConstraintViolation("/scenario/extended_mediator", "extended generation needs true");
  }
  return simulate(config, point, seeds);
}

TrueEffects oracle_effects(const ParameterPoint& point) noexcept {
  return {point.theta_YM, point.theta_YX, point.kappa};
}

}  // namespace placeboiv
