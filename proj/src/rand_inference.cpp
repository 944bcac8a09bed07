#include "placeboiv/rand_inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "placeboiv/error.hpp"
#include "placeboiv/stats.hpp"

namespace placeboiv {

namespace {

// Group-mean difference with precomputed arm sizes.
double mean_difference(std::span<const double> arm, std::span<const double> response, double n1,
                       double n0) {
  double sum1 = 0.0, sum0 = 0.0;
  for (std::size_t k = 0; k < arm.size(); ++k) {
    if (arm[k] != 0.0) {
      sum1 += response[k];
    } else {
      sum0 += response[k];
    }
  }
  return sum1 / n1 - sum0 / n0;
}

std::pair<double, double> arm_sizes(std::span<const double> arm) {
  double n1 = 0.0;
  for (double a : arm) n1 += a != 0.0 ? 1.0 : 0.0;
  const double n0 = static_cast<double>(arm.size()) - n1;
  if (n1 == 0.0) throw EmptyArm("no participants with instrument = 1");
  if (n0 == 0.0) throw EmptyArm("no participants with instrument = 0");
  return {n1, n0};
}

double pick(const PValues& p, Alternative side) {
  switch (side) {
    case Alternative::greater: return p.greater;
    case Alternative::less: return p.less;
    case Alternative::two_sided: return p.two_sided;
  }
  return p.two_sided;
}

}  // namespace

RandTestResult summarize_permutation_test(double observed, std::vector<double> null_stats,
                                          const PermutationPlan& plan) {
  RandTestResult out;
  out.observed_stat = observed;
  out.n_permutations = null_stats.size();
  out.exhaustive = plan.exhaustive();
  out.seed = plan.seed();
  const auto p = permutation_p_values(observed, null_stats);
  out.p_greater = p.greater;
  out.p_less = p.less;
  out.p_two_sided = p.two_sided;
  std::sort(null_stats.begin(), null_stats.end());
  for (double level : kNullQuantileLevels) {
    out.null_quantiles.emplace_back(level, quantile_sorted(null_stats, level));
  }
  return out;
}

RandTestResult placebo_rand_test(const TrialDataset& ds, const PermutationOptions& options) {
  const auto observed = placebo_iv(ds);
  const double cov_qm = observed.denominator;
  const PermutationPlan plan = test_plan(ds.size(), options);
  std::span<const double> q = ds.q;
  auto stats = permuted_statistics(ds.y, plan, options.workers, [&](std::span<const double> y) {
    return sample_cov(q, y) / cov_qm;
  });
  return summarize_permutation_test(observed.value, std::move(stats), plan);
}

RandTestResult residual_rand_test(std::span<const double> z, std::span<const double> x,
                                  std::span<const double> response,
                                  const PermutationOptions& options) {
  const auto observed = iv_ratio(z, response, x, EffectKind::treatment_iv_two_step, "cov(Z,X)");
  const double cov_zx = observed.denominator;
  const PermutationPlan plan = test_plan(z.size(), options);
  auto stats = permuted_statistics(response, plan, options.workers, [&](std::span<const double> r) {
    return sample_cov(z, r) / cov_zx;
  });
  return summarize_permutation_test(observed.value, std::move(stats), plan);
}

RandTestResult treatment_rand_test(const TrialDataset& ds, const PermutationOptions& options,
                                   bool adjusted) {
  if (!adjusted) return residual_rand_test(ds.z, ds.x, ds.y, options);
  const auto psi = placebo_iv(ds);
  const auto residuals = placebo_residuals(ds, psi.value);
  return residual_rand_test(ds.z, ds.x, residuals.values, options);
}

RandTestResult location_rand_test(std::span<const double> response, std::span<const double> arm,
                                  double shift, const PermutationOptions& options) {
  if (response.size() != arm.size()) throw std::invalid_argument("location test: length mismatch");
  const auto [n1, n0] = arm_sizes(arm);
  std::vector<double> shifted(response.begin(), response.end());
  for (std::size_t k = 0; k < shifted.size(); ++k) {
    if (arm[k] == 0.0) shifted[k] += shift;
  }
  const double observed = mean_difference(arm, shifted, n1, n0);
  const PermutationPlan plan = test_plan(response.size(), options);
  auto stats = permuted_statistics(shifted, plan, options.workers, [&](std::span<const double> r) {
    return mean_difference(arm, r, n1, n0);
  });
  return summarize_permutation_test(observed, std::move(stats), plan);
}

double shifted_null_test(std::span<const double> response, std::span<const double> arm,
                         double shift, const PermutationOptions& options, Alternative side) {
  const auto result = location_rand_test(response, arm, shift, options);
  return pick({result.p_greater, result.p_less, result.p_two_sided}, side);
}

ShiftedNullFamily::ShiftedNullFamily(std::span<const double> response,
                                     std::span<const double> arm,
                                     const PermutationOptions& options) {
  if (response.size() != arm.size()) throw std::invalid_argument("shifted null: length mismatch");
  const auto [n1, n0] = arm_sizes(arm);
  observed_ = mean_difference(arm, response, n1, n0);

  const PermutationPlan plan = test_plan(response.size(), options);
  std::vector<double> control(arm.size());
  for (std::size_t k = 0; k < arm.size(); ++k) control[k] = arm[k] == 0.0 ? 1.0 : 0.0;

  base_.resize(plan.count());
  slope_.resize(plan.count());
  parallel_for(plan.count(), options.workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<std::uint32_t> perm(plan.size());
    std::vector<double> r(plan.size()), c(plan.size());
    for (std::size_t b = begin; b < end; ++b) {
      plan.permutation(b, perm);
      for (std::size_t k = 0; k < perm.size(); ++k) {
        r[k] = response[perm[k]];
        c[k] = control[perm[k]];
      }
      base_[b] = mean_difference(arm, r, n1, n0);
      slope_[b] = mean_difference(arm, c, n1, n0);
    }
  });
  spread_ = base_.size() >= 2 ? sample_sd(base_) : 0.0;
}

double ShiftedNullFamily::p_value(double shift, Alternative side) const {
  // Shifting the control arm by c lowers the observed difference by c.
  const double observed = observed_ - shift;
  std::vector<double> shifted(base_.size());
  for (std::size_t b = 0; b < base_.size(); ++b) shifted[b] = base_[b] + shift * slope_[b];
  return pick(permutation_p_values(observed, shifted), side);
}

PlaceboTest randomization_placebo_test(const PermutationOptions& options) {
  return [options](const TrialDataset& ds) { return placebo_rand_test(ds, options).p_two_sided; };
}

std::string_view to_string(Effect effect) noexcept {
  return effect == Effect::psi ? "psi" : "beta";
}

std::string_view to_string(ProfileSide side) noexcept {
  switch (side) {
    case ProfileSide::lower: return "lower";
    case ProfileSide::center: return "center";
    case ProfileSide::upper: return "upper";
  }
  return "center";
}

PvalueProfile pvalue_profile(const TrialDataset& ds, Effect effect, const ProfileOptions& options) {
  PvalueProfile profile;
  profile.effect = effect;

  std::vector<double> response;
  std::span<const double> arm;
  double k_factor = 0.0;
  if (effect == Effect::psi) {
    const auto psi = placebo_iv(ds);
    profile.estimate = psi.value;
    response = ds.y;
    arm = ds.q;
    k_factor = psi.denominator / sample_var(ds.q);
  } else {
    const auto psi = placebo_iv(ds);
    response = placebo_residuals(ds, psi.value).values;
    const auto beta = iv_ratio(ds.z, response, ds.x, EffectKind::treatment_iv_two_step, "cov(Z,X)");
    profile.estimate = beta.value;
    arm = ds.z;
    k_factor = beta.denominator / sample_var(ds.z);
  }

  const ShiftedNullFamily family(response, arm, options.permutations);
  profile.n_permutations = family.n_permutations();
  profile.p_floor = family.p_floor();

  // H1: theta > theta_j is H1: ITT > theta_j K, whose direction flips with K.
  const Alternative lower_alt = k_factor > 0 ? Alternative::greater : Alternative::less;
  const Alternative upper_alt = k_factor > 0 ? Alternative::less : Alternative::greater;
  const double center_p = std::max(family.p_value(profile.estimate * k_factor, Alternative::greater),
                                   family.p_value(profile.estimate * k_factor, Alternative::less));

  const double spread = family.null_spread() / std::abs(k_factor);
  const double step = options.grid_step.value_or(6.0 * spread / 100.0);
  if (!(step > 0.0) || !std::isfinite(step)) {
    profile.grid.push_back({profile.estimate, center_p, ProfileSide::center});
    return profile;
  }
  profile.grid_step = step;

  const double floor_tolerance = profile.p_floor * (1.0 + 1e-12);
  std::vector<ProfilePoint> lower;
  for (std::size_t j = 1; j <= options.max_steps; ++j) {
    const double theta = profile.estimate - static_cast<double>(j) * step;
    const double p = family.p_value(theta * k_factor, lower_alt);
    lower.push_back({theta, p, ProfileSide::lower});
    if (p <= floor_tolerance) break;
  }
  std::reverse(lower.begin(), lower.end());
  profile.grid = std::move(lower);
  profile.grid.push_back({profile.estimate, center_p, ProfileSide::center});
  for (std::size_t j = 1; j <= options.max_steps; ++j) {
    const double theta = profile.estimate + static_cast<double>(j) * step;
    const double p = family.p_value(theta * k_factor, upper_alt);
    profile.grid.push_back({theta, p, ProfileSide::upper});
    if (p <= floor_tolerance) break;
  }
  return profile;
}

RandCI ci_from_profile(const PvalueProfile& profile, double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  std::optional<double> lower_reject, upper_reject;
  for (const auto& pt : profile.grid) {
    if (pt.p_one_sided > alpha) continue;
    if (pt.side == ProfileSide::lower) {
      lower_reject = std::max(lower_reject.value_or(pt.theta), pt.theta);
    } else if (pt.side == ProfileSide::upper) {
      upper_reject = std::min(upper_reject.value_or(pt.theta), pt.theta);
    }
  }
  if (!lower_reject) throw ProfileTooNarrow("lower");
  if (!upper_reject) throw ProfileTooNarrow("upper");
  RandCI ci;
  ci.alpha = alpha;
  ci.level = 1.0 - 2.0 * alpha;
  ci.estimate = profile.estimate;
  ci.lower = *lower_reject + profile.grid_step;
  ci.upper = *upper_reject - profile.grid_step;
  return ci;
}

}  // namespace placeboiv
