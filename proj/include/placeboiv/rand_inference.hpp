#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "placeboiv/estimators.hpp"
#include "placeboiv/permutation.hpp"
#include "placeboiv/trial_data.hpp"

namespace placeboiv {

struct RandTestResult {
  double observed_stat = 0.0;
  /// Number of permuted statistics B; the p-value floor is 1 / (B + 1).
  std::size_t n_permutations = 0;
  bool exhaustive = false;
  double p_two_sided = 1.0;
  double p_greater = 1.0;
  double p_less = 1.0;
  /// (probability, quantile) pairs of the permutation distribution.
  std::vector<std::pair<double, double>> null_quantiles;
  std::uint64_t seed = 0;
};

/// Probabilities reported in RandTestResult::null_quantiles.
inline constexpr double kNullQuantileLevels[] = {0.025, 0.05, 0.5, 0.95, 0.975};

RandTestResult summarize_permutation_test(double observed, std::vector<double> null_stats,
                                          const PermutationPlan& plan);

/// H0: psi = 0. Shuffles Y against intact (Q, M) pairs; statistic psi-hat.
RandTestResult placebo_rand_test(const TrialDataset& dataset, const PermutationOptions& options);

/// H0: beta = 0. Shuffles the response against intact (Z, X) pairs. With
/// `adjusted` the response is R-hat = Y - psi_hat M (psi_hat from the observed
/// data, computed once); otherwise Y.
RandTestResult treatment_rand_test(const TrialDataset& dataset, const PermutationOptions& options,
                                   bool adjusted);

/// Statistic cov(Z, R_perm) / cov(Z, X) for an arbitrary response column R.
RandTestResult residual_rand_test(std::span<const double> z, std::span<const double> x,
                                  std::span<const double> response,
                                  const PermutationOptions& options);

/// Two-sample location test: adds `shift` to every response with arm == 0
/// and tests the group-mean difference (arm 1 minus arm 0) against zero.
RandTestResult location_rand_test(std::span<const double> response, std::span<const double> arm,
                                  double shift, const PermutationOptions& options);

enum class Alternative { greater, less, two_sided };

/// p-value of H0: ITT = shift against the given alternative.
double shifted_null_test(std::span<const double> response, std::span<const double> arm,
                         double shift, const PermutationOptions& options, Alternative side);

/// Every shifted-null test on one (response, arm) pair shares the permutation
/// stream, and each permuted group-mean difference is affine in the shift:
/// T_b(c) = T_b(0) + c * S_b, where S_b is the permuted difference of the
/// control indicator. Precomputing (T_b(0), S_b) makes each shift O(B).
class ShiftedNullFamily {
 public:
  ShiftedNullFamily(std::span<const double> response, std::span<const double> arm,
                    const PermutationOptions& options);

  double p_value(double shift, Alternative side) const;
  /// Observed group-mean difference before shifting.
  double observed_itt() const noexcept { return observed_; }
  /// Standard deviation of the unshifted permuted differences.
  double null_spread() const noexcept { return spread_; }
  std::size_t n_permutations() const noexcept { return base_.size(); }
  double p_floor() const noexcept { return 1.0 / static_cast<double>(base_.size() + 1); }

 private:
  double observed_ = 0.0;
  double spread_ = 0.0;
  std::vector<double> base_;
  std::vector<double> slope_;
};

/// Test function for pretest_strategy backed by placebo_rand_test.
PlaceboTest randomization_placebo_test(const PermutationOptions& options);

enum class Effect { psi, beta };
std::string_view to_string(Effect effect) noexcept;

enum class ProfileSide { lower, center, upper };
std::string_view to_string(ProfileSide side) noexcept;

struct ProfilePoint {
  double theta = 0.0;
  double p_one_sided = 1.0;
  ProfileSide side = ProfileSide::center;
};

struct PvalueProfile {
  Effect effect = Effect::psi;
  double estimate = 0.0;
  double grid_step = 0.0;
  std::size_t n_permutations = 0;
  double p_floor = 0.0;
  /// Strictly increasing in theta; the center entry sits at `estimate`.
  std::vector<ProfilePoint> grid;
};

struct ProfileOptions {
  PermutationOptions permutations;
  /// Defaults to 6 x (permutation spread of the estimate) / 100.
  std::optional<double> grid_step;
  std::size_t max_steps = 100000;
};

/// One-sided p-value profile around the estimate. Below the estimate each
/// grid value theta_j is tested against H1: theta > theta_j, above it against
/// H1: theta < theta_j, through the shifted ITT null with shift theta_j * K
/// (K = cov(Q,M)/var(Q) for psi, cov(Z,X)/var(Z) for beta). Each side stops
/// at the first p-value equal to the floor 1 / (B + 1).
PvalueProfile pvalue_profile(const TrialDataset& dataset, Effect effect,
                             const ProfileOptions& options);

struct RandCI {
  double level = 0.0;
  double alpha = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double estimate = 0.0;
};

/// 100 (1 - 2 alpha)% interval: on each side, the grid value next to the
/// innermost rejection at alpha. Throws ProfileTooNarrow when a side never
/// reaches alpha.
RandCI ci_from_profile(const PvalueProfile& profile, double alpha);

}  // namespace placeboiv
