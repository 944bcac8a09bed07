#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "placeboiv/parallel.hpp"

namespace placeboiv {

enum class PermutationScheme {
  /// Exhaustive when n! - 1 <= n_permutations, Monte Carlo otherwise.
  automatic,
  monte_carlo,
  exhaustive,
};

struct PermutationOptions {
  std::size_t n_permutations = 10000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  PermutationScheme scheme = PermutationScheme::automatic;
};

/// The sequence of permutations a test evaluates. Permutation b is a pure
/// function of (n, seed, b): Monte Carlo draws shuffle the identity with the
/// counter stream (seed, b); exhaustive plans unrank every non-identity
/// permutation in lexicographic order. Either way the observed arrangement
/// is counted once more through the add-one rule.
class PermutationPlan {
 public:
  PermutationPlan(std::size_t n, const PermutationOptions& options);

  std::size_t size() const noexcept { return n_; }
  /// Number of permuted statistics (B).
  std::size_t count() const noexcept { return count_; }
  bool exhaustive() const noexcept { return exhaustive_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Writes permutation b into `perm` (length n): permuted[k] = original[perm[k]].
  void permutation(std::size_t b, std::span<std::uint32_t> perm) const;

 private:
  std::size_t n_;
  std::size_t count_;
  bool exhaustive_;
  std::uint64_t seed_;
};

/// Smallest Monte Carlo budget a randomization test accepts.
inline constexpr std::size_t kMinTestPermutations = 99;

/// PermutationPlan for a randomization test; throws std::invalid_argument
/// when options.n_permutations < kMinTestPermutations.
PermutationPlan test_plan(std::size_t n, const PermutationOptions& options);

/// n! when it fits in 64 bits, otherwise 0.
std::uint64_t factorial_or_zero(std::size_t n) noexcept;

/// Evaluates statistic(permuted_response) for every permutation of the plan.
/// `statistic` is called concurrently when workers > 1.
template <class Statistic>
std::vector<double> permuted_statistics(std::span<const double> response,
                                        const PermutationPlan& plan, std::size_t workers,
                                        Statistic&& statistic) {
  std::vector<double> out(plan.count());
  parallel_for(plan.count(), workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<std::uint32_t> perm(plan.size());
    std::vector<double> permuted(plan.size());
    for (std::size_t b = begin; b < end; ++b) {
      plan.permutation(b, perm);
      for (std::size_t k = 0; k < perm.size(); ++k) permuted[k] = response[perm[k]];
      out[b] = statistic(std::span<const double>(permuted));
    }
  });
  return out;
}

struct PValues {
  double greater = 1.0;
  double less = 1.0;
  double two_sided = 1.0;
};

/// Add-one randomization p-values p = (1 + #{T_b >= T_obs}) / (B + 1), with
/// the two-sided version on |T|. Permuted statistics within a relative
/// 1e-9 of the observed value count as ties, and ties count as extreme.
PValues permutation_p_values(double observed, std::span<const double> null_stats);

/// Relative tie tolerance used by permutation_p_values.
inline constexpr double kTieRelativeTolerance = 1e-9;

}  // namespace placeboiv
