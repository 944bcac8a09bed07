#include "placeboiv/permutation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "placeboiv/rng.hpp"

namespace placeboiv {

std::uint64_t factorial_or_zero(std::size_t n) noexcept {
  if (n > 20) return 0;
  std::uint64_t f = 1;
  for (std::size_t k = 2; k <= n; ++k) f *= k;
  return f;
}

PermutationPlan::PermutationPlan(std::size_t n, const PermutationOptions& options)
    : n_(n), count_(options.n_permutations), exhaustive_(false), seed_(options.seed) {
  if (n < 2) throw std::invalid_argument("permutation plan needs at least 2 observations");
  const std::uint64_t total = factorial_or_zero(n);
  switch (options.scheme) {
    case PermutationScheme::automatic:
      exhaustive_ = total != 0 && total - 1 <= options.n_permutations;
      break;
    case PermutationScheme::exhaustive:
      if (total == 0 || total > (1ull << 32)) {
        throw std::invalid_argument("exhaustive enumeration is infeasible for n = " + std::to_string(n));
      }
      exhaustive_ = true;
      break;
    case PermutationScheme::monte_carlo:
      break;
  }
  if (exhaustive_) {
    count_ = static_cast<std::size_t>(total - 1);
  } else if (count_ == 0) {
    throw std::invalid_argument("n_permutations must be positive");
  }
}

PermutationPlan test_plan(std::size_t n, const PermutationOptions& options) {
  if (options.n_permutations < kMinTestPermutations) {
    throw std::invalid_argument("n_permutations must be at least " +
                                std::to_string(kMinTestPermutations));
  }
  return PermutationPlan(n, options);
}

void PermutationPlan::permutation(std::size_t b, std::span<std::uint32_t> perm) const {
  if (perm.size() != n_) throw std::invalid_argument("permutation buffer has wrong length");
  if (exhaustive_) {
    // Lexicographic unranking of index b + 1 (index 0 is the identity).
    std::uint64_t rank = static_cast<std::uint64_t>(b) + 1;
    std::vector<std::uint32_t> pool(n_);
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t k = 0; k < n_; ++k) {
      const std::uint64_t block = factorial_or_zero(n_ - 1 - k);
      const auto digit = static_cast<std::size_t>(rank / block);
      rank %= block;
      perm[k] = pool[digit];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(digit));
    }
    return;
  }
  std::iota(perm.begin(), perm.end(), 0u);
  CounterRng rng(seed_, b);
  fisher_yates(perm, rng);
}

PValues permutation_p_values(double observed, std::span<const double> null_stats) {
  double scale = std::abs(observed);
  for (double t : null_stats) scale = std::max(scale, std::abs(t));
  const double tol = kTieRelativeTolerance * scale;
  const double abs_observed = std::abs(observed);

  std::size_t ge = 0, le = 0, abs_ge = 0;
  for (double t : null_stats) {
    if (t >= observed - tol) ++ge;
    if (t <= observed + tol) ++le;
    if (std::abs(t) >= abs_observed - tol) ++abs_ge;
  }
  const auto denom = static_cast<double>(null_stats.size() + 1);
  return {static_cast<double>(ge + 1) / denom, static_cast<double>(le + 1) / denom,
          static_cast<double>(abs_ge + 1) / denom};
}

}  // namespace placeboiv
