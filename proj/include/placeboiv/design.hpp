#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace placeboiv {

struct DesignDimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  /// Integer dimensions map stratum k of width (upper - lower + 1) / N onto
  /// lower + floor(...), so N = upper - lower + 1 points hit every integer once.
  bool integer = false;
};

enum class DesignOptimizer { none, maximin_swap };

struct DesignSpec {
  std::vector<DesignDimension> dimensions;
  std::size_t n_points = 1000;
  DesignOptimizer optimizer = DesignOptimizer::maximin_swap;
  std::size_t iterations = 10000;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument unless every dimension has lower < upper
/// and n_points >= 2.
void validate_spec(const DesignSpec& spec);

struct Design {
  std::vector<DesignDimension> dimensions;
  /// n_points x d coordinates in [0, 1); the Latin property lives here.
  std::vector<std::vector<double>> unit;
  /// n_points x d parameter values mapped from `unit`.
  std::vector<std::vector<double>> points;
  /// Minimum pairwise Euclidean distance over `unit`.
  double score = 0.0;

  std::size_t n_points() const noexcept { return unit.size(); }
  std::size_t column(const std::string& name) const;
};

/// Random Latin hypercube: dimension j shuffles the strata with the counter
/// stream (seed, j) and jitters each point uniformly inside its stratum.
Design lhs_sample(const DesignSpec& spec);

/// lhs_sample followed by maximin_optimize when the spec asks for it.
Design build_design(const DesignSpec& spec);

/// Hill climbing on the maximin criterion. Each iteration picks a dimension
/// and two points and swaps their coordinates there; the swap is kept iff
/// no distance involving the two points falls below the current minimum.
/// `trace`, when given, receives the score after every iteration.
Design maximin_optimize(Design design, std::size_t iterations, std::uint64_t seed,
                        std::vector<double>* trace = nullptr);

bool has_latin_property(const Design& design);
double min_pairwise_distance(const std::vector<std::vector<double>>& unit);

/// Re-derives `points` from `unit`.
void map_to_ranges(Design& design);

void write_design_csv(const Design& design, std::ostream& out);
void write_design_csv(const Design& design, const std::filesystem::path& path);

}  // namespace placeboiv
