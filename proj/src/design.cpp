#include "placeboiv/design.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "placeboiv/error.hpp"
#include "placeboiv/rng.hpp"
#include "placeboiv/trial_data.hpp"

namespace placeboiv {

namespace {

// floor(t) for t that should be an integer plus a fraction in [0, 1), robust
// to t landing a few ulps below the stratum boundary.
std::size_t stratum_of(double t) {
  double k = std::floor(t);
  if (t - k > 1.0 - 1e-9) k += 1.0;
  return static_cast<std::size_t>(std::max(k, 0.0));
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

constexpr std::uint64_t kOptimizerTag = 0x6d6178696d696eull;

}  // namespace

void validate_spec(const DesignSpec& spec) {
  if (spec.n_points < 2) throw std::invalid_argument("design needs at least 2 points");
  for (const auto& dim : spec.dimensions) {
    if (!(dim.lower < dim.upper)) {
      throw std::invalid_argument("dimension " + dim.name + " needs lower < upper");
    }
    if (dim.integer && (dim.lower != std::floor(dim.lower) || dim.upper != std::floor(dim.upper))) {
      throw std::invalid_argument("integer dimension " + dim.name + " needs integer bounds");
    }
  }
}

std::size_t Design::column(const std::string& name) const {
  for (std::size_t j = 0; j < dimensions.size(); ++j) {
    if (dimensions[j].name == name) return j;
  }
  throw std::out_of_range("design has no dimension " + name);
}

void map_to_ranges(Design& design) {
  design.points.assign(design.unit.size(), std::vector<double>(design.dimensions.size()));
  for (std::size_t i = 0; i < design.unit.size(); ++i) {
    for (std::size_t j = 0; j < design.dimensions.size(); ++j) {
      const auto& dim = design.dimensions[j];
      const double u = design.unit[i][j];
      if (dim.integer) {
        const double width = dim.upper - dim.lower + 1.0;
        const auto k = std::min(stratum_of(u * width), static_cast<std::size_t>(width - 1.0));
        design.points[i][j] = dim.lower + static_cast<double>(k);
      } else {
        design.points[i][j] = dim.lower + u * (dim.upper - dim.lower);
      }
    }
  }
}

Design lhs_sample(const DesignSpec& spec) {
  validate_spec(spec);
  const std::size_t n = spec.n_points;
  Design design;
  design.dimensions = spec.dimensions;
  design.unit.assign(n, std::vector<double>(spec.dimensions.size()));
  std::vector<std::uint32_t> strata(n);
  for (std::size_t j = 0; j < spec.dimensions.size(); ++j) {
    CounterRng rng(spec.seed, j);
    std::iota(strata.begin(), strata.end(), 0u);
    fisher_yates(std::span<std::uint32_t>(strata), rng);
    for (std::size_t i = 0; i < n; ++i) {
      design.unit[i][j] = (strata[i] + rng.uniform()) / static_cast<double>(n);
    }
  }
  map_to_ranges(design);
  design.score = min_pairwise_distance(design.unit);
  return design;
}

Design build_design(const DesignSpec& spec) {
  Design design = lhs_sample(spec);
  if (spec.optimizer == DesignOptimizer::maximin_swap) {
    design = maximin_optimize(std::move(design), spec.iterations, spec.seed);
  }
  return design;
}

double min_pairwise_distance(const std::vector<std::vector<double>>& unit) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < unit.size(); ++i) {
    for (std::size_t k = i + 1; k < unit.size(); ++k) {
      best = std::min(best, squared_distance(unit[i], unit[k]));
    }
  }
  return std::sqrt(best);
}

bool has_latin_property(const Design& design) {
  const std::size_t n = design.unit.size();
  std::vector<char> seen(n);
  for (std::size_t j = 0; j < design.dimensions.size(); ++j) {
    std::fill(seen.begin(), seen.end(), 0);
    for (const auto& row : design.unit) {
      if (row[j] < 0.0 || row[j] >= 1.0) return false;
      const auto k = stratum_of(row[j] * static_cast<double>(n));
      if (k >= n || seen[k]) return false;
      seen[k] = 1;
    }
  }
  return true;
}

Design maximin_optimize(Design design, std::size_t iterations, std::uint64_t seed,
                        std::vector<double>* trace) {
  auto& unit = design.unit;
  const std::size_t n = unit.size();
  const std::size_t dims = design.dimensions.size();
  if (trace) trace->clear();
  if (n < 3 || dims == 0 || iterations == 0) {
    // With two points every swap leaves the single distance unchanged.
    design.score = min_pairwise_distance(unit);
    if (trace) trace->assign(iterations, design.score);
    return design;
  }

  // row_min[k] = min squared distance from k to any other point, attained at row_arg[k].
  std::vector<double> row_min(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> row_arg(n, 0);
  auto recompute_row = [&](std::size_t k) {
    row_min[k] = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n; ++l) {
      if (l == k) continue;
      const double d = squared_distance(unit[k], unit[l]);
      if (d < row_min[k]) {
        row_min[k] = d;
        row_arg[k] = l;
      }
    }
  };
  for (std::size_t k = 0; k < n; ++k) recompute_row(k);
  double global = *std::min_element(row_min.begin(), row_min.end());

  CounterRng rng(seed ^ kOptimizerTag, 0);
  std::vector<double> di(n), dj(n);
  for (std::size_t it = 0; it < iterations; ++it) {
    const auto dim = rng.below(static_cast<std::uint32_t>(dims));
    const auto i = rng.below(static_cast<std::uint32_t>(n));
    auto j = rng.below(static_cast<std::uint32_t>(n - 1));
    if (j >= i) ++j;

    std::swap(unit[i][dim], unit[j][dim]);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n; ++l) {
      di[l] = l == i ? 0.0 : squared_distance(unit[i], unit[l]);
      dj[l] = l == j ? 0.0 : squared_distance(unit[j], unit[l]);
      if (l != i) worst = std::min(worst, di[l]);
      if (l != j) worst = std::min(worst, dj[l]);
    }
    if (worst < global) {
      std::swap(unit[i][dim], unit[j][dim]);
      if (trace) trace->push_back(std::sqrt(global));
      continue;
    }

    for (std::size_t l = 0; l < n; ++l) {
      if (l == i || l == j) continue;
      const bool stale = row_arg[l] == i || row_arg[l] == j;
      if (stale) {
        recompute_row(l);
        continue;
      }
      if (di[l] < row_min[l]) {
        row_min[l] = di[l];
        row_arg[l] = i;
      }
      if (dj[l] < row_min[l]) {
        row_min[l] = dj[l];
        row_arg[l] = j;
      }
    }
    recompute_row(i);
    recompute_row(j);
    global = *std::min_element(row_min.begin(), row_min.end());
    assert(has_latin_property(design));
    if (trace) trace->push_back(std::sqrt(global));
  }
  map_to_ranges(design);
  design.score = min_pairwise_distance(unit);
  return design;
}

void write_design_csv(const Design& design, std::ostream& out) {
  for (std::size_t j = 0; j < design.dimensions.size(); ++j) {
    out << (j ? "," : "") << design.dimensions[j].name;
  }
  out << '\n';
  for (const auto& row : design.points) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
    out << '\n';
  }
}

void write_design_csv(const Design& design, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_design_csv(design, out);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace placeboiv
