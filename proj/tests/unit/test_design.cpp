#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "placeboiv/design.hpp"

using namespace placeboiv;
using Catch::Approx;

namespace {

DesignSpec spec_of(std::size_t n, std::size_t d, std::uint64_t seed) {
  DesignSpec s;
  s.n_points = n;
  s.seed = seed;
  for (std::size_t j = 0; j < d; ++j) s.dimensions.push_back({"x" + std::to_string(j), 0.0, 1.0, false});
  return s;
}

// Brute-force stratum check written independently of has_latin_property.
bool strata_are_a_permutation(const Design& d, std::size_t j) {
  const auto n = d.n_points();
  std::vector<std::size_t> strata;
  for (const auto& row : d.unit) strata.push_back(static_cast<std::size_t>(std::floor(row[j] * n)));
  std::sort(strata.begin(), strata.end());
  for (std::size_t k = 0; k < n; ++k) {
    if (strata[k] != k) return false;
  }
  return true;
}

double brute_min_distance(const Design& d) {
  double best = INFINITY;
  for (std::size_t a = 0; a < d.n_points(); ++a) {
    for (std::size_t b = a + 1; b < d.n_points(); ++b) {
      double s = 0;
      for (std::size_t j = 0; j < d.unit[a].size(); ++j) s += std::pow(d.unit[a][j] - d.unit[b][j], 2);
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("two points in one dimension land in different halves") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto d = lhs_sample(spec_of(2, 1, s));
    std::vector<double> v{d.points[0][0], d.points[1][0]};
    std::sort(v.begin(), v.end());
    CHECK(v[0] < 0.5);
    CHECK(v[1] >= 0.5);
    CHECK(v[1] <= 1.0);
  }
}

TEST_CASE("ten points in three dimensions have every stratum once") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto d = lhs_sample(spec_of(10, 3, s));
    CHECK(has_latin_property(d));
    for (std::size_t j = 0; j < 3; ++j) CHECK(strata_are_a_permutation(d, j));
    CHECK(d.score == Approx(brute_min_distance(d)));
  }
}

TEST_CASE("integer dimension covering each value once") {
  DesignSpec s;
  s.n_points = 901;
  s.dimensions = {{"n", 100, 1000, true}, {"t", -2, 2, false}};
  s.seed = 3;
  const auto d = lhs_sample(s);
  std::set<double> values;
  for (const auto& row : d.points) values.insert(row[d.column("n")]);
  CHECK(values.size() == 901);
  CHECK(*values.begin() == 100.0);
  CHECK(*values.rbegin() == 1000.0);
  for (double v : values) CHECK(v == std::floor(v));
}

TEST_CASE("values respect the declared ranges") {
  DesignSpec s = spec_of(200, 2, 8);
  s.dimensions[0] = {"a", -2, 2, false};
  s.dimensions[1] = {"n", 100, 1000, true};
  const auto d = build_design(s);
  for (const auto& row : d.points) {
    CHECK(row[0] >= -2.0);
    CHECK(row[0] <= 2.0);
    CHECK(row[1] >= 100.0);
    CHECK(row[1] <= 1000.0);
  }
  CHECK_THROWS_AS(d.column("missing"), std::out_of_range);
}

TEST_CASE("optimizer is monotone, keeps the Latin property and is deterministic") {
  int improved = 0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto initial = lhs_sample(spec_of(20, 4, s));
    std::vector<double> trace;
    const auto out = maximin_optimize(initial, 3000, s, &trace);
    CHECK(trace.size() == 3000);
    CHECK(std::is_sorted(trace.begin(), trace.end()));
    CHECK(trace.front() >= initial.score);
    CHECK(out.score >= initial.score);
    CHECK(out.score == Approx(brute_min_distance(out)));
    CHECK(has_latin_property(out));
    for (std::size_t j = 0; j < 4; ++j) CHECK(strata_are_a_permutation(out, j));
    improved += out.score > initial.score;
    CHECK(maximin_optimize(initial, 3000, s).unit == out.unit);
  }
  CHECK(improved >= 27);
}

TEST_CASE("zero iterations is the identity") {
  const auto d = lhs_sample(spec_of(15, 3, 4));
  const auto out = maximin_optimize(d, 0, 4);
  CHECK(out.unit == d.unit);
  CHECK(out.score == d.score);
}

TEST_CASE("two points never get worse") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto d = lhs_sample(spec_of(2, 5, s));
    CHECK(maximin_optimize(d, 200, s).score >= d.score);
  }
}

TEST_CASE("spec validation") {
  auto s = spec_of(1, 2, 0);
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
  s = spec_of(5, 1, 0);
  s.dimensions[0].upper = 0.0;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
}

TEST_CASE("design csv has one row per point") {
  const auto d = build_design(spec_of(7, 2, 1));
  std::ostringstream out;
  write_design_csv(d, out);
  const auto text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 8);
  CHECK(text.rfind("x0,x1", 0) == 0);
}

TEST_CASE("latin check catches a broken design") {
  auto d = lhs_sample(spec_of(10, 2, 2));
  d.unit[0][1] = d.unit[1][1];
  CHECK_FALSE(has_latin_property(d));
}
