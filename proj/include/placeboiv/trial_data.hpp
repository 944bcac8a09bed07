#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "placeboiv/error.hpp"

namespace placeboiv {

/// An observed (measured) confounder column, serialized as `c_<suffix>`.
struct Covariate {
  std::string name;
  std::vector<double> values;

  bool operator==(const Covariate&) const = default;
};

/// One row per participant. Binary columns hold 0.0 / 1.0.
///
///   z  assigned treatment        q  encouragement instrument
///   x  received treatment        e  expectation
///   d  desire                    i  interaction, must equal e * d
///   m  emotion level             y  outcome
///   a  optional extra mediator   w  optional instrument for a
struct TrialDataset {
  std::vector<double> z, q, x, e, d, i, m, y;
  std::optional<std::vector<double>> a;
  std::optional<std::vector<double>> w;
  std::vector<Covariate> covariates;

  std::size_t size() const noexcept { return y.size(); }
  bool has_extended() const noexcept { return a.has_value() && w.has_value(); }
  const Covariate* covariate(std::string_view name) const noexcept;

  bool operator==(const TrialDataset&) const = default;
};

enum class IssueKind { length_mismatch, non_binary, broken_interaction, non_finite, too_small };

std::string_view to_string(IssueKind kind) noexcept;

/// A single invariant violation. For `too_small` the column is "n" and `row`
/// holds the participant count; for `length_mismatch` `row` holds the
/// offending column's length.
struct DatasetIssue {
  IssueKind kind;
  std::string column;
  std::size_t row;

  bool operator==(const DatasetIssue&) const = default;
};

inline constexpr std::size_t kMinParticipants = 4;

/// Every invariant violation, ordered by (column position in the CSV layout, row).
std::vector<DatasetIssue> validate(const TrialDataset& dataset);

/// Raised by read_csv when the parsed dataset violates an invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<DatasetIssue> issues);
  const char* name() const noexcept override { return "ValidationError"; }
  const std::vector<DatasetIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<DatasetIssue> issues_;
};

TrialDataset parse_csv(std::istream& in);
TrialDataset read_csv(const std::filesystem::path& path);
void write_csv(const TrialDataset& dataset, std::ostream& out);
void write_csv(const TrialDataset& dataset, const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace placeboiv
