#include "placeboiv/trial_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace placeboiv {

namespace {

struct ColumnRef {
  std::string name;
  const std::vector<double>* values;
  bool binary;
};

// CSV layout order; validation issues are sorted by position in this list.
std::vector<ColumnRef> layout(const TrialDataset& ds) {
  std::vector<ColumnRef> cols = {
      {"z", &ds.z, true}, {"q", &ds.q, true}, {"x", &ds.x, true}, {"e", &ds.e, true},
      {"d", &ds.d, true}, {"i", &ds.i, true}, {"m", &ds.m, false}, {"y", &ds.y, false},
  };
  if (ds.a) cols.push_back({"a", &*ds.a, false});
  if (ds.w) cols.push_back({"w", &*ds.w, true});
  for (const auto& c : ds.covariates) cols.push_back({c.name, &c.values, false});
  return cols;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& text, const std::string& column, std::size_t line) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("line " + std::to_string(line) + ": column " + column +
                     ": cannot parse '" + text + "' as a number");
  }
  return value;
}

}  // namespace

const Covariate* TrialDataset::covariate(std::string_view name) const noexcept {
  for (const auto& c : covariates) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string_view to_string(IssueKind kind) noexcept {
  switch (kind) {
    case IssueKind::length_mismatch: return "length_mismatch";
    case IssueKind::non_binary: return "non_binary";
    case IssueKind::broken_interaction: return "broken_interaction";
    case IssueKind::non_finite: return "non_finite";
    case IssueKind::too_small: return "too_small";
  }
  return "unknown";
}

std::vector<DatasetIssue> validate(const TrialDataset& ds) {
  std::vector<DatasetIssue> issues;
  const std::size_t n = ds.size();
  if (n < kMinParticipants) issues.push_back({IssueKind::too_small, "n", n});

  const auto cols = layout(ds);
  for (const auto& col : cols) {
    const auto& v = *col.values;
    if (v.size() != n) {
      issues.push_back({IssueKind::length_mismatch, col.name, v.size()});
      continue;
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(v[k])) {
        issues.push_back({IssueKind::non_finite, col.name, k});
      } else if (col.binary && v[k] != 0.0 && v[k] != 1.0) {
        issues.push_back({IssueKind::non_binary, col.name, k});
      } else if (col.name == "i" && ds.e.size() == n && ds.d.size() == n &&
                 v[k] != ds.e[k] * ds.d[k]) {
        issues.push_back({IssueKind::broken_interaction, col.name, k});
      }
    }
  }
  return issues;
}

ValidationError::ValidationError(std::vector<DatasetIssue> issues)
    : Error([&] {
        std::string msg = "dataset failed validation (" + std::to_string(issues.size()) + " issue" +
                          (issues.size() == 1 ? "" : "s") + ")";
        const std::size_t shown = std::min<std::size_t>(issues.size(), 5);
        for (std::size_t k = 0; k < shown; ++k) {
          msg += "; " + std::string(to_string(issues[k].kind)) + " at column " +
                 issues[k].column + " row " + std::to_string(issues[k].row);
        }
        return msg;
      }()),
      issues_(std::move(issues)) {}

TrialDataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input: header row is required");
  auto header = split_fields(line);
  for (auto& h : header) h = trim(h);

  static const std::vector<std::string> required = {"z", "q", "x", "e", "d", "i", "m", "y"};
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& name = header[c];
    const bool known = std::find(required.begin(), required.end(), name) != required.end() ||
                       name == "a" || name == "w" || (name.size() > 2 && name.rfind("c_", 0) == 0);
    if (!known) throw ParseError("header: unknown column '" + name + "'");
    if (!index.emplace(name, c).second) throw ParseError("header: duplicate column '" + name + "'");
  }
  for (const auto& name : required) {
    if (!index.contains(name)) throw ParseError("header: missing required column '" + name + "'");
  }

  std::vector<std::vector<double>> columns(header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      columns[c].push_back(parse_number(trim(fields[c]), header[c], line_no));
    }
  }

  TrialDataset ds;
  auto take = [&](const std::string& name) { return std::move(columns[index.at(name)]); };
  ds.z = take("z");
  ds.q = take("q");
  ds.x = take("x");
  ds.e = take("e");
  ds.d = take("d");
  ds.i = take("i");
  ds.m = take("m");
  ds.y = take("y");
  if (index.contains("a")) ds.a = take("a");
  if (index.contains("w")) ds.w = take("w");
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].rfind("c_", 0) == 0) ds.covariates.push_back({header[c], std::move(columns[c])});
  }

  if (auto issues = validate(ds); !issues.empty()) throw ValidationError(std::move(issues));
  return ds;
}

TrialDataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return parse_csv(in);
}

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buffer, ptr);
}

void write_csv(const TrialDataset& ds, std::ostream& out) {
  const auto cols = layout(ds);
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c].name;
  out << '\n';
  for (std::size_t k = 0; k < ds.size(); ++k) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out << (c ? "," : "") << format_double((*cols[c].values)[k]);
    }
    out << '\n';
  }
}

void write_csv(const TrialDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_csv(ds, out);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace placeboiv
