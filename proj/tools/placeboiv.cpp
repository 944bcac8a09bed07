// placeboiv command-line front end.
//
// Exit codes: 0 success, 2 invalid input (usage, config, CSV, validation),
// 3 degenerate data (DegenerateInstrument, EmptyArm, RankDeficient,
// ProfileTooNarrow), 4 I/O failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "placeboiv/config.hpp"
#include "placeboiv/error.hpp"
#include "placeboiv/estimators.hpp"
#include "placeboiv/harness.hpp"
#include "placeboiv/manifest.hpp"
#include "placeboiv/rand_inference.hpp"
#include "placeboiv/simulator.hpp"
#include "placeboiv/stats.hpp"
#include "placeboiv/trial_data.hpp"

namespace fs = std::filesystem;
using namespace placeboiv;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitIo = 4;
constexpr double kWeakInstrument = 0.1;

struct SeedChoice {
  std::uint64_t value = 0;
  bool drawn = false;
};

SeedChoice resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return {*flag, false};
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return {seed, true};
}

// argv minus --workers, which never changes an output.
std::vector<std::string> recorded_command(int argc, char** argv) {
  std::vector<std::string> out;
  for (int k = 0; k < argc; ++k) {
    const std::string arg = argv[k];
    if (arg == "--workers" || arg == "-j") {
      ++k;
      continue;
    }
    if (arg.rfind("--workers=", 0) == 0) continue;
    out.push_back(arg);
  }
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json diagnostics_json(const TrialDataset& ds, json& warnings) {
  const auto d = diagnostics(ds);
  auto weak = [&](const std::optional<double>& cor, const char* label) {
    if (!cor || std::abs(*cor) < kWeakInstrument) {
      warnings.push_back(std::string("weak instrument: |") + label + "| < 0.1");
    }
  };
  weak(d.cor_qm, "cor(Q,M)");
  weak(d.cor_zx, "cor(Z,X)");
  return json{{"cor_qm", optional_number(d.cor_qm)},
              {"cor_zx", optional_number(d.cor_zx)},
              {"cor_qd", optional_number(d.cor_qd)},
              {"desire_expectation_r2", optional_number(d.desire_expectation_r2)}};
}

json estimate_json(const EffectEstimate& e) {
  return json{{"value", e.value},
              {"numerator", e.numerator},
              {"denominator", e.denominator},
              {"kind", std::string(to_string(e.kind))}};
}

json quantiles_json(const RandTestResult& r) {
  json out = json::array();
  for (const auto& [p, q] : r.null_quantiles) out.push_back({{"p", p}, {"q", q}});
  return out;
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

void print_warnings(const json& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w.get<std::string>() << '\n';
}

fs::path manifest_path_for(const fs::path& output) {
  return fs::path(output.string() + ".manifest.json");
}

// ---- subcommands ----------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a, const std::vector<std::string>& command) {
  const auto doc = load_json_file(a.config);
  const auto cfg = simulation_from_json(doc);
  const auto seed = resolve_seed(a.seed);
  const auto ds = generate(cfg.scenario, cfg.point, seed.value);
  write_csv(ds, fs::path(a.out));
  write_manifest(make_manifest(command, to_json(cfg), seed.value, seed.drawn),
                 manifest_path_for(a.out));
  emit(json{{"rows", ds.size()}, {"out", a.out}, {"seed", seed.value}, {"seed_drawn", seed.drawn}});
  return 0;
}

struct EstimateArgs {
  std::string data;
  std::string effect = "all";
  bool covariates = false;
};

int run_estimate(const EstimateArgs& a) {
  const auto ds = read_csv(a.data);
  json warnings = json::array();
  json out{{"n", ds.size()}};
  out["diagnostics"] = diagnostics_json(ds, warnings);
  const bool psi = a.effect != "beta";
  const bool beta = a.effect != "psi";
  if (psi) {
    out["psi"] = estimate_json(placebo_iv(ds));
    out["itt_psi"] = estimate_json(itt_psi(ds));
  }
  if (beta) {
    const auto two_step = treatment_iv_two_step(ds);
    out["beta_two_step"] = estimate_json(two_step);
    out["beta_unadjusted"] = estimate_json(treatment_iv_unadjusted(ds));
    out["itt_beta"] = estimate_json(itt_beta(ds, placebo_residuals(ds, placebo_iv(ds).value)));
    if (ds.has_extended()) {
      const auto mm = multi_mediator_two_step(ds);
      out["multi_mediator"] = {{"psi", estimate_json(mm.psi)},
                               {"kappa", estimate_json(mm.kappa)},
                               {"beta", estimate_json(mm.beta)}};
    }
  }
  const auto fit = ols_fit(ds, ds.has_extended());
  json terms = json::object();
  for (const auto& t : fit.terms) {
    if (t.name == "intercept") continue;
    if ((t.name == "psi" && !psi) || (t.name == "beta" && !beta)) continue;
    terms[t.name] = {{"coefficient", t.coefficient},
                     {"standard_error", t.standard_error},
                     {"t", t.t_statistic},
                     {"p_value", t.p_value}};
  }
  out["ols"] = {{"terms", terms}, {"r_squared", fit.r_squared}, {"df", fit.df}};
  if (a.covariates && !ds.covariates.empty()) {
    const auto adj = estimate_with_covariates(ds);
    out["covariate_adjusted"] = {{"psi", estimate_json(adj.psi)}, {"beta", estimate_json(adj.beta)}};
  }
  out["warnings"] = warnings;
  print_warnings(warnings);
  emit(out);
  return 0;
}

struct TestArgs {
  std::string data;
  std::string effect = "psi";
  std::string method;
  std::size_t permutations = 10000;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string out;
};

int run_test(const TestArgs& a, const std::vector<std::string>& command) {
  const auto ds = read_csv(a.data);
  const auto seed = resolve_seed(a.seed);
  PermutationOptions opt;
  opt.n_permutations = a.permutations;
  opt.seed = seed.value;
  opt.workers = a.workers;

  std::string method = a.method;
  RandTestResult r;
  double estimate = 0.0;
  if (a.effect == "psi") {
    if (method.empty()) method = "placebo";
    estimate = placebo_iv(ds).value;
    if (method == "placebo") {
      r = placebo_rand_test(ds, opt);
    } else if (method == "itt") {
      r = location_rand_test(ds.y, ds.q, 0.0, opt);
    } else {
      throw std::invalid_argument("--method for psi must be placebo or itt");
    }
  } else {
    if (method.empty()) method = "two_step";
    if (method == "two_step") {
      estimate = treatment_iv_two_step(ds).value;
      r = treatment_rand_test(ds, opt, true);
    } else if (method == "unadjusted") {
      estimate = treatment_iv_unadjusted(ds).value;
      r = treatment_rand_test(ds, opt, false);
    } else {
      throw std::invalid_argument("--method for beta must be two_step or unadjusted");
    }
  }

  json warnings = json::array();
  json out{{"effect", a.effect},
           {"method", method},
           {"estimate", estimate},
           {"observed_stat", r.observed_stat},
           {"p_two_sided", r.p_two_sided},
           {"p_greater", r.p_greater},
           {"p_less", r.p_less},
           {"n_permutations", r.n_permutations},
           {"exhaustive", r.exhaustive},
           {"two_sided_rule", "absolute value"},
           {"null_quantiles", quantiles_json(r)},
           {"seed", seed.value},
           {"seed_drawn", seed.drawn}};
  out["diagnostics"] = diagnostics_json(ds, warnings);
  out["warnings"] = warnings;
  print_warnings(warnings);

  if (!a.out.empty()) {
    write_file(a.out, [&](std::ostream& os) {
      os << "effect,method,estimate,observed_stat,p_two_sided,p_greater,p_less,n_permutations,seed\n"
         << a.effect << ',' << method << ',' << format_double(estimate) << ','
         << format_double(r.observed_stat) << ',' << format_double(r.p_two_sided) << ','
         << format_double(r.p_greater) << ',' << format_double(r.p_less) << ',' << r.n_permutations
         << ',' << seed.value << '\n';
    });
    json config{{"data", a.data}, {"effect", a.effect}, {"method", method},
                {"permutations", a.permutations}};
    write_manifest(make_manifest(command, config, seed.value, seed.drawn), manifest_path_for(a.out));
  }
  emit(out);
  return 0;
}

struct CiArgs {
  std::string data;
  std::string effect = "psi";
  double alpha = 0.025;
  std::size_t permutations = 10000;
  std::optional<double> grid_step;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string profile_out;
};

int run_ci(const CiArgs& a, const std::vector<std::string>& command) {
  const auto ds = read_csv(a.data);
  const auto seed = resolve_seed(a.seed);
  ProfileOptions opt;
  opt.permutations.n_permutations = a.permutations;
  opt.permutations.seed = seed.value;
  opt.permutations.workers = a.workers;
  opt.grid_step = a.grid_step;
  const Effect effect = a.effect == "psi" ? Effect::psi : Effect::beta;
  const auto profile = pvalue_profile(ds, effect, opt);

  if (!a.profile_out.empty()) {
    write_file(a.profile_out, [&](std::ostream& os) {
      os << "theta,p_one_sided,side\n";
      for (const auto& pt : profile.grid) {
        os << format_double(pt.theta) << ',' << format_double(pt.p_one_sided) << ','
           << to_string(pt.side) << '\n';
      }
    });
    json config{{"data", a.data}, {"effect", a.effect}, {"permutations", a.permutations},
                {"grid_step", a.grid_step ? json(*a.grid_step) : json(nullptr)}};
    write_manifest(make_manifest(command, config, seed.value, seed.drawn),
                   manifest_path_for(a.profile_out));
  }

  const auto ci = ci_from_profile(profile, a.alpha);
  json warnings = json::array();
  json out{{"effect", a.effect},
           {"estimate", ci.estimate},
           {"alpha", ci.alpha},
           {"level", ci.level},
           {"lower", ci.lower},
           {"upper", ci.upper},
           {"grid_step", profile.grid_step},
           {"grid_points", profile.grid.size()},
           {"n_permutations", profile.n_permutations},
           {"seed", seed.value},
           {"seed_drawn", seed.drawn}};
  out["diagnostics"] = diagnostics_json(ds, warnings);
  out["warnings"] = warnings;
  print_warnings(warnings);
  emit(out);
  return 0;
}

struct ExperimentArgs {
  std::string plan;
  std::string out_dir;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
};

json run_plan(const PlanDocument& doc, const fs::path& dir, std::size_t workers,
              const std::vector<std::string>& command, bool seed_drawn) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json summary{{"name", doc.name}, {"dir", dir.string()}};
  switch (doc.study) {
    case StudyKind::curves: {
      const auto result = run_experiment(doc.curves, workers);
      write_experiment_outputs(result, dir);
      std::size_t degenerate = 0;
      for (const auto& rec : result.records) {
        degenerate += std::any_of(rec.outcomes.begin(), rec.outcomes.end(),
                                  [](const MethodOutcome& o) { return o.degenerate(); });
      }
      summary["replicates"] = result.records.size();
      summary["replicates_with_degenerate_method"] = degenerate;
      break;
    }
    case StudyKind::consistency: {
      const auto rows = consistency_study(doc.consistency, workers);
      write_file(dir / "consistency.csv", [&](std::ostream& os) { write_consistency_csv(rows, os); });
      summary["rows"] = rows.size();
      break;
    }
    case StudyKind::coverage: {
      const auto rows = coverage_study(doc.coverage, workers);
      write_file(dir / "coverage.csv", [&](std::ostream& os) { write_coverage_csv(rows, os); });
      summary["rows"] = rows.size();
      break;
    }
  }
  write_manifest(make_manifest(command, to_json(doc), doc.seed(), seed_drawn), dir / "manifest.json");
  return summary;
}

int run_experiment_cmd(const ExperimentArgs& a, const std::vector<std::string>& command) {
  const fs::path out_dir(a.out_dir);
  json summaries = json::array();
  if (a.plan == "paper_suite") {
    const auto seed = resolve_seed(a.seed);
    for (const auto& doc : paper_suite(seed.value)) {
      summaries.push_back(run_plan(doc, out_dir / doc.name, a.workers, command, seed.drawn));
    }
  } else {
    auto doc = plan_from_json(load_json_file(a.plan));
    bool drawn = false;
    if (a.seed || !doc.has_seed) {
      const auto seed = resolve_seed(a.seed);
      doc.set_seed(seed.value);
      drawn = seed.drawn;
    }
    summaries.push_back(run_plan(doc, out_dir / doc.name, a.workers, command, drawn));
  }
  emit(json{{"experiments", summaries}});
  return 0;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int run_report(const ReportArgs& a) {
  std::vector<fs::path> curve_files;
  for (const auto& input : a.inputs) {
    const fs::path p(input);
    if (!fs::exists(p)) throw IoError("no such file or directory: " + input);
    if (fs::is_regular_file(p)) {
      curve_files.push_back(p);
      continue;
    }
    for (const auto& entry : fs::recursive_directory_iterator(p)) {
      if (entry.is_regular_file() && entry.path().filename() == "curves.csv") {
        curve_files.push_back(entry.path());
      }
    }
  }
  std::sort(curve_files.begin(), curve_files.end());

  std::ostringstream report;
  report << "experiment,kind,method,effect,alpha,rate,n_replicates,n_degenerate,mc_std_error\n";
  for (const auto& file : curve_files) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    const std::string experiment = file.parent_path().filename().string();
    std::string line;
    if (!std::getline(in, line) || line.rfind("kind,method,effect,alpha", 0) != 0) {
      throw placeboiv::ParseError(file.string() + ": not a curve table");
    }
    while (std::getline(in, line)) {
      if (!line.empty()) report << experiment << ',' << line << '\n';
    }
  }
  if (a.out.empty()) {
    std::cout << report.str();
  } else {
    write_file(a.out, [&](std::ostream& os) { os << report.str(); });
  }
  return 0;
}

int report_error(const std::string& name, const std::string& what, int code) {
  std::cerr << "error: " << name << ": " << what << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Placebo and treatment effect estimation with instrumental variables"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PLACEBOIV_VERSION);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic trial dataset");
  simulate->add_option("config", sim.config, "Scenario + parameter point JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out,-o", sim.out, "Dataset CSV to write")->required();
  simulate->add_option("--seed", sim.seed, "Master seed (drawn when absent)");
  std::size_t ignored_workers = 1;
  simulate->add_option("--workers,-j", ignored_workers, "Accepted for symmetry; generation is serial");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Point estimates and diagnostics");
  estimate->add_option("data", est.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  estimate->add_option("--effect", est.effect, "psi, beta or all")->check(CLI::IsMember({"psi", "beta", "all"}));
  estimate->add_flag("--covariates", est.covariates, "Also report estimates adjusted for c_* columns");

  TestArgs tst;
  auto* test = app.add_subcommand("test", "Randomization test of H0: effect = 0");
  test->add_option("data", tst.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  test->add_option("--effect", tst.effect, "psi or beta")->check(CLI::IsMember({"psi", "beta"}));
  test->add_option("--method", tst.method, "psi: placebo|itt; beta: two_step|unadjusted");
  test->add_option("--permutations,-B", tst.permutations, "Number of permutations")->check(CLI::Range(1, 100000000));
  test->add_option("--seed", tst.seed, "Permutation seed (drawn when absent)");
  test->add_option("--workers,-j", tst.workers, "Threads for permutation evaluation")->check(CLI::Range(1, 1024));
  test->add_option("--out,-o", tst.out, "Optional CSV with the result row");

  CiArgs ci;
  auto* cic = app.add_subcommand("ci", "Confidence interval by inverting shifted-null tests");
  cic->add_option("data", ci.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  cic->add_option("--effect", ci.effect, "psi or beta")->check(CLI::IsMember({"psi", "beta"}));
  cic->add_option("--alpha", ci.alpha, "One-sided level; the interval covers 1 - 2 alpha")->check(CLI::Range(1e-9, 0.4999999));
  cic->add_option("--permutations,-B", ci.permutations, "Number of permutations")->check(CLI::Range(1, 100000000));
  cic->add_option("--grid-step", ci.grid_step, "Profile grid step (default from the permutation spread)")->check(CLI::PositiveNumber);
  cic->add_option("--seed", ci.seed, "Permutation seed (drawn when absent)");
  cic->add_option("--workers,-j", ci.workers, "Threads for permutation evaluation")->check(CLI::Range(1, 1024));
  cic->add_option("--profile-out", ci.profile_out, "Optional CSV of the p-value profile");

  ExperimentArgs exp;
  auto* experiment = app.add_subcommand("experiment", "Run a simulation study plan");
  experiment->add_option("plan", exp.plan, "Plan JSON, or paper_suite")->required();
  experiment->add_option("--out-dir,-o", exp.out_dir, "Output directory")->required();
  experiment->add_option("--workers,-j", exp.workers, "Replicate worker threads")->check(CLI::Range(1, 1024));
  experiment->add_option("--seed", exp.seed, "Master seed (overrides the plan)");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Merge curve tables into one long CSV");
  report->add_option("inputs", rep.inputs, "curves.csv files or directories to search")->required();
  report->add_option("--out,-o", rep.out, "Output CSV (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  const auto command = recorded_command(argc, argv);
  try {
    if (*simulate) return run_simulate(sim, command);
    if (*estimate) return run_estimate(est);
    if (*test) return run_test(tst, command);
    if (*cic) return run_ci(ci, command);
    if (*experiment) {
      if (exp.plan != "paper_suite" && !fs::exists(exp.plan)) {
        return report_error("IoError", "no such plan file: " + exp.plan, kExitIo);
      }
      return run_experiment_cmd(exp, command);
    }
    if (*report) return run_report(rep);
  } catch (const ValidationError& e) {
    for (const auto& issue : e.issues()) {
      std::cerr << "  " << to_string(issue.kind) << " column=" << issue.column << " row=" << issue.row << '\n';
    }
    return report_error(e.name(), e.what(), kExitValidation);
  } catch (const DegenerateInstrument& e) {
    return report_error(e.name(), e.what(), kExitDegenerate);
  } catch (const EmptyArm& e) {
    return report_error(e.name(), e.what(), kExitDegenerate);
  } catch (const RankDeficient& e) {
    return report_error(e.name(), e.what(), kExitDegenerate);
  } catch (const ProfileTooNarrow& e) {
    return report_error(e.name(), e.what(), kExitDegenerate);
  } catch (const IoError& e) {
    return report_error(e.name(), e.what(), kExitIo);
  } catch (const Error& e) {
    return report_error(e.name(), e.what(), kExitValidation);
  } catch (const std::invalid_argument& e) {
    return report_error("InvalidArgument", e.what(), kExitValidation);
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("IoError", e.what(), kExitIo);
  }
  return 0;
}
