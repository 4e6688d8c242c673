#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mtbias/dataio.hpp"
#include "mtbias/error.hpp"
#include "mtbias/estimation.hpp"
#include "mtbias/graph.hpp"
#include "mtbias/paths.hpp"
#include "mtbias/simulator.hpp"

namespace mtbias::cli {

namespace {

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<Estimator> parse_methods(const std::string& list) {
  std::vector<Estimator> out;
  for (const auto& m : split(list)) out.push_back(parse_estimator(m));
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "empty method list");
  return out;
}

std::optional<std::pair<double, double>> parse_truncation(const std::string& spec) {
  const auto parts = split(spec);
  if (parts.size() != 2) throw Error(ErrorCode::InvalidConfig, "--truncate expects lo,hi");
  const double lo = parse_double(parts[0], "--truncate lower percentile");
  const double hi = parse_double(parts[1], "--truncate upper percentile");
  if (!(lo >= 0 && lo < hi && hi <= 100))
    throw Error(ErrorCode::InvalidConfig, "--truncate needs 0 <= lo < hi <= 100");
  if (lo == 0 && hi == 100) return std::nullopt;
  return std::make_pair(lo, hi);
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_file(path, text);
}

struct ScenarioFlags {
  std::string scenario;
  std::string config_path;
  std::size_t n = 2000;
  std::uint64_t seed = 1;
  std::optional<double> gamma;
  int follow_ups = 1;

  void attach(CLI::App* app) {
    auto* s = app->add_option("--scenario", scenario, "DC, CMV, CUV or CUV+Selection (also S4)");
    s->excludes(app->add_option("--config", config_path, "ScenarioConfig JSON file"));
    app->add_option("--n", n, "individuals per dataset")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "master seed");
    app->add_option("--gamma", gamma, "selection strength (CUV+Selection only)");
    app->add_option("--follow-ups", follow_ups, "follow-up occasions K")->check(CLI::PositiveNumber);
  }

  ScenarioConfig build() const {
    ScenarioConfig c;
    if (!config_path.empty()) {
      c = config_from_json(read_file(config_path));
    } else {
      if (scenario.empty()) throw Error(ErrorCode::InvalidConfig, "--scenario or --config is required");
      c = preset(parse_scenario(scenario));
      c.follow_ups = follow_ups;
    }
    c.n = n;
    c.seed = seed;
    if (gamma) {
      if (!c.selection) throw Error(ErrorCode::InvalidConfig, "--gamma only applies to the CUV+Selection scenario");
      c.gamma = *gamma;
    }
    validate(c);
    return c;
  }
};

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

int check_failures(const std::vector<EstimateReport>& reports, std::size_t reps, std::ostream& err) {
  int code = kExitOk;
  for (const auto& r : reports) {
    if (r.failures * 100 > reps) {
      err << "error: " << estimator_name(r.method) << " failed in " << r.failures << " of " << reps
          << " replications\n";
      code = kExitReplications;
    } else if (r.failures > 0) {
      err << "warning: " << estimator_name(r.method) << " failed in " << r.failures << " of " << reps
          << " replications\n";
    }
  }
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bias from irregular measurement times: path analysis, simulation and reweighting", "mtbias"};
  app.require_subcommand(1);

  // paths
  auto* paths = app.add_subcommand("paths", "enumerate and classify backdoor paths of a graph file");
  std::string graph_path;
  std::string condition;
  bool json = false;
  bool not_agnostic = false;
  bool unequal = false;
  paths->add_option("graph", graph_path, "graph file")->required();
  paths->add_option("--condition", condition, "comma-separated conditioning set (e.g. a selection node)");
  paths->add_flag("--not-time-agnostic", not_agnostic, "target treatment history depends on measurement times");
  paths->add_flag("--unequal-counts", unequal, "individuals have different numbers of measurements");
  paths->add_flag("--json", json, "JSON output");

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate one dataset as long-format CSV");
  ScenarioFlags sim_flags;
  std::string out_path;
  sim_flags.attach(simulate_cmd);
  simulate_cmd->add_option("--out", out_path, "output CSV (stdout when absent)");

  // reproduce
  auto* reproduce = app.add_subcommand("reproduce", "Monte Carlo comparison of estimators for one scenario");
  ScenarioFlags rep_flags;
  std::size_t reps = 500;
  unsigned threads = default_threads();
  std::string methods;
  std::string truncate_spec = "0,100";
  bool full = false;
  rep_flags.attach(reproduce);
  reproduce->add_option("--reps", reps, "replications")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 30));
  reproduce->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  reproduce->add_option("--methods", methods, "comma-separated: naive,IPTW,IPTW-T,TAC,RMT,TAC+RMT");
  reproduce->add_option("--truncate", truncate_spec, "percentile truncation lo,hi (default off)");
  reproduce->add_flag("--full", full, "10000 replications of 2000 individuals");
  reproduce->add_option("--out", out_path, "output file (stdout when absent)");
  reproduce->add_flag("--json", json, "JSON output");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "selection-strength sweep for the CUV+Selection scenario");
  std::size_t sweep_n = 2000;
  std::uint64_t sweep_seed = 1;
  std::string gammas = "0,0.5,1,1.5,2";
  sweep->add_option("--gammas", gammas, "comma-separated, strictly increasing");
  sweep->add_option("--reps", reps, "replications per gamma")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 30));
  sweep->add_option("--n", sweep_n, "individuals per dataset")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "master seed");
  sweep->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--methods", methods, "comma-separated estimators");
  sweep->add_flag("--full", full, "10000 replications per gamma");
  sweep->add_option("--out", out_path, "output CSV (stdout when absent)");
  sweep->add_flag("--json", json, "JSON output");

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "estimate the effect of always vs never treatment from a CSV panel");
  std::string csv_path, schema_path, covariates, categorical;
  PanelSchema schema;
  std::string observed_col = "observed";
  std::string analyze_truncate = "1,99";
  std::string analyze_methods = "naive,IPTW,TAC,RMT";
  analyze_cmd->add_option("csv", csv_path, "long-format panel CSV")->required();
  auto* schema_opt = analyze_cmd->add_option("--schema", schema_path, "PanelSchema JSON file");
  analyze_cmd->add_option("--id", schema.id)->excludes(schema_opt);
  analyze_cmd->add_option("--occasion", schema.occasion)->excludes(schema_opt);
  analyze_cmd->add_option("--time", schema.time)->excludes(schema_opt);
  analyze_cmd->add_option("--covariates", covariates, "comma-separated covariate columns")->excludes(schema_opt);
  analyze_cmd->add_option("--categorical", categorical, "covariates to one-hot encode")->excludes(schema_opt);
  analyze_cmd->add_option("--treatment", schema.treatment)->excludes(schema_opt);
  analyze_cmd->add_option("--outcome", schema.outcome)->excludes(schema_opt);
  analyze_cmd->add_option("--observed", observed_col)->excludes(schema_opt);
  analyze_cmd->add_option("--methods", analyze_methods, "comma-separated estimators");
  analyze_cmd->add_option("--truncate", analyze_truncate, "percentile truncation lo,hi; 0,100 disables");
  analyze_cmd->add_flag("--json", json, "JSON output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (*paths) {
      std::vector<std::string> z = split(condition);
      const auto graph = load_graph(graph_path);
      const auto report = analyze_paths(graph, z, !not_agnostic, !unequal);
      out << (json ? render_json(report) : render_text(report));
      return kExitOk;
    }
    if (*simulate_cmd) {
      const auto config = sim_flags.build();
      const auto data = simulate(config);
      emit(format_panel_csv(data), out_path, out);
      std::size_t observed = 0, treated = 0, control = 0;
      for (const auto& ind : data.individuals) {
        observed += ind.observed;
        treated += ind.observed && ind.always_treated();
        control += ind.observed && ind.never_treated();
      }
      auto& summary = out_path.empty() ? err : out;
      summary << "scenario " << scenario_name(config.scenario) << ": n=" << data.size() << " observed=" << observed
              << " always-treated=" << treated << " never-treated=" << control << "\n";
      return kExitOk;
    }
    if (*reproduce) {
      auto config = rep_flags.build();
      MonteCarloOptions opts;
      opts.reps = full ? 10000 : reps;
      if (full) config.n = 2000;
      opts.threads = threads;
      opts.truncation = parse_truncation(truncate_spec);
      const auto list = !methods.empty() ? parse_methods(methods)
                        : config.selection ? all_estimators()
                                           : default_estimators();
      const auto reports = monte_carlo(config, list, opts);
      emit(json ? render_reports_json(reports) : render_reports_tsv(reports), out_path, out);
      return check_failures(reports, opts.reps, err);
    }
    if (*sweep) {
      auto config = preset(ScenarioId::CUVSelection);
      config.n = sweep_n;
      config.seed = sweep_seed;
      std::vector<double> grid;
      for (const auto& g : split(gammas)) grid.push_back(parse_double(g, "--gammas"));
      MonteCarloOptions opts;
      opts.reps = full ? 10000 : reps;
      opts.threads = threads;
      const auto list = methods.empty() ? all_estimators() : parse_methods(methods);
      const auto result = gamma_sweep(config, grid, list, opts);
      emit(json ? render_sweep_json(result) : render_sweep_csv(result), out_path, out);
      int code = kExitOk;
      for (const auto& reports : result.reports) code = std::max(code, check_failures(reports, opts.reps, err));
      return code;
    }
    if (*analyze_cmd) {
      if (!schema_path.empty()) {
        schema = PanelSchema::from_json(read_file(schema_path));
      } else {
        schema.covariates = split(covariates);
        schema.categorical = split(categorical);
        schema.observed = observed_col;
      }
      const auto data = load_panel_csv(csv_path, schema);
      const auto rows = analyze(data, parse_methods(analyze_methods), parse_truncation(analyze_truncate));
      out << (json ? render_analysis_json(rows) : render_analysis_tsv(rows));
      return kExitOk;
    }
  } catch (const Error& e) {
    if (const auto* g = dynamic_cast<const GraphError*>(&e)) {
      err << "error: invalid graph\n";
      for (const auto& issue : g->issues())
        err << "  line " << issue.line << ": " << to_string(issue.code) << ": " << issue.message << "\n";
    } else {
      err << "error: " << e.what() << "\n";
    }
    return e.code() == ErrorCode::EmptyArm ? kExitEstimation : kExitInput;
  }
  return kExitInput;
}

}  // namespace mtbias::cli
