#include "mtbias/estimation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include "mtbias/error.hpp"
#include "mtbias/numeric.hpp"
#include "mtbias/rng.hpp"

namespace mtbias {

std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::Naive: return "naive";
    case Estimator::IPTW: return "IPTW";
    case Estimator::IPTW_T: return "IPTW-T";
    case Estimator::TAC: return "TAC";
    case Estimator::RMT: return "RMT";
    case Estimator::TAC_RMT: return "TAC+RMT";
  }
  return "naive";
}

Estimator parse_estimator(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "NAIVE") return Estimator::Naive;
  if (s == "IPTW") return Estimator::IPTW;
  if (s == "IPTW-T" || s == "IPTW_T") return Estimator::IPTW_T;
  if (s == "TAC") return Estimator::TAC;
  if (s == "RMT") return Estimator::RMT;
  if (s == "TAC+RMT" || s == "TAC_RMT") return Estimator::TAC_RMT;
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + std::string(name) + "'");
}

std::vector<Estimator> default_estimators() {
  return {Estimator::Naive, Estimator::IPTW, Estimator::IPTW_T, Estimator::TAC, Estimator::RMT};
}

std::vector<Estimator> all_estimators() {
  auto m = default_estimators();
  m.push_back(Estimator::TAC_RMT);
  return m;
}

WeightVector estimator_weights(WeightEngine& engine, Estimator e, std::size_t n) {
  switch (e) {
    case Estimator::Naive: {
      WeightVector w;
      w.method = "naive";
      w.values.assign(n, 1.0);
      return w;
    }
    case Estimator::IPTW: return engine.iptw();
    case Estimator::IPTW_T: return engine.iptw_t();
    case Estimator::TAC: return engine.tac();
    case Estimator::RMT: return engine.rmt();
    case Estimator::TAC_RMT: return engine.tac_rmt();
  }
  throw Error(ErrorCode::InvalidConfig, "unknown estimator");
}

namespace {

struct Arm {
  std::vector<double> y, w;
};

std::pair<Arm, Arm> arms(const PanelDataset& data, std::span<const double> weights) {
  if (weights.size() != data.size())
    throw Error(ErrorCode::InvalidValue, "weights do not match the dataset size");
  Arm treated, control;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ind = data.individuals[i];
    if (!ind.observed) continue;
    if (ind.always_treated()) {
      treated.y.push_back(ind.outcome);
      treated.w.push_back(weights[i]);
    } else if (ind.never_treated()) {
      control.y.push_back(ind.outcome);
      control.w.push_back(weights[i]);
    }
  }
  if (treated.y.empty()) throw Error(ErrorCode::EmptyArm, "no observed always-treated individuals");
  if (control.y.empty()) throw Error(ErrorCode::EmptyArm, "no observed never-treated individuals");
  return {std::move(treated), std::move(control)};
}

double weighted_mean(const Arm& a) {
  CompensatedSum num, den;
  for (std::size_t i = 0; i < a.y.size(); ++i) {
    num.add(a.w[i] * a.y[i]);
    den.add(a.w[i]);
  }
  if (!(den.value() > 0)) throw Error(ErrorCode::EmptyArm, "arm has zero total weight");
  return num.value() / den.value();
}

double arm_variance(const Arm& a) {
  const double m = weighted_mean(a);
  CompensatedSum num, den;
  for (std::size_t i = 0; i < a.y.size(); ++i) {
    num.add(a.w[i] * a.w[i] * (a.y[i] - m) * (a.y[i] - m));
    den.add(a.w[i]);
  }
  return num.value() / (den.value() * den.value());
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

double ate_hat(const PanelDataset& data, std::span<const double> weights) {
  const auto [treated, control] = arms(data, weights);
  return weighted_mean(treated) - weighted_mean(control);
}

StandardError robust_se(const PanelDataset& data, std::span<const double> weights) {
  const auto [treated, control] = arms(data, weights);
  StandardError se;
  se.value = std::sqrt(arm_variance(treated) + arm_variance(control));
  se.low_reliability = treated.y.size() < 2 || control.y.size() < 2;
  return se;
}

EstimateReport summarize_estimates(Estimator method, std::vector<double> estimates, double truth,
                                   std::size_t failures, std::size_t n) {
  EstimateReport r;
  r.method = method;
  r.true_value = truth;
  r.failures = failures;
  r.n = n;
  r.replications = estimates.size();
  r.absolute_bias = std::abs(truth) < 1e-6;
  if (!estimates.empty()) {
    const double R = static_cast<double>(estimates.size());
    r.estimate = compensated_mean(estimates);
    CompensatedSum ss;
    for (double e : estimates) ss.add((e - r.estimate) * (e - r.estimate));
    const double variance = ss.value() / R;
    r.sd = std::sqrt(variance);
    r.bias = r.estimate - truth;
    r.mse = r.bias * r.bias + variance;
    const double scale = r.absolute_bias ? 1.0 : 100.0 / std::abs(truth);
    r.pct_bias = r.absolute_bias ? r.bias : 100.0 * r.bias / truth;
    r.mc_se = scale * r.sd / std::sqrt(R);
  }
  r.estimates = std::move(estimates);
  return r;
}

std::vector<EstimateReport> monte_carlo(const ScenarioConfig& config, const std::vector<Estimator>& methods,
                                        const MonteCarloOptions& options) {
  validate(config);
  if (options.reps < 2) throw Error(ErrorCode::InvalidConfig, "Monte Carlo needs at least 2 replications");
  if (methods.empty()) throw Error(ErrorCode::InvalidConfig, "no methods requested");
  const double truth = true_ate(config, options.n_oracle, options.oracle_seed);
  const CounterRng master(config.seed);

  // results[m][r]; NaN marks a failed replication.
  std::vector<std::vector<double>> results(methods.size(), std::vector<double>(options.reps));
  auto run = [&](std::size_t r) {
    const auto data = to_panel(simulate_draws(config, config.n, master.substream(r)), config.follow_ups);
    std::optional<WeightEngine> engine;
    try {
      engine.emplace(data);
    } catch (const Error&) {
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      double value = std::nan("");
      try {
        if (engine || methods[m] == Estimator::Naive) {
          WeightVector w;
          if (methods[m] == Estimator::Naive) {
            w.values.assign(data.size(), 1.0);
          } else {
            w = estimator_weights(*engine, methods[m], data.size());
          }
          if (options.truncation && methods[m] != Estimator::Naive)
            w.values = truncate_values(w.values, options.truncation->first, options.truncation->second);
          value = ate_hat(data, w.values);
        }
      } catch (const Error&) {
        value = std::nan("");
      }
      results[m][r] = value;
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, options.reps));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < options.reps;) {
      if (failed) return;
      try {
        run(r);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<EstimateReport> out;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<double> ok;
    std::size_t failures = 0;
    for (double v : results[m]) {
      if (std::isfinite(v))
        ok.push_back(v);
      else
        ++failures;
    }
    out.push_back(summarize_estimates(methods[m], std::move(ok), truth, failures, config.n));
  }
  return out;
}

GammaSweep gamma_sweep(const ScenarioConfig& base, const std::vector<double>& gammas,
                       const std::vector<Estimator>& methods, const MonteCarloOptions& options) {
  if (!base.selection) throw Error(ErrorCode::InvalidConfig, "gamma sweep needs a scenario with selection");
  if (gammas.empty()) throw Error(ErrorCode::InvalidConfig, "empty gamma grid");
  for (std::size_t i = 1; i < gammas.size(); ++i)
    if (!(gammas[i] > gammas[i - 1])) throw Error(ErrorCode::InvalidConfig, "gamma grid must be strictly increasing");
  GammaSweep sweep;
  sweep.gammas = gammas;
  for (double g : gammas) {
    ScenarioConfig c = base;
    c.gamma = g;
    sweep.reports.push_back(monte_carlo(c, methods, options));
  }
  return sweep;
}

double translate_treatment(std::span<const double> times, std::span<const double> treatment) {
  if (times.empty() || treatment.size() + 1 != times.size())
    throw Error(ErrorCode::InvalidValue, "need one treatment value per interval between measurement times");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw Error(ErrorCode::NonMonotoneTimes, "measurement times must be strictly increasing");
  CompensatedSum s;
  for (std::size_t k = 1; k < times.size(); ++k) s.add((times[k] - times[k - 1]) * treatment[k - 1]);
  return s.value();
}

std::string render_reports_tsv(const std::vector<EstimateReport>& reports) {
  std::string out = "Technique\tEstimate\tTrue value\t% bias\tSD\tMSE\n";
  for (const auto& r : reports) {
    out += std::string(estimator_name(r.method)) + "\t" + fixed(r.estimate) + "\t" + fixed(r.true_value) + "\t" +
           fixed(r.pct_bias) + (r.absolute_bias ? " (abs)" : "") + "\t" + fixed(r.sd) + "\t" + fixed(r.mse) + "\n";
  }
  return out;
}

namespace {

nlohmann::json report_json(const EstimateReport& r) {
  nlohmann::json j;
  j["method"] = estimator_name(r.method);
  j["estimate"] = r.estimate;
  j["true_value"] = r.true_value;
  j["bias"] = r.bias;
  j["pct_bias"] = r.pct_bias;
  j["absolute_bias"] = r.absolute_bias;
  j["sd"] = r.sd;
  j["mse"] = r.mse;
  j["mc_se"] = r.mc_se;
  j["replications"] = r.replications;
  j["failures"] = r.failures;
  j["n"] = r.n;
  return j;
}

nlohmann::json distribution_json(const Distribution& d) {
  return {{"min", d.min}, {"p1", d.p1},   {"p25", d.p25}, {"median", d.median},
          {"p75", d.p75}, {"p99", d.p99}, {"max", d.max}, {"mean", d.mean}};
}

}  // namespace

std::string render_reports_json(const std::vector<EstimateReport>& reports) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(report_json(r));
  return j.dump(2) + "\n";
}

std::string render_sweep_csv(const GammaSweep& sweep) {
  std::string out = "gamma,method,pct_bias\n";
  for (std::size_t g = 0; g < sweep.gammas.size(); ++g)
    for (const auto& r : sweep.reports[g])
      out += fixed(sweep.gammas[g], 2) + "," + std::string(estimator_name(r.method)) + "," + fixed(r.pct_bias) + "\n";
  return out;
}

std::string render_sweep_json(const GammaSweep& sweep) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t g = 0; g < sweep.gammas.size(); ++g) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : sweep.reports[g]) rows.push_back(report_json(r));
    j.push_back({{"gamma", sweep.gammas[g]}, {"reports", rows}});
  }
  return j.dump(2) + "\n";
}

std::vector<AnalysisRow> analyze(const PanelDataset& data, const std::vector<Estimator>& methods,
                                 std::optional<std::pair<double, double>> truncation) {
  WeightEngine engine(data);
  std::vector<AnalysisRow> rows;
  for (auto m : methods) {
    auto w = estimator_weights(engine, m, data.size());
    if (truncation && m != Estimator::Naive) w = truncate(w, truncation->first, truncation->second);
    AnalysisRow row;
    row.method = m;
    row.estimate = ate_hat(data, w.values);
    row.se = robust_se(data, w.values);
    row.positivity = positivity_report(w);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_analysis_tsv(const std::vector<AnalysisRow>& rows) {
  std::string out = "Technique\tEstimate\tRobust SE\tMin weight\tMax weight\tClamped\n";
  for (const auto& r : rows) {
    out += std::string(estimator_name(r.method)) + "\t" + fixed(r.estimate) + "\t" + fixed(r.se.value) +
           (r.se.low_reliability ? " (low reliability)" : "") + "\t" + fixed(r.positivity.weights.min) + "\t" +
           fixed(r.positivity.weights.max) + "\t" + std::to_string(r.positivity.clamped) + "\n";
  }
  for (const auto& r : rows)
    for (const auto& w : r.positivity.warnings) out += "# " + std::string(estimator_name(r.method)) + ": " + w + "\n";
  return out;
}

std::string render_analysis_json(const std::vector<AnalysisRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"method", estimator_name(r.method)},
                 {"estimate", r.estimate},
                 {"robust_se", r.se.value},
                 {"low_reliability", r.se.low_reliability},
                 {"positivity",
                  {{"weights", distribution_json(r.positivity.weights)},
                   {"denominator_probabilities", distribution_json(r.positivity.denominator_probabilities)},
                   {"clamped", r.positivity.clamped},
                   {"warnings", r.positivity.warnings}}}});
  }
  return j.dump(2) + "\n";
}

}  // namespace mtbias
