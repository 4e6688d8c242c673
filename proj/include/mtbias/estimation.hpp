#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtbias/panel.hpp"
#include "mtbias/simulator.hpp"
#include "mtbias/weighting.hpp"

namespace mtbias {

enum class Estimator { Naive, IPTW, IPTW_T, TAC, RMT, TAC_RMT };

std::string_view estimator_name(Estimator e);
/// Accepts the display names ("naive", "IPTW", "IPTW-T", "TAC", "RMT",
/// "TAC+RMT") case-insensitively. Throws InvalidConfig.
Estimator parse_estimator(std::string_view name);

/// Naive, IPTW, IPTW-T, TAC and RMT.
std::vector<Estimator> default_estimators();
/// default_estimators() plus TAC+RMT.
std::vector<Estimator> all_estimators();

/// Weights for `e` (all ones for Naive), computed through `engine`.
WeightVector estimator_weights(WeightEngine& engine, Estimator e, std::size_t n);

/// Weighted mean outcome among observed always-treated minus observed
/// never-treated individuals. Throws EmptyArm.
double ate_hat(const PanelDataset& data, std::span<const double> weights);

struct StandardError {
  double value = 0.0;
  /// An arm has a single individual (its variance contribution is zero).
  bool low_reliability = false;
};

/// sqrt of sum over arms of sum w^2 (y - ybar_w)^2 / (sum w)^2. Throws EmptyArm.
StandardError robust_se(const PanelDataset& data, std::span<const double> weights);

struct EstimateReport {
  Estimator method = Estimator::Naive;
  double estimate = 0.0;     // mean over successful replications
  double true_value = 0.0;
  double bias = 0.0;         // estimate - true_value
  double pct_bias = 0.0;     // 100 * bias / true_value, or bias when absolute_bias
  bool absolute_bias = false;  // |true_value| < 1e-6
  double sd = 0.0;           // 1/R denominator
  double mse = 0.0;          // bias^2 + sd^2
  double mc_se = 0.0;        // Monte Carlo standard error of pct_bias
  std::size_t replications = 0;  // successful
  std::size_t failures = 0;
  std::size_t n = 0;
  std::vector<double> estimates;  // by replication index, failures omitted
};

struct MonteCarloOptions {
  std::size_t reps = 500;
  unsigned threads = 0;          // 0: hardware concurrency
  std::size_t n_oracle = 200000;
  std::uint64_t oracle_seed = kOracleSeed;
  /// Optional percentile truncation applied to every weighted estimator.
  std::optional<std::pair<double, double>> truncation;
};

/// Simulates `reps` datasets of config.n individuals, replication r drawn
/// from CounterRng(config.seed).substream(r), and summarizes each method.
/// Replications where a method fails are skipped for that method and counted.
/// Output is independent of the thread count.
std::vector<EstimateReport> monte_carlo(const ScenarioConfig& config, const std::vector<Estimator>& methods,
                                        const MonteCarloOptions& options = {});

/// Summary of a set of replicate estimates against a known truth.
EstimateReport summarize_estimates(Estimator method, std::vector<double> estimates, double truth,
                                   std::size_t failures, std::size_t n);

struct GammaSweep {
  std::vector<double> gammas;
  std::vector<std::vector<EstimateReport>> reports;  // reports[g][method]
};

/// Monte Carlo at each gamma. Needs a selection scenario and a strictly
/// increasing grid (InvalidConfig).
GammaSweep gamma_sweep(const ScenarioConfig& base, const std::vector<double>& gammas,
                       const std::vector<Estimator>& methods, const MonteCarloOptions& options = {});

/// Total exposure sum_{k=1}^{K} (T_k - T_{k-1}) * A_{k-1}, where `treatment`
/// holds A at T_0 .. T_{K-1}. Throws NonMonotoneTimes, InvalidValue on a
/// length mismatch.
double translate_treatment(std::span<const double> times, std::span<const double> treatment);

/// Table layout: Technique, Estimate, True value, % bias, SD, MSE.
std::string render_reports_tsv(const std::vector<EstimateReport>& reports);
std::string render_reports_json(const std::vector<EstimateReport>& reports);
/// Long CSV with header gamma,method,pct_bias.
std::string render_sweep_csv(const GammaSweep& sweep);
std::string render_sweep_json(const GammaSweep& sweep);

struct AnalysisRow {
  Estimator method = Estimator::Naive;
  double estimate = 0.0;
  StandardError se;
  PositivityReport positivity;
};

/// Estimates for each method on one dataset, with optional truncation of the
/// weights. Errors propagate (EmptyArm, UnsupportedData, ...).
std::vector<AnalysisRow> analyze(const PanelDataset& data, const std::vector<Estimator>& methods,
                                 std::optional<std::pair<double, double>> truncation);
std::string render_analysis_tsv(const std::vector<AnalysisRow>& rows);
std::string render_analysis_json(const std::vector<AnalysisRow>& rows);

}  // namespace mtbias
