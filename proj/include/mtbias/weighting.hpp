#pragma once

// Stabilized inverse-probability weights for irregularly measured panels.
//
// Every probability model is a main-effects logistic regression of one
// binary variable on a set of earlier columns, fitted on all individuals.
// Constant and aliased regressors are dropped before fitting; a response
// without variation gets probability one for its realized value.
// Probabilities are those of the realized value, clamped to
// [glm::kProbabilityFloor, glm::kProbabilityCeiling].

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtbias/panel.hpp"

namespace mtbias {

struct WeightFactor {
  double numerator = 1.0;
  double denominator = 1.0;
};

struct WeightVector {
  std::string method;
  std::vector<double> values;                     // one per individual
  std::vector<std::string> factor_labels;         // e.g. "A0", "T1", "S"
  std::vector<std::vector<WeightFactor>> audit;   // audit[i][f] aligned with factor_labels
  std::size_t clamped = 0;                        // probabilities hit by the clamp
  std::vector<std::string> warnings;

  std::size_t size() const { return values.size(); }
};

/// Element-wise product of two weight vectors over the same individuals.
/// Audit trails are concatenated.
WeightVector multiply(const WeightVector& a, const WeightVector& b, std::string method);

/// Fits and caches the probability models behind every weight variant so
/// that variants sharing a model reuse the identical fit.
class WeightEngine {
 public:
  explicit WeightEngine(const PanelDataset& data);
  ~WeightEngine();
  WeightEngine(const WeightEngine&) = delete;
  WeightEngine& operator=(const WeightEngine&) = delete;

  /// prod_k P(A_k | A-bar_{k-1}) / P(A_k | A-bar_{k-1}, L-bar_k)
  WeightVector iptw();
  /// As iptw with T-bar_k in both numerator and denominator.
  WeightVector iptw_t();
  /// prod_k P(A_k | A-bar_{k-1}) / P(A_k | A-bar_{k-1}, L-bar_k, T-bar_k)
  WeightVector tac();
  /// prod_{k>=1} P(T_k | T-bar_{k-1}, A-bar_{k-1}) / P(T_k | T-bar_{k-1}, A-bar_{k-1}, L-bar_{k-1}).
  /// Needs at most two distinct times per occasion (UnsupportedData).
  WeightVector measurement_time();
  /// iptw_t times measurement_time.
  WeightVector rmt();
  /// tac times a final selection factor P(S | T-bar_K, A-bar_K) / P(S | T-bar_K, A-bar_K, L-bar_K)
  /// where S is the observed flag. The measurement after the last occasion
  /// (K + 1) is what decides whether the outcome is seen.
  WeightVector tac_rmt();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

WeightVector sw_iptw(const PanelDataset& data);
WeightVector sw_iptw_t(const PanelDataset& data);
WeightVector sw_tac(const PanelDataset& data);
WeightVector sw_t(const PanelDataset& data);
WeightVector sw_rmt(const PanelDataset& data);
WeightVector sw_tac_rmt(const PanelDataset& data);

/// Discrete-time weights SW^{A(N)} * SW^N. Treatment factors use
/// P(A_t | N-bar_t, A-bar_{t-1}) / P(A_t | N-bar_t, A-bar_{t-1}, L-bar_t);
/// measurement factors use P(N_{t+1} | N-bar_t, A-bar_t) /
/// P(N_{t+1} | N-bar_t, A-bar_t, L-bar_t) and equal 1 where N_{t+1} = 0.
WeightVector sw_dt(const DiscreteTimePanel& data);

/// Clamps values to their [lo_pct, hi_pct] percentiles (linear interpolation
/// between order statistics). Throws EmptyWeights, InvalidValue for a bad
/// percentile range.
std::vector<double> truncate_values(std::span<const double> values, double lo_pct, double hi_pct);
WeightVector truncate(const WeightVector& weights, double lo_pct, double hi_pct);

struct Distribution {
  double min = 0, p1 = 0, p25 = 0, median = 0, p75 = 0, p99 = 0, max = 0, mean = 0;
};

Distribution summarize(std::span<const double> values);

struct PositivityReport {
  Distribution weights;
  Distribution denominator_probabilities;  // realized-value probabilities in the denominators
  std::size_t clamped = 0;
  std::vector<std::string> warnings;
};

PositivityReport positivity_report(const WeightVector& weights);

}  // namespace mtbias
