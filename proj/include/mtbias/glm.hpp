#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtbias::glm {

inline constexpr double kProbabilityFloor = 1e-9;
inline constexpr double kProbabilityCeiling = 1.0 - 1e-9;

inline double inv_logit(double x) {
  // Split on sign so exp() never overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double clamp_probability(double p) {
  return p < kProbabilityFloor ? kProbabilityFloor : (p > kProbabilityCeiling ? kProbabilityCeiling : p);
}

inline constexpr const char* kIntercept = "(Intercept)";

/// Row-major observations by named regressors. The first column is always the
/// intercept.
class DesignMatrix {
 public:
  /// Builds [1 | columns...]. Every column must have the same length and only
  /// finite entries (InvalidValue otherwise).
  static DesignMatrix with_intercept(std::vector<std::string> names,
                                     const std::vector<std::vector<double>>& columns, std::size_t rows);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
  const std::vector<std::string>& names() const { return names_; }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  std::vector<std::string> names_;
  Eigen::MatrixXd values_;
};

struct LogisticModel {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;

  double coefficient(const std::string& name) const;
};

struct IrlsOptions {
  double tolerance = 1e-8;  // on max |coefficient change|
  int max_iterations = 50;
};

/// Weighted log-likelihood sum_i w_i [y_i eta_i - log(1 + exp(eta_i))].
double log_likelihood(const DesignMatrix& x, std::span<const double> y, std::span<const double> w,
                      const Eigen::VectorXd& beta);
/// Gradient of log_likelihood: X' diag(w) (y - p).
Eigen::VectorXd score(const DesignMatrix& x, std::span<const double> y, std::span<const double> w,
                      const Eigen::VectorXd& beta);

/// Maximum-likelihood logistic fit by iteratively reweighted least squares.
/// Throws DegenerateDesign for rank-deficient designs (or fewer positively
/// weighted rows than columns) and AllOneClass when y does not vary among
/// positively weighted rows. Separation does not throw: the fit stops at
/// max_iterations (or when the Hessian becomes numerically singular) with
/// converged = false.
LogisticModel fit_weighted_logistic(const DesignMatrix& x, std::span<const double> y,
                                    std::span<const double> w, const IrlsOptions& options = {});

double linear_predictor(const LogisticModel& model, std::span<const double> row_without_intercept);

/// P(y = 1) for a row given by regressor name. Throws MissingRegressor.
double predict_prob(const LogisticModel& model, const std::map<std::string, double>& row);

/// Fitted P(y = 1) for every row of the design the model was fitted on.
std::vector<double> fitted_probabilities(const LogisticModel& model, const DesignMatrix& x);

}  // namespace mtbias::glm
