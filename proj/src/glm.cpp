#include "mtbias/glm.hpp"

#include <algorithm>

#include "mtbias/error.hpp"

namespace mtbias::glm {

DesignMatrix DesignMatrix::with_intercept(std::vector<std::string> names,
                                          const std::vector<std::vector<double>>& columns,
                                          std::size_t rows) {
  if (names.size() != columns.size())
    throw Error(ErrorCode::InvalidValue, "regressor names and columns differ in count");
  DesignMatrix dm;
  dm.names_.reserve(names.size() + 1);
  dm.names_.push_back(kIntercept);
  for (auto& n : names) dm.names_.push_back(std::move(n));
  dm.values_.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(columns.size() + 1));
  dm.values_.col(0).setOnes();
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].size() != rows)
      throw Error(ErrorCode::InvalidValue, "column '" + dm.names_[j + 1] + "' has wrong length");
    for (std::size_t i = 0; i < rows; ++i) {
      const double v = columns[j][i];
      if (!std::isfinite(v))
        throw Error(ErrorCode::InvalidValue, "non-finite value in column '" + dm.names_[j + 1] + "'");
      dm.values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = v;
    }
  }
  return dm;
}

double LogisticModel::coefficient(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorCode::MissingRegressor, "model has no regressor '" + name + "'");
  return coefficients[it - names.begin()];
}

namespace {

void check_sizes(const DesignMatrix& x, std::span<const double> y, std::span<const double> w) {
  if (y.size() != x.rows() || w.size() != x.rows())
    throw Error(ErrorCode::InvalidValue, "response/weight length does not match design rows");
}

// log(1 + exp(eta)) without overflow.
double log1pexp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

}  // namespace

double log_likelihood(const DesignMatrix& x, std::span<const double> y, std::span<const double> w,
                      const Eigen::VectorXd& beta) {
  check_sizes(x, y, w);
  const Eigen::VectorXd eta = x.values() * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += w[i] * (y[i] * eta[i] - log1pexp(eta[i]));
  return ll;
}

Eigen::VectorXd score(const DesignMatrix& x, std::span<const double> y, std::span<const double> w,
                      const Eigen::VectorXd& beta) {
  check_sizes(x, y, w);
  const Eigen::VectorXd eta = x.values() * beta;
  Eigen::VectorXd r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r[i] = w[i] * (y[i] - inv_logit(eta[i]));
  return x.values().transpose() * r;
}

LogisticModel fit_weighted_logistic(const DesignMatrix& x, std::span<const double> y,
                                    std::span<const double> w, const IrlsOptions& options) {
  check_sizes(x, y, w);
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto p = static_cast<Eigen::Index>(x.cols());

  std::size_t positive = 0;
  bool saw_zero = false, saw_one = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w[i] < 0 || !std::isfinite(w[i])) throw Error(ErrorCode::InvalidValue, "weights must be finite and >= 0");
    if (y[i] != 0.0 && y[i] != 1.0) throw Error(ErrorCode::InvalidValue, "response must be 0/1");
    if (w[i] > 0) {
      ++positive;
      (y[i] == 1.0 ? saw_one : saw_zero) = true;
    }
  }
  if (positive < static_cast<std::size_t>(p))
    throw Error(ErrorCode::DegenerateDesign, "fewer positively weighted rows than regressors");
  if (!(saw_zero && saw_one)) throw Error(ErrorCode::AllOneClass, "response has a single class");

  {
    Eigen::MatrixXd scaled = x.values();
    for (Eigen::Index i = 0; i < n; ++i) scaled.row(i) *= std::sqrt(w[i]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
    if (qr.rank() < p) throw Error(ErrorCode::DegenerateDesign, "design matrix is rank deficient");
  }

  LogisticModel model;
  model.names = x.names();
  model.coefficients = Eigen::VectorXd::Zero(p);
  const auto& X = x.values();
  Eigen::VectorXd working(n), resid(n);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    model.iterations = iter;
    const Eigen::VectorXd eta = X * model.coefficients;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pr = inv_logit(eta[i]);
      working[i] = w[i] * pr * (1.0 - pr);
      resid[i] = w[i] * (y[i] - pr);
    }
    const Eigen::MatrixXd hessian = X.transpose() * working.asDiagonal() * X;
    const Eigen::VectorXd gradient = X.transpose() * resid;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(gradient);
    if (!step.allFinite()) break;
    model.coefficients += step;
    if (step.cwiseAbs().maxCoeff() < options.tolerance) {
      model.converged = true;
      break;
    }
  }
  return model;
}

double linear_predictor(const LogisticModel& model, std::span<const double> row_without_intercept) {
  if (row_without_intercept.size() + 1 != static_cast<std::size_t>(model.coefficients.size()))
    throw Error(ErrorCode::MissingRegressor, "row does not match model regressors");
  double eta = model.coefficients[0];
  for (std::size_t j = 0; j < row_without_intercept.size(); ++j)
    eta += model.coefficients[static_cast<Eigen::Index>(j + 1)] * row_without_intercept[j];
  return eta;
}

double predict_prob(const LogisticModel& model, const std::map<std::string, double>& row) {
  double eta = 0.0;
  for (std::size_t j = 0; j < model.names.size(); ++j) {
    const auto& name = model.names[j];
    if (name == kIntercept) {
      eta += model.coefficients[static_cast<Eigen::Index>(j)];
      continue;
    }
    auto it = row.find(name);
    if (it == row.end()) throw Error(ErrorCode::MissingRegressor, "row lacks regressor '" + name + "'");
    eta += model.coefficients[static_cast<Eigen::Index>(j)] * it->second;
  }
  return inv_logit(eta);
}

std::vector<double> fitted_probabilities(const LogisticModel& model, const DesignMatrix& x) {
  const Eigen::VectorXd eta = x.values() * model.coefficients;
  std::vector<double> out(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) out[static_cast<std::size_t>(i)] = inv_logit(eta[i]);
  return out;
}

}  // namespace mtbias::glm
