#include <doctest.h>

#include <cmath>
#include <random>

#include "mtbias/error.hpp"
#include "mtbias/glm.hpp"

using namespace mtbias;
using namespace mtbias::glm;

namespace {

struct Instance {
  DesignMatrix x;
  std::vector<double> y, w;
};

Instance random_instance(unsigned seed, std::size_t n, std::size_t p) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif(0.2, 2.0);
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p; ++j) {
    names.push_back("x" + std::to_string(j));
    for (auto& v : cols[j]) v = norm(rng);
  }
  std::vector<double> y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = 0.3;
    for (std::size_t j = 0; j < p; ++j) eta += (j % 2 ? -0.7 : 0.5) * cols[j][i];
    y[i] = unif(rng) / 2.0 - 0.1 < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    w[i] = unif(rng);
  }
  return {DesignMatrix::with_intercept(names, cols, n), y, w};
}

}  // namespace

TEST_CASE("inverse logit") {
  CHECK(inv_logit(0.0) == 0.5);
  for (double x : {-30.0, -2.5, -0.1, 0.7, 3.0, 40.0}) CHECK(inv_logit(x) + inv_logit(-x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(inv_logit(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  CHECK(inv_logit(-800.0) >= 0.0);
  CHECK(inv_logit(800.0) == 1.0);
  CHECK(inv_logit(-1.0) < inv_logit(-0.5));
}

TEST_CASE("intercept-only fit with balanced response gives zero") {
  std::vector<double> y = {0, 1, 0, 1, 1, 0};
  std::vector<double> w(y.size(), 1.0);
  auto x = DesignMatrix::with_intercept({}, {}, y.size());
  auto m = fit_weighted_logistic(x, y, w);
  CHECK(m.converged);
  CHECK(std::abs(m.coefficient(kIntercept)) < 1e-12);
}

TEST_CASE("saturated fit matches empirical log-odds") {
  // x = 0: 3 of 10 positive; x = 1: 7 of 10 positive
  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(0);
    y.push_back(i < 3);
  }
  for (int i = 0; i < 10; ++i) {
    x.push_back(1);
    y.push_back(i < 7);
  }
  std::vector<double> w(y.size(), 1.0);
  auto d = DesignMatrix::with_intercept({"x"}, {x}, y.size());
  auto m = fit_weighted_logistic(d, y, w);
  REQUIRE(m.converged);
  const double lo0 = std::log(3.0 / 7.0);
  const double lo1 = std::log(7.0 / 3.0);
  CHECK(m.coefficient(kIntercept) == doctest::Approx(lo0).epsilon(1e-9));
  CHECK(m.coefficient("x") == doctest::Approx(lo1 - lo0).epsilon(1e-9));
  CHECK(predict_prob(m, {{"x", 1.0}}) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(predict_prob(m, {{"x", 0.0}}) == doctest::Approx(0.3).epsilon(1e-9));

  // doubling every weight leaves the fit unchanged
  std::vector<double> w2(y.size(), 2.0);
  auto m2 = fit_weighted_logistic(d, y, w2);
  CHECK((m2.coefficients - m.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("score equations hold at convergence") {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    auto inst = random_instance(seed, 300, 3);
    auto m = fit_weighted_logistic(inst.x, inst.y, inst.w);
    REQUIRE(m.converged);
    auto s = score(inst.x, inst.y, inst.w, m.coefficients);
    CHECK(s.cwiseAbs().maxCoeff() <= 1e-8);
    for (double p : fitted_probabilities(m, inst.x)) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("analytic gradient matches central differences") {
  for (unsigned seed = 11; seed <= 15; ++seed) {
    auto inst = random_instance(seed, 40, 2);
    Eigen::VectorXd beta(3);
    beta << 0.2, -0.4, 0.9;
    auto g = score(inst.x, inst.y, inst.w, beta);
    const double h = 1e-5;
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd up = beta, down = beta;
      up[j] += h;
      down[j] -= h;
      const double fd =
          (log_likelihood(inst.x, inst.y, inst.w, up) - log_likelihood(inst.x, inst.y, inst.w, down)) / (2 * h);
      CHECK(std::abs(fd - g[j]) <= 1e-5 * std::max(1.0, std::abs(g[j])));
    }
  }
}

TEST_CASE("prediction needs every regressor") {
  LogisticModel m;
  m.names = {kIntercept, "x"};
  m.coefficients = Eigen::Vector2d(2.0, 0.0);
  CHECK_THROWS_AS(predict_prob(m, {}), Error);
  CHECK(predict_prob(m, {{"x", 5.0}}) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  LogisticModel zero;
  zero.names = {kIntercept, "x"};
  zero.coefficients = Eigen::Vector2d::Zero();
  CHECK(predict_prob(zero, {{"x", 3.0}}) == 0.5);
}

TEST_CASE("degenerate inputs") {
  std::vector<double> y = {0, 1, 0, 1};
  std::vector<double> w(4, 1.0);
  std::vector<double> x = {1, 2, 3, 4};
  auto aliased = DesignMatrix::with_intercept({"a", "b"}, {x, x}, 4);
  CHECK_THROWS_AS(fit_weighted_logistic(aliased, y, w), Error);
  try {
    fit_weighted_logistic(aliased, y, w);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateDesign);
  }
  std::vector<double> ones = {1, 1, 1, 1};
  auto d = DesignMatrix::with_intercept({"x"}, {x}, 4);
  try {
    fit_weighted_logistic(d, ones, w);
    FAIL("expected AllOneClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllOneClass);
  }
  CHECK_THROWS_AS(DesignMatrix::with_intercept({"x"}, {{1, NAN, 2, 3}}, 4), Error);
  std::vector<double> negative = {1, -1, 1, 1};
  CHECK_THROWS_AS(fit_weighted_logistic(d, y, negative), Error);
}

TEST_CASE("separation stops without throwing") {
  std::vector<double> x = {0, 1, 2, 3, 4, 5};
  std::vector<double> y = {0, 0, 0, 1, 1, 1};
  std::vector<double> w(6, 1.0);
  auto d = DesignMatrix::with_intercept({"x"}, {x}, 6);
  LogisticModel m;
  CHECK_NOTHROW(m = fit_weighted_logistic(d, y, w));
  CHECK_FALSE(m.converged);
  CHECK(m.iterations <= 50);
}
