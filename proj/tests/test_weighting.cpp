#include <doctest.h>

#include <cmath>
#include <random>

#include "mtbias/error.hpp"
#include "mtbias/simulator.hpp"
#include "mtbias/weighting.hpp"
#include "oracles.hpp"

using namespace mtbias;

namespace {

// Stabilized weight for one binary treatment on one binary covariate by
// counting frequencies.
std::vector<double> frequency_weights(const std::vector<double>& l, const std::vector<int>& a) {
  const double n = static_cast<double>(a.size());
  double treated = 0, n_l[2] = {0, 0}, treated_l[2] = {0, 0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int g = l[i] > 0.5;
    treated += a[i];
    n_l[g] += 1;
    treated_l[g] += a[i];
  }
  std::vector<double> w;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int g = l[i] > 0.5;
    const double num = a[i] ? treated / n : 1 - treated / n;
    const double den = a[i] ? treated_l[g] / n_l[g] : 1 - treated_l[g] / n_l[g];
    w.push_back(num / den);
  }
  return w;
}

PanelDataset two_occasions(const std::vector<double>& l0, const std::vector<int>& a0, const std::vector<int>& late,
                           const std::vector<double>& l1, const std::vector<int>& a1) {
  PanelDataset d;
  d.covariate_names = {"L"};
  for (std::size_t i = 0; i < l0.size(); ++i) {
    Individual ind;
    ind.id = std::to_string(i);
    ind.occasions.push_back({0.0, {l0[i]}, a0[i]});
    ind.occasions.push_back({1.0 + late[i], {l1[i]}, a1[i]});
    d.individuals.push_back(ind);
  }
  return d;
}

PanelDataset simulated(ScenarioId id, std::size_t n, std::uint64_t seed) {
  auto c = preset(id);
  c.n = n;
  c.seed = seed;
  return simulate(c);
}

void check_audit(const WeightVector& w) {
  REQUIRE(w.audit.size() == w.values.size());
  for (std::size_t i = 0; i < w.values.size(); ++i) {
    double prod = 1.0;
    for (const auto& f : w.audit[i]) prod *= f.numerator / f.denominator;
    CHECK(std::abs(prod - w.values[i]) <= 1e-12 * w.values[i]);
    CHECK(w.values[i] > 0);
    CHECK(std::isfinite(w.values[i]));
  }
}

}  // namespace

TEST_CASE("hand fixture weights") {
  const std::vector<double> l = {0, 0, 0, 1, 1, 1};
  const std::vector<int> a = {0, 0, 1, 0, 1, 1};
  auto w = sw_iptw(oracle::single_occasion(l, a, {}));
  const auto expected = frequency_weights(l, a);
  const std::vector<double> stated = {0.75, 0.75, 1.5, 1.5, 0.75, 0.75};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(w.values[i] == doctest::Approx(expected[i]).epsilon(1e-9));
    CHECK(std::abs(w.values[i] - stated[i]) < 1e-6);
  }
  check_audit(w);
  CHECK(w.factor_labels == std::vector<std::string>{"A0"});
}

TEST_CASE("treatment independent of L gives unit weights") {
  const std::vector<double> l = {0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> a = {0, 1, 0, 1, 1, 0, 1, 0};
  auto w = sw_iptw(oracle::single_occasion(l, a, {}));
  for (double v : w.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("measurement-time weights on a hand fixture") {
  // T1 depends on L0 exactly as A does in the treatment fixture; A0 is constant.
  const std::vector<double> l0 = {0, 0, 0, 1, 1, 1};
  const std::vector<int> late = {0, 0, 1, 0, 1, 1};
  auto d = two_occasions(l0, {1, 1, 1, 1, 1, 1}, late, {0, 1, 0, 1, 0, 1}, {1, 0, 1, 0, 1, 1});
  auto w = sw_t(d);
  const auto expected = frequency_weights(l0, late);
  for (std::size_t i = 0; i < 6; ++i) CHECK(w.values[i] == doctest::Approx(expected[i]).epsilon(1e-9));
  CHECK(w.factor_labels == std::vector<std::string>{"T1"});
}

TEST_CASE("irrelevant or constant time leaves treatment weights unchanged") {
  auto base = simulated(ScenarioId::CMV, 1000, 3);
  // every individual duplicated once early and once late: time carries no
  // information about anything
  PanelDataset doubled;
  doubled.covariate_names = base.covariate_names;
  for (int late = 0; late < 2; ++late)
    for (auto ind : base.individuals) {
      ind.occasions[1].time = 1.0 + 0.5 * late;
      doubled.individuals.push_back(ind);
    }
  auto iptw = sw_iptw(doubled);
  auto iptw_t = sw_iptw_t(doubled);
  auto tac = sw_tac(doubled);
  for (std::size_t i = 0; i < doubled.size(); ++i) {
    CHECK(iptw_t.values[i] == doctest::Approx(iptw.values[i]).epsilon(1e-7));
    CHECK(tac.values[i] == doctest::Approx(iptw.values[i]).epsilon(1e-7));
  }
  // constant time: the column is dropped and the fits are the same ones
  PanelDataset flat = base;
  for (auto& ind : flat.individuals) ind.occasions[1].time = 1.0;
  CHECK(sw_iptw_t(flat).values == sw_iptw(flat).values);
  CHECK(sw_tac(flat).values == sw_iptw(flat).values);
}

TEST_CASE("every variant satisfies the audit identity and is positive") {
  auto d = simulated(ScenarioId::CUVSelection, 2000, 5);
  WeightEngine e(d);
  for (const auto& w : {e.iptw(), e.iptw_t(), e.tac(), e.measurement_time(), e.rmt(), e.tac_rmt()}) {
    CAPTURE(w.method);
    check_audit(w);
  }
}

TEST_CASE("RMT is exactly IPTW-T times the measurement-time weights") {
  auto d = simulated(ScenarioId::CMV, 2000, 8);
  auto rmt = sw_rmt(d);
  auto a = sw_iptw_t(d);
  auto t = sw_t(d);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(rmt.values[i] == a.values[i] * t.values[i]);
}

TEST_CASE("all-ones components give all-ones RMT") {
  const std::vector<double> l0 = {0, 0, 1, 1};
  auto d = two_occasions(l0, {0, 1, 0, 1}, {0, 1, 0, 1}, {0, 0, 1, 1}, {0, 1, 0, 1});
  for (double v : sw_rmt(d).values) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("stabilized weights average one") {
  for (auto id : {ScenarioId::DC, ScenarioId::CMV}) {
    auto d = simulated(id, 100000, 17);
    WeightEngine e(d);
    for (const auto& w : {e.iptw(), e.measurement_time(), e.tac()}) {
      CAPTURE(w.method);
      double s = 0;
      for (double v : w.values) s += v;
      CHECK(std::abs(s / double(w.size()) - 1.0) <= 0.02);
    }
  }
}

TEST_CASE("IPTW balances the current covariate within history strata") {
  auto d = simulated(ScenarioId::DC, 100000, 23);
  auto w = sw_iptw(d);
  // weighted covariance of L1 and A1 within each (L0, A0) stratum
  for (int l0 = 0; l0 < 2; ++l0)
    for (int a0 = 0; a0 < 2; ++a0) {
      double sw = 0, sl = 0, sa = 0, sla = 0, sw2 = 0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& o = d.individuals[i].occasions;
        if (o[0].covariates[0] != l0 || o[0].treatment != a0) continue;
        const double wi = w.values[i], l = o[1].covariates[0], a = o[1].treatment;
        sw += wi;
        sw2 += wi * wi;
        sl += wi * l;
        sa += wi * a;
        sla += wi * l * a;
      }
      const double cov = sla / sw - (sl / sw) * (sa / sw);
      const double n_eff = sw * sw / sw2;
      CHECK(std::abs(cov) <= 3 * 0.25 / std::sqrt(n_eff));
    }
}

namespace {

struct StratumCov {
  double cov = 0, bound = 0;
};

// Weighted covariance of x and y among individuals with A0 == a0, with a
// 3-standard-error bound for a pair of binary variables.
StratumCov weighted_cov(const std::vector<double>& w, const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<int>& a0, int stratum) {
  double sw = 0, sw2 = 0, sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (a0[i] != stratum) continue;
    sw += w[i];
    sw2 += w[i] * w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxy += w[i] * x[i] * y[i];
  }
  return {sxy / sw - (sx / sw) * (sy / sw), 3 * 0.25 / std::sqrt(sw * sw / sw2)};
}

struct CmvColumns {
  std::vector<double> l0, t1, a1;
  std::vector<int> a0;
};

CmvColumns cmv_columns(const PanelDataset& d) {
  CmvColumns c;
  for (const auto& ind : d.individuals) {
    c.l0.push_back(ind.occasions[0].covariates[0]);
    c.a0.push_back(ind.occasions[0].treatment);
    c.t1.push_back(ind.occasions[1].time > 1.0);
    c.a1.push_back(ind.occasions[1].treatment);
  }
  return c;
}

}  // namespace

TEST_CASE("CMV: measurement-time weights remove the L0 - T1 association given A0") {
  auto d = simulated(ScenarioId::CMV, 100000, 29);
  const auto c = cmv_columns(d);
  const std::vector<double> ones(d.size(), 1.0);
  const auto w = sw_t(d).values;
  for (int a0 = 0; a0 < 2; ++a0) {
    CAPTURE(a0);
    const auto before = weighted_cov(ones, c.l0, c.t1, c.a0, a0);
    const auto after = weighted_cov(w, c.l0, c.t1, c.a0, a0);
    CHECK(std::abs(before.cov) > before.bound);
    CHECK(std::abs(after.cov) <= after.bound);
  }
}

TEST_CASE("CMV: IPTW-T leaves the L0 - A1 path through T1 open, TAC closes it") {
  auto d = simulated(ScenarioId::CMV, 100000, 31);
  const auto c = cmv_columns(d);
  const auto iptw_t = sw_iptw_t(d).values;
  const auto tac = sw_tac(d).values;
  for (int a0 = 0; a0 < 2; ++a0) {
    CAPTURE(a0);
    const auto open = weighted_cov(iptw_t, c.l0, c.a1, c.a0, a0);
    const auto closed = weighted_cov(tac, c.l0, c.a1, c.a0, a0);
    CHECK(std::abs(open.cov) > open.bound);
    CHECK(std::abs(closed.cov) <= closed.bound);
  }
}

TEST_CASE("TAC+RMT reduces to TAC without selection") {
  auto d = simulated(ScenarioId::CUV, 2000, 4);
  CHECK(sw_tac_rmt(d).values == sw_tac(d).values);
}

TEST_CASE("selection factor is close to one when selection ignores A and L") {
  auto c = preset(ScenarioId::CUVSelection);
  c.gamma = 0.0;
  c.n = 20000;
  auto d = simulate(c);
  auto w = sw_tac_rmt(d);
  const std::size_t s = w.factor_labels.size() - 1;
  REQUIRE(w.factor_labels[s] == "S");
  double total = 0, worst = 0;
  for (const auto& row : w.audit) {
    const double dev = std::abs(row[s].numerator / row[s].denominator - 1.0);
    total += dev;
    worst = std::max(worst, dev);
  }
  CHECK(total / double(w.size()) < 0.02);
  CHECK(worst < 0.15);
}

TEST_CASE("continuous times are rejected by measurement-time weights") {
  auto d = simulated(ScenarioId::DC, 100, 1);
  for (std::size_t i = 0; i < d.size(); ++i) d.individuals[i].occasions[1].time = 1.0 + 0.01 * double(i);
  try {
    sw_t(d);
    FAIL("expected UnsupportedData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedData);
  }
  CHECK_NOTHROW(sw_tac(d));
}

TEST_CASE("discrete-time weights reduce to IPTW when everyone is measured") {
  auto d = simulated(ScenarioId::DC, 2000, 12);
  DiscreteTimePanel dt;
  dt.covariate_names = {"L"};
  dt.slots = 2;
  for (const auto& ind : d.individuals) {
    DiscreteTimeRecord r;
    r.measured = {1, 1};
    for (const auto& o : ind.occasions) {
      r.treatment.push_back(o.treatment);
      r.covariates.push_back(o.covariates);
    }
    dt.individuals.push_back(r);
  }
  auto a = sw_dt(dt);
  auto b = sw_iptw(d);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
  check_audit(a);
}

TEST_CASE("discrete-time weights on a frozen-treatment fixture") {
  // slot 0: everyone measured, untreated, L0 in {0,1}; slot 1: measured with
  // a probability depending on L0; unmeasured individuals keep A1 = A0 = 0.
  DiscreteTimePanel dt;
  dt.covariate_names = {"L"};
  dt.slots = 2;
  struct Row {
    int l, n1, a1;
  };
  const std::vector<Row> rows = {{0, 0, 0}, {0, 0, 0}, {0, 1, 0}, {0, 1, 1}, {0, 1, 0}, {0, 0, 0},
                                 {1, 1, 1}, {1, 1, 1}, {1, 1, 0}, {1, 0, 0}, {1, 1, 1}, {1, 1, 0}};
  for (const auto& r : rows) {
    DiscreteTimeRecord rec;
    rec.measured = {1, r.n1};
    rec.treatment = {0, r.a1};
    rec.covariates = {{double(r.l)}, {double(r.l)}};
    dt.individuals.push_back(rec);
  }
  auto w = sw_dt(dt);
  check_audit(w);
  CHECK(w.clamped > 0);  // P(A1 = 1 | N1 = 0) is zero by construction

  // frequency oracle
  double n = rows.size(), m = 0, ml[2] = {0, 0}, nl[2] = {0, 0}, t = 0, tl[2] = {0, 0};
  for (const auto& r : rows) {
    nl[r.l] += 1;
    if (r.n1) {
      m += 1;
      ml[r.l] += 1;
      t += r.a1;
      tl[r.l] += r.a1;
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    double expected = 1.0;
    if (r.n1) {
      expected *= (m / n) / (ml[r.l] / nl[r.l]);
      const double num = r.a1 ? t / m : 1 - t / m;
      const double den = r.a1 ? tl[r.l] / ml[r.l] : 1 - tl[r.l] / ml[r.l];
      expected *= num / den;
    }
    CAPTURE(i);
    CHECK(std::abs(w.values[i] - expected) < 1e-6);
  }
  auto report = positivity_report(w);
  CHECK(report.clamped == w.clamped);
  CHECK_FALSE(report.warnings.empty());
}

TEST_CASE("truncation") {
  std::vector<double> w;
  for (int i = 1; i <= 100; ++i) w.push_back(i);
  auto t = truncate_values(w, 1, 99);
  CHECK(t.front() == doctest::Approx(1.99).epsilon(1e-12));
  CHECK(t.back() == doctest::Approx(99.01).epsilon(1e-12));
  CHECK(t[50] == 51);
  CHECK(truncate_values(w, 0, 100) == w);
  std::vector<double> flat(10, 2.5);
  CHECK(truncate_values(flat, 5, 95) == flat);
  CHECK_THROWS_AS(truncate_values({}, 1, 99), Error);
  CHECK_THROWS_AS(truncate_values(w, 50, 50), Error);
  CHECK_THROWS_AS(truncate_values(w, -1, 50), Error);

  std::mt19937_64 rng(1);
  std::lognormal_distribution<double> dist(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> v(37 + rep);
    for (auto& x : v) x = dist(rng);
    auto got = truncate_values(v, 2.5, 97.5);
    auto want = oracle::clamp_to_percentiles(v, 2.5, 97.5);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("positivity report uses the same percentile definition") {
  auto d = simulated(ScenarioId::DC, 3000, 6);
  auto w = sw_iptw(d);
  auto report = positivity_report(w);
  auto t = truncate_values(w.values, 1, 99);
  CHECK(report.weights.p1 == *std::min_element(t.begin(), t.end()));
  CHECK(report.weights.p99 == *std::max_element(t.begin(), t.end()));
  CHECK(report.clamped == 0);
  CHECK(report.denominator_probabilities.min > 0);
}
