#include "mtbias/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mtbias/error.hpp"
#include "mtbias/glm.hpp"
#include "mtbias/numeric.hpp"

namespace mtbias {

namespace {

using Column = std::vector<double>;

struct Regressor {
  std::string name;
  const Column* values;
};

struct Fitted {
  std::vector<double> realized;  // clamped probability of the realized response
  std::size_t clamped = 0;
  bool converged = true;
};

/// Greedy Gram-Schmidt in column order: keeps a regressor only if it adds a
/// direction not spanned by the intercept and the regressors kept so far.
std::vector<Regressor> independent_columns(const std::vector<Regressor>& candidates, std::size_t n) {
  std::vector<Eigen::VectorXd> basis;
  basis.push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / std::sqrt(double(n))));
  std::vector<Regressor> kept;
  for (const auto& r : candidates) {
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(r.values->data(), static_cast<Eigen::Index>(n));
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) v -= q.dot(v) * q;
    const double norm = v.norm();
    if (norm <= 1e-9 * norm0) continue;
    basis.push_back(v / norm);
    kept.push_back(r);
  }
  return kept;
}

Fitted fit_realized(const Column& y, const std::vector<Regressor>& regressors) {
  const std::size_t n = y.size();
  Fitted out;
  out.realized.assign(n, 1.0);
  if (n == 0) return out;
  const bool varies = std::any_of(y.begin(), y.end(), [&](double v) { return v != y.front(); });
  if (!varies) return out;

  const auto kept = independent_columns(regressors, n);
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  for (const auto& r : kept) {
    names.push_back(r.name);
    columns.push_back(*r.values);
  }
  const auto x = glm::DesignMatrix::with_intercept(names, columns, n);
  const std::vector<double> unit(n, 1.0);
  const auto model = glm::fit_weighted_logistic(x, y, unit);
  out.converged = model.converged;
  const auto p = glm::fitted_probabilities(model, x);
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = y[i] == 1.0 ? p[i] : 1.0 - p[i];
    const double c = glm::clamp_probability(raw);
    if (c != raw) ++out.clamped;
    out.realized[i] = c;
  }
  return out;
}

/// Named columns plus a cache of fitted models keyed by response and
/// regressor list.
class ModelStore {
 public:
  void add(std::string name, Column values) { columns_[std::move(name)] = std::move(values); }
  bool has(const std::string& name) const { return columns_.count(name) != 0; }
  const Column& column(const std::string& name) const { return columns_.at(name); }

  const Fitted& fit(const std::string& response, const std::vector<std::string>& regressors) {
    std::string key = response + "|";
    for (const auto& r : regressors) key += r + ",";
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<Regressor> rs;
    for (const auto& r : regressors) rs.push_back({r, &column(r)});
    return cache_.emplace(key, fit_realized(column(response), rs)).first->second;
  }

 private:
  std::map<std::string, Column> columns_;
  std::map<std::string, Fitted> cache_;
};

struct FactorSpec {
  std::string label;
  std::string response;
  std::vector<std::string> numerator;
  std::vector<std::string> denominator;
  bool unit_when_zero = false;  // factor is 1 where the response is 0
};

WeightVector assemble(ModelStore& store, std::string method, const std::vector<FactorSpec>& factors,
                      std::size_t n) {
  WeightVector w;
  w.method = std::move(method);
  w.values.assign(n, 1.0);
  w.audit.assign(n, {});
  bool unconverged = false;
  for (const auto& f : factors) {
    w.factor_labels.push_back(f.label);
    const auto& num = store.fit(f.response, f.numerator);
    const auto& den = store.fit(f.response, f.denominator);
    w.clamped += num.clamped + den.clamped;
    unconverged = unconverged || !num.converged || !den.converged;
    const auto& y = store.column(f.response);
    for (std::size_t i = 0; i < n; ++i) {
      WeightFactor factor{num.realized[i], den.realized[i]};
      if (f.unit_when_zero && y[i] == 0.0) factor = {1.0, 1.0};
      w.audit[i].push_back(factor);
      w.values[i] *= factor.numerator / factor.denominator;
    }
  }
  if (w.clamped > 0)
    w.warnings.push_back("PositivityViolation: " + std::to_string(w.clamped) + " probabilities clamped");
  if (unconverged) w.warnings.push_back("model fit did not converge (possible separation)");
  return w;
}

std::string idx(const char* prefix, std::size_t k) { return prefix + std::to_string(k); }

}  // namespace

WeightVector multiply(const WeightVector& a, const WeightVector& b, std::string method) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidValue, "weight vectors differ in length");
  WeightVector w;
  w.method = std::move(method);
  w.values.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) w.values[i] = a.values[i] * b.values[i];
  w.factor_labels = a.factor_labels;
  w.factor_labels.insert(w.factor_labels.end(), b.factor_labels.begin(), b.factor_labels.end());
  if (!a.audit.empty() && !b.audit.empty()) {
    w.audit = a.audit;
    for (std::size_t i = 0; i < a.size(); ++i)
      w.audit[i].insert(w.audit[i].end(), b.audit[i].begin(), b.audit[i].end());
  }
  w.clamped = a.clamped + b.clamped;
  w.warnings = a.warnings;
  w.warnings.insert(w.warnings.end(), b.warnings.begin(), b.warnings.end());
  return w;
}

struct WeightEngine::Impl {
  const PanelDataset& data;
  ModelStore store;
  std::size_t n = 0;
  std::size_t occasions = 0;
  std::size_t covariates = 0;
  bool binary_times_ready = false;

  explicit Impl(const PanelDataset& d) : data(d) {
    n = d.size();
    occasions = d.occasions();
    covariates = d.covariate_names.size();
    if (n == 0) throw Error(ErrorCode::InvalidValue, "cannot weight an empty dataset");
    for (const auto& ind : d.individuals) {
      if (ind.occasions.size() != occasions)
        throw Error(ErrorCode::InvalidValue, "individual " + ind.id + " has a different number of occasions");
      for (const auto& o : ind.occasions)
        if (o.covariates.size() != covariates)
          throw Error(ErrorCode::InvalidValue, "individual " + ind.id + " has a malformed covariate row");
    }
    for (std::size_t k = 0; k < occasions; ++k) {
      Column a(n), t(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = d.individuals[i].occasions[k].treatment;
        t[i] = d.individuals[i].occasions[k].time;
      }
      store.add(idx("A", k), std::move(a));
      store.add(idx("T", k), std::move(t));
      for (std::size_t c = 0; c < covariates; ++c) {
        Column l(n);
        for (std::size_t i = 0; i < n; ++i) l[i] = d.individuals[i].occasions[k].covariates[c];
        store.add(covariate(k, c), std::move(l));
      }
    }
    Column s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = d.individuals[i].observed ? 1.0 : 0.0;
    store.add("S", std::move(s));
  }

  std::string covariate(std::size_t k, std::size_t c) const {
    return "L" + std::to_string(k) + ":" + data.covariate_names[c];
  }

  // Regressor lists for histories up to and including occasion `last`.
  std::vector<std::string> history(const char* prefix, std::size_t last) const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k <= last; ++k) out.push_back(idx(prefix, k));
    return out;
  }
  std::vector<std::string> covariate_history(std::size_t last) const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k <= last; ++k)
      for (std::size_t c = 0; c < covariates; ++c) out.push_back(covariate(k, c));
    return out;
  }
  static void append(std::vector<std::string>& a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
  }

  std::vector<std::string> past_treatment(std::size_t k) const {
    return k == 0 ? std::vector<std::string>{} : history("A", k - 1);
  }

  // Each occasion's time recoded 0 (earlier) / 1 (later) so it can be a
  // logistic response.
  void ensure_binary_times() {
    if (binary_times_ready) return;
    for (std::size_t k = 0; k < occasions; ++k) {
      const auto& t = store.column(idx("T", k));
      std::set<double> distinct(t.begin(), t.end());
      if (distinct.size() > 2)
        throw Error(ErrorCode::UnsupportedData, "measurement-time weights need at most two distinct times at occasion " +
                                                    std::to_string(k));
      const double late = *distinct.rbegin();
      Column b(n);
      for (std::size_t i = 0; i < n; ++i) b[i] = distinct.size() == 2 && t[i] == late ? 1.0 : 0.0;
      store.add(idx("Tb", k), std::move(b));
    }
    binary_times_ready = true;
  }

  std::vector<FactorSpec> treatment_factors(bool times_in_numerator, bool times_in_denominator) const {
    std::vector<FactorSpec> out;
    for (std::size_t k = 0; k < occasions; ++k) {
      FactorSpec f;
      f.label = idx("A", k);
      f.response = idx("A", k);
      f.numerator = past_treatment(k);
      if (times_in_numerator) append(f.numerator, history("T", k));
      f.denominator = f.numerator;
      append(f.denominator, covariate_history(k));
      if (times_in_denominator && !times_in_numerator) append(f.denominator, history("T", k));
      out.push_back(std::move(f));
    }
    return out;
  }
};

WeightEngine::WeightEngine(const PanelDataset& data) : impl_(std::make_unique<Impl>(data)) {}
WeightEngine::~WeightEngine() = default;

WeightVector WeightEngine::iptw() {
  return assemble(impl_->store, "IPTW", impl_->treatment_factors(false, false), impl_->n);
}

WeightVector WeightEngine::iptw_t() {
  return assemble(impl_->store, "IPTW-T", impl_->treatment_factors(true, true), impl_->n);
}

WeightVector WeightEngine::tac() {
  return assemble(impl_->store, "TAC", impl_->treatment_factors(false, true), impl_->n);
}

WeightVector WeightEngine::measurement_time() {
  auto& m = *impl_;
  m.ensure_binary_times();
  std::vector<FactorSpec> factors;
  for (std::size_t k = 1; k < m.occasions; ++k) {
    FactorSpec f;
    f.label = idx("T", k);
    f.response = idx("Tb", k);
    f.numerator = m.history("Tb", k - 1);
    Impl::append(f.numerator, m.history("A", k - 1));
    f.denominator = f.numerator;
    Impl::append(f.denominator, m.covariate_history(k - 1));
    factors.push_back(std::move(f));
  }
  return assemble(m.store, "T", factors, m.n);
}

WeightVector WeightEngine::rmt() { return multiply(iptw_t(), measurement_time(), "RMT"); }

WeightVector WeightEngine::tac_rmt() {
  auto& m = *impl_;
  const std::size_t last = m.occasions - 1;
  FactorSpec f;
  f.label = "S";
  f.response = "S";
  f.numerator = m.history("T", last);
  Impl::append(f.numerator, m.history("A", last));
  f.denominator = f.numerator;
  Impl::append(f.denominator, m.covariate_history(last));
  return multiply(tac(), assemble(m.store, "S", {f}, m.n), "TAC+RMT");
}

WeightVector sw_iptw(const PanelDataset& data) { return WeightEngine(data).iptw(); }
WeightVector sw_iptw_t(const PanelDataset& data) { return WeightEngine(data).iptw_t(); }
WeightVector sw_tac(const PanelDataset& data) { return WeightEngine(data).tac(); }
WeightVector sw_t(const PanelDataset& data) { return WeightEngine(data).measurement_time(); }
WeightVector sw_rmt(const PanelDataset& data) { return WeightEngine(data).rmt(); }
WeightVector sw_tac_rmt(const PanelDataset& data) { return WeightEngine(data).tac_rmt(); }

WeightVector sw_dt(const DiscreteTimePanel& data) {
  const std::size_t n = data.individuals.size();
  const std::size_t slots = data.slots;
  const std::size_t nc = data.covariate_names.size();
  if (n == 0) throw Error(ErrorCode::InvalidValue, "cannot weight an empty dataset");
  ModelStore store;
  for (std::size_t t = 0; t < slots; ++t) {
    Column a(n), m(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = data.individuals[i];
      if (r.measured.size() != slots || r.treatment.size() != slots || r.covariates.size() != slots)
        throw Error(ErrorCode::InvalidValue, "discrete-time record does not cover every slot");
      a[i] = r.treatment[t];
      m[i] = r.measured[t];
    }
    store.add(idx("A", t), std::move(a));
    store.add(idx("N", t), std::move(m));
    for (std::size_t c = 0; c < nc; ++c) {
      Column l(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (data.individuals[i].covariates[t].size() != nc)
          throw Error(ErrorCode::InvalidValue, "discrete-time record has a malformed covariate row");
        l[i] = data.individuals[i].covariates[t][c];
      }
      store.add("L" + std::to_string(t) + ":" + data.covariate_names[c], std::move(l));
    }
  }
  auto hist = [](const char* prefix, std::size_t last_plus_one) {
    std::vector<std::string> out;
    for (std::size_t t = 0; t < last_plus_one; ++t) out.push_back(idx(prefix, t));
    return out;
  };
  auto covs = [&](std::size_t last) {
    std::vector<std::string> out;
    for (std::size_t t = 0; t <= last; ++t)
      for (const auto& c : data.covariate_names) out.push_back("L" + std::to_string(t) + ":" + c);
    return out;
  };
  std::vector<FactorSpec> factors;
  for (std::size_t t = 0; t < slots; ++t) {
    FactorSpec a;
    a.label = idx("A", t);
    a.response = idx("A", t);
    a.numerator = hist("N", t + 1);
    auto past = hist("A", t);
    a.numerator.insert(a.numerator.end(), past.begin(), past.end());
    a.denominator = a.numerator;
    auto l = covs(t);
    a.denominator.insert(a.denominator.end(), l.begin(), l.end());
    factors.push_back(std::move(a));
    if (t + 1 < slots) {
      FactorSpec m;
      m.label = idx("N", t + 1);
      m.response = idx("N", t + 1);
      m.numerator = hist("N", t + 1);
      auto as = hist("A", t + 1);
      m.numerator.insert(m.numerator.end(), as.begin(), as.end());
      m.denominator = m.numerator;
      m.denominator.insert(m.denominator.end(), l.begin(), l.end());
      m.unit_when_zero = true;
      factors.push_back(std::move(m));
    }
  }
  return assemble(store, "DT", factors, n);
}

std::vector<double> truncate_values(std::span<const double> values, double lo_pct, double hi_pct) {
  if (values.empty()) throw Error(ErrorCode::EmptyWeights, "no weights to truncate");
  if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 100.0))
    throw Error(ErrorCode::InvalidValue, "truncation percentiles must satisfy 0 <= lo < hi <= 100");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = percentile_sorted(sorted, lo_pct);
  const double hi = percentile_sorted(sorted, hi_pct);
  std::vector<double> out(values.begin(), values.end());
  for (auto& v : out) v = std::clamp(v, lo, hi);
  return out;
}

WeightVector truncate(const WeightVector& weights, double lo_pct, double hi_pct) {
  WeightVector out = weights;
  out.values = truncate_values(weights.values, lo_pct, hi_pct);
  if (lo_pct > 0.0 || hi_pct < 100.0) {
    // The audit no longer multiplies out to the truncated weight.
    out.method += " (truncated)";
  }
  return out;
}

Distribution summarize(std::span<const double> values) {
  Distribution d;
  if (values.empty()) return d;
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  d.min = s.front();
  d.max = s.back();
  d.p1 = percentile_sorted(s, 1);
  d.p25 = percentile_sorted(s, 25);
  d.median = percentile_sorted(s, 50);
  d.p75 = percentile_sorted(s, 75);
  d.p99 = percentile_sorted(s, 99);
  d.mean = compensated_mean(s);
  return d;
}

PositivityReport positivity_report(const WeightVector& weights) {
  PositivityReport r;
  r.weights = summarize(weights.values);
  std::vector<double> dens;
  for (const auto& row : weights.audit)
    for (const auto& f : row) dens.push_back(f.denominator);
  r.denominator_probabilities = summarize(dens);
  r.clamped = weights.clamped;
  r.warnings = weights.warnings;
  return r;
}

}  // namespace mtbias
