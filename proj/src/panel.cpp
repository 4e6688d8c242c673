#include "mtbias/panel.hpp"

#include <algorithm>
#include <cmath>

#include "mtbias/numeric.hpp"

namespace mtbias {

bool Individual::always_treated() const {
  return std::all_of(occasions.begin(), occasions.end(), [](const Occasion& o) { return o.treatment == 1; });
}

bool Individual::never_treated() const {
  return std::all_of(occasions.begin(), occasions.end(), [](const Occasion& o) { return o.treatment == 0; });
}

namespace {

bool same_value(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same_occasion(const Occasion& a, const Occasion& b) {
  if (a.treatment != b.treatment || !same_value(a.time, b.time)) return false;
  if (a.covariates.size() != b.covariates.size()) return false;
  for (std::size_t i = 0; i < a.covariates.size(); ++i)
    if (!same_value(a.covariates[i], b.covariates[i])) return false;
  return true;
}

}  // namespace

bool operator==(const PanelDataset& a, const PanelDataset& b) {
  if (a.covariate_names != b.covariate_names || a.individuals.size() != b.individuals.size()) return false;
  for (std::size_t i = 0; i < a.individuals.size(); ++i) {
    const auto& x = a.individuals[i];
    const auto& y = b.individuals[i];
    if (x.id != y.id || x.observed != y.observed || !same_value(x.outcome, y.outcome)) return false;
    if (x.occasions.size() != y.occasions.size()) return false;
    for (std::size_t k = 0; k < x.occasions.size(); ++k)
      if (!same_occasion(x.occasions[k], y.occasions[k])) return false;
  }
  return true;
}

double percentile_sorted(std::span<const double> sorted, double pct) {
  if (sorted.empty()) return std::nan("");
  const double h = static_cast<double>(sorted.size() - 1) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace mtbias
