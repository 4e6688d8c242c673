#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mtbias {

/// One measurement occasion of one individual. Occasion 0 is baseline.
struct Occasion {
  double time = 0.0;                // time since baseline
  std::vector<double> covariates;   // aligned with PanelDataset::covariate_names
  int treatment = 0;                // 0/1
};

struct Individual {
  std::string id;
  std::vector<Occasion> occasions;  // sorted by occasion index, same count for everyone
  double outcome = 0.0;             // NaN allowed only when !observed
  bool observed = true;             // outcome measured (selection indicator)

  bool always_treated() const;
  bool never_treated() const;
};

/// Long-format panel: every individual has the same number of occasions.
struct PanelDataset {
  std::vector<std::string> covariate_names;
  std::vector<Individual> individuals;

  std::size_t size() const { return individuals.size(); }
  /// Occasions per individual (0 when empty).
  std::size_t occasions() const { return individuals.empty() ? 0 : individuals.front().occasions.size(); }

  friend bool operator==(const PanelDataset& a, const PanelDataset& b);
};

/// Discrete-time panel: slots t = 0..slots-1 on a shared grid, with a
/// measurement indicator per slot. Covariates in unmeasured slots carry the
/// last measured value.
struct DiscreteTimeRecord {
  std::vector<int> measured;                    // N_t
  std::vector<int> treatment;                   // A_t
  std::vector<std::vector<double>> covariates;  // L_t
  double outcome = 0.0;
  bool observed = true;
};

struct DiscreteTimePanel {
  std::vector<std::string> covariate_names;
  std::size_t slots = 0;
  std::vector<DiscreteTimeRecord> individuals;
};

}  // namespace mtbias
