#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtbias/graph.hpp"
#include "mtbias/panel.hpp"

namespace mtbias {

enum class ScenarioId { DC, CMV, CUV, CUVSelection, Custom };

std::string_view scenario_name(ScenarioId id);
/// Accepts DC, CMV, CUV, CUV+Selection (also S4, CUV+S) and Custom,
/// case-insensitively. Throws UnknownScenario.
ScenarioId parse_scenario(std::string_view name);

/// Generative model over the nodes of standard_tav_template(follow_ups):
/// binary U, L, T and A nodes drawn as Bernoulli(inv_logit(linear predictor))
/// and a normal outcome. Coefficients are keyed "X->Y" for slopes and "X" for
/// intercepts; anything absent is zero.
///
/// Measurement time T_k is binary (0 early, 1 late); the panel records it as
/// time k + 0.5 * T_k so times stay strictly increasing.
///
/// With `selection`, the outcome is observed with probability
/// inv_logit(selection_intercept - gamma * A_K + gamma * L_K).
struct ScenarioConfig {
  ScenarioId scenario = ScenarioId::Custom;
  int follow_ups = 1;
  std::map<std::string, double> coefficients;
  double outcome_noise_sd = 0.7071067811865476;  // variance 0.5
  bool selection = false;
  double gamma = 0.0;
  double selection_intercept = 2.0;
  std::size_t n = 2000;
  std::uint64_t seed = 1;

  double coefficient(const std::string& key) const;
};

ScenarioConfig preset(ScenarioId id);

/// Throws InvalidConfig for unknown nodes, edges that are not in the
/// template, a non-positive noise sd or gamma without selection.
void validate(const ScenarioConfig& config);

/// Graph realized by the config: the template's nodes, the edges with
/// nonzero slopes and, with selection, a final measurement-time node
/// T{K+1} with parents A_K and L_K.
CausalGraph scenario_graph(const ScenarioConfig& config);

/// Node-level draws, values[node][individual], in generation order.
struct SimulatedDraws {
  std::vector<std::string> nodes;
  std::vector<std::vector<double>> values;
  std::vector<bool> observed;

  const std::vector<double>& column(std::string_view node) const;
};

enum class World : std::uint64_t { Factual = 0, AlwaysTreated = 1, NeverTreated = 2 };

/// Draws `n` individuals from stream `seed`. In the counterfactual worlds all
/// treatments are forced; every other node reuses the factual uniforms while
/// the outcome noise is drawn afresh.
SimulatedDraws simulate_draws(const ScenarioConfig& config, std::size_t n, std::uint64_t seed,
                              World world = World::Factual);

PanelDataset to_panel(const SimulatedDraws& draws, int follow_ups);

/// simulate_draws(config, config.n, config.seed) as a panel.
PanelDataset simulate(const ScenarioConfig& config);

inline constexpr std::uint64_t kOracleSeed = 0x0DDBA11C0FFEEULL;

/// Mean of Y(always treated) - Y(never treated) over `n_oracle` simulated
/// individuals with covariates and measurement times responding to the forced
/// treatments.
double true_ate(const ScenarioConfig& config, std::size_t n_oracle, std::uint64_t seed = kOracleSeed);

std::string config_to_json(const ScenarioConfig& config);
ScenarioConfig config_from_json(std::string_view text);

}  // namespace mtbias
