#include "mtbias/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <json.hpp>

#include "mtbias/error.hpp"
#include "mtbias/glm.hpp"
#include "mtbias/numeric.hpp"
#include "mtbias/rng.hpp"

namespace mtbias {

std::string_view scenario_name(ScenarioId id) {
  switch (id) {
    case ScenarioId::DC: return "DC";
    case ScenarioId::CMV: return "CMV";
    case ScenarioId::CUV: return "CUV";
    case ScenarioId::CUVSelection: return "CUV+Selection";
    case ScenarioId::Custom: return "Custom";
  }
  return "Custom";
}

ScenarioId parse_scenario(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "DC" || s == "1") return ScenarioId::DC;
  if (s == "CMV" || s == "2") return ScenarioId::CMV;
  if (s == "CUV" || s == "3") return ScenarioId::CUV;
  if (s == "CUV+SELECTION" || s == "CUV+S" || s == "S4" || s == "4") return ScenarioId::CUVSelection;
  if (s == "CUSTOM") return ScenarioId::Custom;
  throw Error(ErrorCode::UnknownScenario, "unknown scenario '" + std::string(name) + "'");
}

double ScenarioConfig::coefficient(const std::string& key) const {
  auto it = coefficients.find(key);
  return it == coefficients.end() ? 0.0 : it->second;
}

ScenarioConfig preset(ScenarioId id) {
  ScenarioConfig c;
  c.scenario = id;
  if (id == ScenarioId::Custom) return c;
  // Time-varying confounding shared by all scenarios: covariates push
  // treatment up and the outcome down, treatment affects the next covariate.
  c.coefficients = {
      {"L0->A0", 1.0}, {"L0->L1", 1.0}, {"A0->L1", 1.0}, {"L0->A1", 1.0}, {"L1->A1", 1.0},
      {"A0->A1", 1.0}, {"L0->Y", -1.0}, {"L1->Y", -1.0}, {"A0->Y", 1.0},  {"A1->Y", 1.0},
      {"T1->A1", 2.0},
  };
  switch (id) {
    case ScenarioId::DC:
      c.coefficients["T1->Y"] = 1.0;
      c.coefficients["T1->L1"] = -1.0;
      break;
    case ScenarioId::CMV:
      c.coefficients["U1->L0"] = -1.0;
      c.coefficients["L0->T1"] = 1.0;
      c.coefficients["U1->Y"] = 1.0;
      break;
    case ScenarioId::CUV:
    case ScenarioId::CUVSelection:
      c.coefficients["U1->T1"] = 1.0;
      c.coefficients["U1->Y"] = -1.0;
      c.coefficients["U1->L0"] = 1.0;
      c.coefficients["U1->L1"] = 1.0;
      break;
    case ScenarioId::Custom: break;
  }
  if (id == ScenarioId::CUVSelection) {
    c.selection = true;
    c.gamma = 1.0;
  }
  return c;
}

namespace {

TemplateOptions full_template() {
  TemplateOptions o;
  o.worst_case = true;
  o.treatment_carryover = true;
  return o;
}

std::uint64_t node_key(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Term {
  std::size_t parent;
  double slope;
};

struct ModelNode {
  std::string id;
  NodeRole role;
  double intercept = 0.0;
  std::vector<Term> terms;
  std::uint64_t key = 0;
};

struct CompiledModel {
  std::vector<ModelNode> nodes;
  std::optional<std::size_t> selection_a, selection_l;
};

CompiledModel compile(const ScenarioConfig& config) {
  validate(config);
  const auto graph = standard_tav_template(config.follow_ups, full_template());
  CompiledModel m;
  std::vector<std::size_t> position(graph.size());
  // Declaration order of the template is temporal, so it is a valid
  // generation order.
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& n = graph.node(i);
    position[i] = m.nodes.size();
    ModelNode node{n.id, n.role, config.coefficient(n.id), {}, node_key(n.id)};
    for (auto p : graph.parents(i)) {
      const double beta = config.coefficient(graph.node(p).id + "->" + n.id);
      if (beta != 0.0) node.terms.push_back({position[p], beta});
    }
    m.nodes.push_back(std::move(node));
  }
  if (config.selection) {
    const auto K = std::to_string(config.follow_ups);
    m.selection_a = position[graph.require("A" + K)];
    m.selection_l = position[graph.require("L" + K)];
  }
  return m;
}

}  // namespace

void validate(const ScenarioConfig& config) {
  if (config.follow_ups < 1) throw Error(ErrorCode::InvalidConfig, "follow_ups must be >= 1");
  if (!(config.outcome_noise_sd > 0) || !std::isfinite(config.outcome_noise_sd))
    throw Error(ErrorCode::InvalidConfig, "outcome_noise_sd must be > 0");
  if (!config.selection && config.gamma != 0.0)
    throw Error(ErrorCode::InvalidConfig, "gamma only applies to scenarios with selection");
  if (!std::isfinite(config.gamma) || !std::isfinite(config.selection_intercept))
    throw Error(ErrorCode::InvalidConfig, "selection parameters must be finite");
  const auto graph = standard_tav_template(config.follow_ups, full_template());
  for (const auto& [key, value] : config.coefficients) {
    if (!std::isfinite(value)) throw Error(ErrorCode::InvalidConfig, "coefficient '" + key + "' is not finite");
    const auto arrow = key.find("->");
    if (arrow == std::string::npos) {
      if (!graph.index_of(key)) throw Error(ErrorCode::InvalidConfig, "intercept for unknown node '" + key + "'");
      continue;
    }
    const auto from = key.substr(0, arrow);
    const auto to = key.substr(arrow + 2);
    if (!graph.index_of(from) || !graph.index_of(to))
      throw Error(ErrorCode::InvalidConfig, "coefficient '" + key + "' names an unknown node");
    if (value != 0.0 && !graph.has_edge(from, to))
      throw Error(ErrorCode::InvalidConfig, "coefficient '" + key + "' is not an admissible edge");
  }
}

CausalGraph scenario_graph(const ScenarioConfig& config) {
  validate(config);
  const auto full = standard_tav_template(config.follow_ups, full_template());
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  for (const auto& n : full.nodes()) nodes.push_back({n.id, n.role, n.time_index});
  for (auto [s, t] : full.edges()) {
    const auto& a = full.node(s).id;
    const auto& b = full.node(t).id;
    if (config.coefficient(a + "->" + b) != 0.0) edges.push_back({a, b});
  }
  if (config.selection) {
    const int K = config.follow_ups;
    const auto sel = "T" + std::to_string(K + 1);
    nodes.push_back({sel, NodeRole::MeasurementTime, K + 1});
    edges.push_back({"A" + std::to_string(K), sel});
    edges.push_back({"L" + std::to_string(K), sel});
  }
  return build_graph(Flavor::TAV, nodes, edges);
}

const std::vector<double>& SimulatedDraws::column(std::string_view node) const {
  auto it = std::find(nodes.begin(), nodes.end(), node);
  if (it == nodes.end()) throw Error(ErrorCode::UnknownNode, "no simulated node '" + std::string(node) + "'");
  return values[static_cast<std::size_t>(it - nodes.begin())];
}

namespace {

constexpr std::uint64_t kSelectionKey = 0x5E1EC7ULL;

void draw_individual(const CompiledModel& m, const ScenarioConfig& config, const CounterRng& rng,
                     std::size_t i, World world, std::vector<double>& v, bool& observed) {
  for (std::size_t j = 0; j < m.nodes.size(); ++j) {
    const auto& node = m.nodes[j];
    double eta = node.intercept;
    for (const auto& t : node.terms) eta += t.slope * v[t.parent];
    if (node.role == NodeRole::Treatment && world != World::Factual) {
      v[j] = world == World::AlwaysTreated ? 1.0 : 0.0;
    } else if (node.role == NodeRole::Outcome) {
      v[j] = eta + config.outcome_noise_sd *
                       rng.normal(i, node.key, static_cast<std::uint64_t>(world), 0);
    } else {
      v[j] = rng.uniform({i, node.key}) < glm::inv_logit(eta) ? 1.0 : 0.0;
    }
  }
  observed = true;
  if (m.selection_a) {
    const double eta =
        config.selection_intercept - config.gamma * v[*m.selection_a] + config.gamma * v[*m.selection_l];
    observed = rng.uniform({i, kSelectionKey}) < glm::inv_logit(eta);
  }
}

}  // namespace

SimulatedDraws simulate_draws(const ScenarioConfig& config, std::size_t n, std::uint64_t seed, World world) {
  const auto model = compile(config);
  const CounterRng rng(seed);
  SimulatedDraws out;
  for (const auto& node : model.nodes) out.nodes.push_back(node.id);
  out.values.assign(model.nodes.size(), std::vector<double>(n));
  out.observed.assign(n, true);
  std::vector<double> v(model.nodes.size());
  for (std::size_t i = 0; i < n; ++i) {
    bool observed = true;
    draw_individual(model, config, rng, i, world, v, observed);
    for (std::size_t j = 0; j < v.size(); ++j) out.values[j][i] = v[j];
    out.observed[i] = observed;
  }
  return out;
}

PanelDataset to_panel(const SimulatedDraws& draws, int follow_ups) {
  PanelDataset data;
  data.covariate_names = {"L"};
  const std::size_t n = draws.observed.size();
  std::vector<const std::vector<double>*> L, A, T;
  for (int k = 0; k <= follow_ups; ++k) {
    L.push_back(&draws.column("L" + std::to_string(k)));
    A.push_back(&draws.column("A" + std::to_string(k)));
    T.push_back(k == 0 ? nullptr : &draws.column("T" + std::to_string(k)));
  }
  const auto& Y = draws.column("Y");
  data.individuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& ind = data.individuals[i];
    ind.id = std::to_string(i + 1);
    ind.occasions.resize(static_cast<std::size_t>(follow_ups) + 1);
    for (int k = 0; k <= follow_ups; ++k) {
      auto& occ = ind.occasions[static_cast<std::size_t>(k)];
      occ.time = k == 0 ? 0.0 : k + 0.5 * (*T[k])[i];
      occ.covariates = {(*L[k])[i]};
      occ.treatment = static_cast<int>((*A[k])[i]);
    }
    ind.outcome = Y[i];
    ind.observed = draws.observed[i];
  }
  return data;
}

PanelDataset simulate(const ScenarioConfig& config) {
  return to_panel(simulate_draws(config, config.n, config.seed), config.follow_ups);
}

double true_ate(const ScenarioConfig& config, std::size_t n_oracle, std::uint64_t seed) {
  if (n_oracle == 0) throw Error(ErrorCode::InvalidConfig, "oracle sample must be non-empty");
  const auto model = compile(config);
  const CounterRng rng(seed);
  const std::size_t y = model.nodes.size() - 1;  // outcome is declared last
  std::vector<double> treated(model.nodes.size()), control(model.nodes.size());
  CompensatedSum sum;
  for (std::size_t i = 0; i < n_oracle; ++i) {
    bool observed = true;
    draw_individual(model, config, rng, i, World::AlwaysTreated, treated, observed);
    draw_individual(model, config, rng, i, World::NeverTreated, control, observed);
    sum.add(treated[y] - control[y]);
  }
  return sum.value() / static_cast<double>(n_oracle);
}

std::string config_to_json(const ScenarioConfig& config) {
  nlohmann::json j;
  j["scenario"] = scenario_name(config.scenario);
  j["follow_ups"] = config.follow_ups;
  j["coefficients"] = config.coefficients;
  j["outcome_noise_sd"] = config.outcome_noise_sd;
  j["selection"] = config.selection;
  j["gamma"] = config.gamma;
  j["selection_intercept"] = config.selection_intercept;
  j["n"] = config.n;
  j["seed"] = config.seed;
  return j.dump(2) + "\n";
}

ScenarioConfig config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    ScenarioConfig c;
    if (j.contains("scenario")) {
      c = preset(parse_scenario(j.at("scenario").get<std::string>()));
    }
    if (j.contains("follow_ups")) c.follow_ups = j.at("follow_ups").get<int>();
    if (j.contains("coefficients")) c.coefficients = j.at("coefficients").get<std::map<std::string, double>>();
    if (j.contains("outcome_noise_sd")) c.outcome_noise_sd = j.at("outcome_noise_sd").get<double>();
    if (j.contains("selection")) c.selection = j.at("selection").get<bool>();
    if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
    if (j.contains("selection_intercept")) c.selection_intercept = j.at("selection_intercept").get<double>();
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad config field: ") + e.what());
  }
}

}  // namespace mtbias
