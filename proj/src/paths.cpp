#include "mtbias/paths.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <json.hpp>

namespace mtbias {

std::string_view category_name(BiasCategory category) {
  switch (category) {
    case BiasCategory::DC: return "DC";
    case BiasCategory::CMV: return "CMV";
    case BiasCategory::CUV: return "CUV";
    case BiasCategory::Other: return "Other";
  }
  return "Other";
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::IPTW: return "IPTW";
    case Method::RMT: return "RMT";
    case Method::TAC: return "TAC";
    case Method::TAC_RMT: return "TAC+RMT";
  }
  return "IPTW";
}

PrunedGraph prune_assumed_edges(const CausalGraph& graph) {
  std::vector<std::pair<std::size_t, std::size_t>> drop;
  PrunedGraph out{graph, {}};
  for (auto [s, t] : graph.edges()) {
    const auto src = graph.node(s).role;
    if (graph.node(t).role != NodeRole::Treatment) continue;
    if (src == NodeRole::Unmeasured || src == NodeRole::Covariate) {
      drop.emplace_back(s, t);
      out.removed.emplace_back(graph.node(s).id, graph.node(t).id);
    }
  }
  if (!drop.empty()) out.graph = graph.without_edges(drop);
  return out;
}

namespace {

bool is_time_node(NodeRole role) {
  return role == NodeRole::MeasurementTime || role == NodeRole::MeasurementIndicator;
}

// All directed paths from `from` that end at a node satisfying `is_end`,
// never passing through a treatment node before the end.
template <typename EndPred>
void directed_paths(const CausalGraph& g, std::size_t from, EndPred is_end,
                    std::vector<std::size_t>& current, std::vector<std::vector<std::size_t>>& out) {
  current.push_back(from);
  for (auto c : g.children(from)) {
    if (is_end(c)) {
      current.push_back(c);
      out.push_back(current);
      current.pop_back();
    } else if (g.node(c).role != NodeRole::Treatment && g.node(c).role != NodeRole::Outcome) {
      directed_paths(g, c, is_end, current, out);
    }
  }
  current.pop_back();
}

std::vector<std::string> ids(const CausalGraph& g, const std::vector<std::size_t>& path) {
  std::vector<std::string> out;
  out.reserve(path.size());
  for (auto v : path) out.push_back(g.node(v).id);
  return out;
}

}  // namespace

std::vector<BackdoorPath> enumerate_backdoor_paths(const CausalGraph& graph) {
  std::vector<BackdoorPath> result;
  const auto outcome = graph.outcome();
  for (std::size_t root = 0; root < graph.size(); ++root) {
    const auto role = graph.node(root).role;
    if (role == NodeRole::Treatment || role == NodeRole::Outcome) continue;

    std::vector<std::vector<std::size_t>> to_a, to_y;
    std::vector<std::size_t> scratch;
    directed_paths(
        graph, root, [&](std::size_t v) { return graph.node(v).role == NodeRole::Treatment; }, scratch,
        to_a);
    if (to_a.empty()) continue;
    directed_paths(graph, root, [&](std::size_t v) { return v == outcome; }, scratch, to_y);

    for (const auto& pa : to_a) {
      for (const auto& py : to_y) {
        bool disjoint = true;
        for (std::size_t i = 1; i < pa.size() && disjoint; ++i)
          disjoint = std::find(py.begin() + 1, py.end(), pa[i]) == py.end();
        if (disjoint) result.push_back({graph.node(root).id, ids(graph, pa), ids(graph, py)});
      }
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

Classification classify_detailed(const BackdoorPath& path, const CausalGraph& graph) {
  Classification out;
  const auto root = graph.require(path.root);
  const auto root_role = graph.node(root).role;
  const auto& chain = path.to_treatment;

  bool dc = is_time_node(root_role) && chain.size() == 2 &&
            graph.node(graph.require(chain[1])).role == NodeRole::Treatment;
  bool cmv = false;
  bool cuv = false;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    const auto& from = graph.node(graph.require(chain[i]));
    const auto& to = graph.node(graph.require(chain[i + 1]));
    if (!is_time_node(to.role)) continue;
    if (from.measured) cmv = true;
    if (i == 0 && root_role == NodeRole::Unmeasured) cuv = true;
  }
  if (dc) out.matched.push_back(BiasCategory::DC);
  if (cmv) out.matched.push_back(BiasCategory::CMV);
  if (cuv) out.matched.push_back(BiasCategory::CUV);
  out.cofired = out.matched.size() > 1;
  out.category = out.matched.empty() ? BiasCategory::Other : out.matched.front();
  return out;
}

BiasCategory classify(const BackdoorPath& path, const CausalGraph& graph) {
  return classify_detailed(path, graph).category;
}

bool d_separated(const CausalGraph& graph, const std::vector<std::size_t>& xs,
                 const std::vector<std::size_t>& ys, const std::vector<std::size_t>& given) {
  const auto n = graph.size();
  std::vector<bool> observed(n, false);
  for (auto z : given) observed[z] = true;

  // Nodes that are observed or have an observed descendant.
  std::vector<bool> opens_collider(n, false);
  {
    std::vector<std::size_t> stack(given.begin(), given.end());
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (opens_collider[v]) continue;
      opens_collider[v] = true;
      for (auto p : graph.parents(v)) stack.push_back(p);
    }
  }

  // (node, arrived-from-child) states; from_child means travelling up.
  std::vector<bool> visited_up(n, false), visited_down(n, false), reached(n, false);
  std::vector<std::pair<std::size_t, bool>> stack;
  for (auto x : xs) stack.emplace_back(x, true);
  while (!stack.empty()) {
    auto [v, up] = stack.back();
    stack.pop_back();
    if (up ? visited_up[v] : visited_down[v]) continue;
    (up ? visited_up : visited_down)[v] = true;
    if (!observed[v]) reached[v] = true;
    if (up && !observed[v]) {
      for (auto p : graph.parents(v)) stack.emplace_back(p, true);
      for (auto c : graph.children(v)) stack.emplace_back(c, false);
    } else if (!up) {
      if (!observed[v])
        for (auto c : graph.children(v)) stack.emplace_back(c, false);
      if (opens_collider[v])
        for (auto p : graph.parents(v)) stack.emplace_back(p, true);
    }
  }
  for (auto y : ys)
    if (reached[y]) return false;
  return true;
}

namespace {

struct SelectionSearch {
  const CausalGraph& g;
  std::vector<bool> in_z;
  std::vector<bool> opens;     // in Z or has a descendant in Z
  std::vector<bool> relevant;  // ancestral set of treatments, outcome and Z
  std::map<std::string, std::pair<std::size_t, std::string>> found;  // collider -> (length, path text)

  std::vector<std::size_t> nodes;
  std::vector<bool> forward;  // forward[i]: edge nodes[i] -> nodes[i+1]
  std::vector<bool> on_path;

  std::string describe() const {
    std::string s = g.node(nodes[0]).id;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      s += forward[i] ? " -> " : " <- ";
      s += g.node(nodes[i + 1]).id;
    }
    return s;
  }

  void record() {
    bool causal = std::all_of(forward.begin(), forward.end(), [](bool f) { return f; });
    if (causal) return;
    std::vector<std::size_t> colliders;
    for (std::size_t i = 1; i + 1 < nodes.size(); ++i)
      if (forward[i - 1] && !forward[i]) colliders.push_back(nodes[i]);
    if (colliders.empty()) return;  // open without conditioning: confounding, not selection
    const auto text = describe();
    for (auto c : colliders) {
      std::pair<std::size_t, std::string> candidate{nodes.size(), text};
      auto [it, inserted] = found.emplace(g.node(c).id, candidate);
      if (!inserted && candidate < it->second) it->second = candidate;
    }
  }

  // Extend the path ending at nodes.back(); `last_forward` is the direction
  // of the edge used to arrive there.
  void extend(std::size_t target) {
    const auto v = nodes.back();
    if (v == target) {
      record();
      return;
    }
    auto step = [&](std::size_t next, bool fwd) {
      if (on_path[next] || !relevant[next]) return;
      if (nodes.size() >= 2) {
        const bool arrived_forward = forward.back();
        const bool collider = arrived_forward && !fwd;
        if (collider ? !opens[v] : in_z[v]) return;
      }
      nodes.push_back(next);
      forward.push_back(fwd);
      on_path[next] = true;
      extend(target);
      on_path[next] = false;
      forward.pop_back();
      nodes.pop_back();
    };
    for (auto c : g.children(v)) step(c, true);
    for (auto p : g.parents(v)) step(p, false);
  }
};

}  // namespace

std::vector<SelectionFinding> detect_selection_bias(const CausalGraph& graph,
                                                    const std::vector<std::string>& conditioning_set) {
  const auto n = graph.size();
  std::vector<std::size_t> z;
  for (const auto& id : conditioning_set) z.push_back(graph.require(id));
  if (z.empty()) return {};

  SelectionSearch search{graph, std::vector<bool>(n, false), std::vector<bool>(n, false),
                         std::vector<bool>(n, false), {}, {}, {}, std::vector<bool>(n, false)};
  for (auto v : z) search.in_z[v] = true;

  auto mark_ancestors = [&](std::vector<bool>& mark, std::vector<std::size_t> stack) {
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (mark[v]) continue;
      mark[v] = true;
      for (auto p : graph.parents(v)) stack.push_back(p);
    }
  };
  mark_ancestors(search.opens, z);
  auto treatments = graph.nodes_with_role(NodeRole::Treatment);
  std::vector<std::size_t> seeds = z;
  seeds.insert(seeds.end(), treatments.begin(), treatments.end());
  seeds.push_back(graph.outcome());
  mark_ancestors(search.relevant, seeds);

  for (auto a : treatments) {
    if (search.in_z[a]) continue;
    search.nodes = {a};
    search.forward.clear();
    search.on_path[a] = true;
    search.extend(graph.outcome());
    search.on_path[a] = false;
  }

  std::vector<std::string> sorted_z = conditioning_set;
  std::sort(sorted_z.begin(), sorted_z.end());
  std::vector<SelectionFinding> out;
  for (auto& [collider, path] : search.found) out.push_back({collider, path.second, sorted_z});
  return out;
}

Recommendation recommend_method(const std::set<BiasCategory>& categories, bool selection_present,
                                bool time_agnostic_target, bool equal_measurement_count) {
  const bool needs_tac = categories.count(BiasCategory::DC) || categories.count(BiasCategory::CUV);
  const bool cmv = categories.count(BiasCategory::CMV) > 0;
  const bool tac_usable = time_agnostic_target && equal_measurement_count;

  if (needs_tac) {
    if (!tac_usable)
      throw Error(ErrorCode::InapplicableTarget,
                  "DC/CUV need time-as-confounder, which requires a measurement-time-agnostic "
                  "target and equal measurement counts");
    return {selection_present ? Method::TAC_RMT : Method::TAC, {}};
  }
  if (!cmv && !selection_present) return {Method::IPTW, {}};

  Recommendation rec{Method::RMT, {}};
  if (tac_usable) rec.alternates.push_back(selection_present ? Method::TAC_RMT : Method::TAC);
  return rec;
}

std::set<BiasCategory> PathReport::categories() const {
  std::set<BiasCategory> out;
  for (const auto& c : classifications) out.insert(c.category);
  return out;
}

PathReport analyze_paths(const CausalGraph& graph, const std::vector<std::string>& conditioning_set,
                         bool time_agnostic_target, bool equal_measurement_count) {
  PathReport report;
  auto pruned = prune_assumed_edges(graph);
  report.pruned_edges = pruned.removed;
  report.paths = enumerate_backdoor_paths(pruned.graph);
  for (const auto& p : report.paths) report.classifications.push_back(classify_detailed(p, pruned.graph));
  report.selection = detect_selection_bias(graph, conditioning_set);
  report.conditioning_set = conditioning_set;
  std::sort(report.conditioning_set.begin(), report.conditioning_set.end());
  report.time_agnostic_target = time_agnostic_target;
  report.equal_measurement_count = equal_measurement_count;
  try {
    report.recommendation = recommend_method(report.categories(), !report.selection.empty(),
                                             time_agnostic_target, equal_measurement_count);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InapplicableTarget) throw;
    report.recommendation_error = e.what();
  }
  return report;
}

namespace {

std::string arrow_join(const std::vector<std::string>& nodes) {
  std::string s;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) s += " -> ";
    s += nodes[i];
  }
  return s;
}

}  // namespace

std::string render_text(const PathReport& report) {
  std::ostringstream out;
  out << "pruned edges: " << report.pruned_edges.size() << '\n';
  for (const auto& [s, t] : report.pruned_edges) out << "  " << s << " -> " << t << '\n';

  out << "backdoor paths: " << report.paths.size() << '\n';
  if (!report.paths.empty()) {
    out << "  category  root  to_treatment | to_outcome\n";
    for (std::size_t i = 0; i < report.paths.size(); ++i) {
      const auto& p = report.paths[i];
      const auto& c = report.classifications[i];
      std::string cat(category_name(c.category));
      if (c.cofired) cat += "*";
      cat.resize(std::max<std::size_t>(cat.size(), 8), ' ');
      out << "  " << cat << "  " << p.root << "  " << arrow_join(p.to_treatment) << " | "
          << arrow_join(p.to_outcome) << '\n';
    }
  }

  std::map<BiasCategory, int> counts;
  for (const auto& c : report.classifications) ++counts[c.category];
  out << "categories:";
  for (auto cat : {BiasCategory::DC, BiasCategory::CMV, BiasCategory::CUV, BiasCategory::Other})
    out << ' ' << category_name(cat) << '=' << counts[cat];
  out << '\n';

  out << "conditioning set: {";
  for (std::size_t i = 0; i < report.conditioning_set.size(); ++i)
    out << (i ? ", " : "") << report.conditioning_set[i];
  out << "}\n";
  out << "selection findings: " << report.selection.size() << '\n';
  for (const auto& f : report.selection) out << "  collider " << f.collider << ": " << f.opened_path << '\n';

  out << "recommendation: ";
  if (report.recommendation) {
    out << method_name(report.recommendation->method);
    if (!report.recommendation->alternates.empty()) {
      out << " (alternates:";
      for (auto m : report.recommendation->alternates) out << ' ' << method_name(m);
      out << ')';
    }
  } else {
    out << "none (" << report.recommendation_error << ')';
  }
  out << '\n';
  return out.str();
}

std::string render_json(const PathReport& report) {
  using nlohmann::json;
  json j;
  j["pruned_edges"] = json::array();
  for (const auto& [s, t] : report.pruned_edges) j["pruned_edges"].push_back({s, t});
  j["paths"] = json::array();
  std::map<std::string, int> counts{{"DC", 0}, {"CMV", 0}, {"CUV", 0}, {"Other", 0}};
  for (std::size_t i = 0; i < report.paths.size(); ++i) {
    const auto& p = report.paths[i];
    const auto& c = report.classifications[i];
    j["paths"].push_back({{"root", p.root},
                          {"to_treatment", p.to_treatment},
                          {"to_outcome", p.to_outcome},
                          {"category", category_name(c.category)},
                          {"cofired", c.cofired}});
    ++counts[std::string(category_name(c.category))];
  }
  j["categories"] = counts;
  j["selection"] = json::array();
  for (const auto& f : report.selection)
    j["selection"].push_back(
        {{"collider", f.collider}, {"opened_path", f.opened_path}, {"conditioning_set", f.conditioning_set}});
  if (report.recommendation) {
    json alts = json::array();
    for (auto m : report.recommendation->alternates) alts.push_back(method_name(m));
    j["recommendation"] = {{"method", method_name(report.recommendation->method)}, {"alternates", alts}};
  } else {
    j["recommendation"] = {{"method", nullptr}, {"error", report.recommendation_error}};
  }
  return j.dump(2) + "\n";
}

}  // namespace mtbias
