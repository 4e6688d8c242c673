#include "mtbias/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace mtbias {

std::string_view role_letter(NodeRole role) {
  switch (role) {
    case NodeRole::Covariate: return "L";
    case NodeRole::Treatment: return "A";
    case NodeRole::MeasurementTime: return "T";
    case NodeRole::MeasurementIndicator: return "N";
    case NodeRole::Unmeasured: return "U";
    case NodeRole::Outcome: return "Y";
  }
  return "?";
}

std::optional<NodeRole> parse_role(std::string_view token) {
  if (token == "L" || token == "covariate") return NodeRole::Covariate;
  if (token == "A" || token == "treatment") return NodeRole::Treatment;
  if (token == "T" || token == "time") return NodeRole::MeasurementTime;
  if (token == "N" || token == "indicator") return NodeRole::MeasurementIndicator;
  if (token == "U" || token == "unmeasured") return NodeRole::Unmeasured;
  if (token == "Y" || token == "outcome") return NodeRole::Outcome;
  return std::nullopt;
}

std::string_view flavor_name(Flavor flavor) { return flavor == Flavor::TAV ? "tav" : "dt"; }

int role_rank(NodeRole role) {
  switch (role) {
    case NodeRole::Unmeasured: return 0;
    case NodeRole::MeasurementTime:
    case NodeRole::MeasurementIndicator: return 1;
    case NodeRole::Covariate: return 2;
    case NodeRole::Treatment: return 3;
    case NodeRole::Outcome: return 4;
  }
  return 0;
}

namespace {

std::string join_issues(const std::vector<GraphIssue>& issues) {
  std::ostringstream out;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) out << "; ";
    if (issues[i].line > 0) out << "line " << issues[i].line << ": ";
    out << to_string(issues[i].code) << ": " << issues[i].message;
  }
  return out.str();
}

ErrorCode first_code(const std::vector<GraphIssue>& issues) {
  return issues.empty() ? ErrorCode::ParseError : issues.front().code;
}

}  // namespace

GraphError::GraphError(std::vector<GraphIssue> issues)
    : Error(first_code(issues), join_issues(issues)), issues_(std::move(issues)) {}

std::optional<std::size_t> CausalGraph::index_of(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t CausalGraph::require(std::string_view id) const {
  auto idx = index_of(id);
  if (!idx) throw Error(ErrorCode::UnknownNode, "no node '" + std::string(id) + "'");
  return *idx;
}

bool CausalGraph::has_edge(std::size_t from, std::size_t to) const {
  const auto& c = children_.at(from);
  return std::find(c.begin(), c.end(), to) != c.end();
}

bool CausalGraph::has_edge(std::string_view from, std::string_view to) const {
  auto a = index_of(from);
  auto b = index_of(to);
  return a && b && has_edge(*a, *b);
}

std::vector<std::size_t> CausalGraph::nodes_with_role(NodeRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].role == role) out.push_back(i);
  return out;
}

void CausalGraph::index() {
  lookup_.clear();
  children_.assign(nodes_.size(), {});
  parents_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    lookup_.emplace(nodes_[i].id, i);
    if (nodes_[i].role == NodeRole::Outcome) outcome_ = i;
  }
  for (auto [s, t] : edges_) {
    children_[s].push_back(t);
    parents_[t].push_back(s);
  }
}

std::vector<std::size_t> CausalGraph::topological_order() const {
  std::vector<std::size_t> indegree(nodes_.size(), 0);
  for (auto [s, t] : edges_) ++indegree[t];
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (indegree[i] == 0) ready.push(i);
  std::vector<std::size_t> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    auto v = ready.top();
    ready.pop();
    order.push_back(v);
    for (auto c : children_[v])
      if (--indegree[c] == 0) ready.push(c);
  }
  return order;
}

std::vector<bool> CausalGraph::descendants(std::size_t index) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<std::size_t> stack(children_.at(index).begin(), children_.at(index).end());
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = true;
    for (auto c : children_[v]) stack.push_back(c);
  }
  return seen;
}

CausalGraph CausalGraph::without_edges(
    const std::vector<std::pair<std::size_t, std::size_t>>& removed) const {
  CausalGraph copy = *this;
  std::set<std::pair<std::size_t, std::size_t>> drop(removed.begin(), removed.end());
  std::erase_if(copy.edges_, [&](const auto& e) { return drop.count(e) > 0; });
  copy.index();
  return copy;
}

bool operator==(const CausalGraph& a, const CausalGraph& b) {
  if (a.flavor_ != b.flavor_ || a.frozen_treatment_ != b.frozen_treatment_) return false;
  if (a.nodes_.size() != b.nodes_.size() || a.edges_.size() != b.edges_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const auto& x = a.nodes_[i];
    const auto& y = b.nodes_[i];
    if (x.id != y.id || x.role != y.role || x.time_index != y.time_index || x.measured != y.measured)
      return false;
  }
  return a.edges_ == b.edges_;
}

CausalGraph build_graph(Flavor flavor, const std::vector<NodeSpec>& node_specs,
                        const std::vector<EdgeSpec>& edge_specs, bool frozen_treatment) {
  std::vector<GraphIssue> issues;
  CausalGraph g;
  g.flavor_ = flavor;
  g.frozen_treatment_ = frozen_treatment;

  if (frozen_treatment && flavor != Flavor::DT)
    issues.push_back({ErrorCode::RoleFlavorMismatch,
                      "frozen_treatment applies to discrete-time graphs only", 0});

  std::unordered_map<std::string, std::size_t> seen;
  int outcomes = 0;
  for (const auto& spec : node_specs) {
    if (spec.id.empty()) {
      issues.push_back({ErrorCode::ParseError, "empty node id", spec.line});
      continue;
    }
    if (seen.count(spec.id)) {
      issues.push_back({ErrorCode::DuplicateNode, "node '" + spec.id + "' declared twice", spec.line});
      continue;
    }
    if (spec.time_index < 0)
      issues.push_back({ErrorCode::TemporalOrderViolation,
                        "node '" + spec.id + "' has negative occasion index", spec.line});
    if (spec.role == NodeRole::MeasurementTime && flavor == Flavor::DT)
      issues.push_back({ErrorCode::RoleFlavorMismatch,
                        "measurement-time node '" + spec.id + "' in a DT graph", spec.line});
    if (spec.role == NodeRole::MeasurementIndicator && flavor == Flavor::TAV)
      issues.push_back({ErrorCode::RoleFlavorMismatch,
                        "measurement-indicator node '" + spec.id + "' in a TAV graph", spec.line});
    if (spec.role == NodeRole::Outcome) ++outcomes;
    seen.emplace(spec.id, g.nodes_.size());
    g.nodes_.push_back({spec.id, spec.role, spec.time_index, spec.role != NodeRole::Unmeasured});
  }
  if (outcomes != 1)
    issues.push_back({ErrorCode::OutcomeCount,
                      "expected exactly one outcome node, found " + std::to_string(outcomes), 0});

  std::set<std::pair<std::size_t, std::size_t>> unique_edges;
  for (const auto& e : edge_specs) {
    auto s = seen.find(e.source);
    auto t = seen.find(e.target);
    if (s == seen.end() || t == seen.end()) {
      const auto& missing = s == seen.end() ? e.source : e.target;
      issues.push_back({ErrorCode::UnknownNode, "edge endpoint '" + missing + "' is not a node", e.line});
      continue;
    }
    if (!unique_edges.insert({s->second, t->second}).second) {
      issues.push_back({ErrorCode::ParseError, "duplicate edge " + e.source + " -> " + e.target, e.line});
      continue;
    }
    const auto& src = g.nodes_[s->second];
    const auto& dst = g.nodes_[t->second];
    if (s->second == t->second) {
      issues.push_back({ErrorCode::CycleDetected, "self loop on '" + e.source + "'", e.line});
      continue;
    }
    bool ok = src.time_index < dst.time_index ||
              (src.time_index == dst.time_index && role_rank(src.role) <= role_rank(dst.role));
    if (src.role == NodeRole::Outcome) ok = false;
    if (!ok)
      issues.push_back({ErrorCode::TemporalOrderViolation,
                        "edge " + e.source + " -> " + e.target + " runs against time", e.line});
    g.edges_.emplace_back(s->second, t->second);
  }

  g.index();
  if (g.topological_order().size() != g.nodes_.size())
    issues.push_back({ErrorCode::CycleDetected, "graph contains a directed cycle", 0});

  if (!issues.empty()) throw GraphError(std::move(issues));
  return g;
}

namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

CausalGraph parse_graph(std::string_view text) {
  std::vector<GraphIssue> issues;
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  Flavor flavor = Flavor::TAV;
  bool frozen = false;
  bool flavor_seen = false;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tok = tokenize(line);
    if (tok.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto keyword = tok[0];
    if (keyword == "flavor") {
      if (tok.size() != 2 || (tok[1] != "tav" && tok[1] != "dt")) {
        issues.push_back({ErrorCode::ParseError, "expected 'flavor tav|dt'", line_no});
      } else if (flavor_seen) {
        issues.push_back({ErrorCode::ParseError, "flavor declared twice", line_no});
      } else {
        flavor = tok[1] == "tav" ? Flavor::TAV : Flavor::DT;
        flavor_seen = true;
      }
    } else if (keyword == "attr") {
      if (tok.size() == 2 && tok[1] == "frozen_treatment")
        frozen = true;
      else
        issues.push_back({ErrorCode::ParseError, "unknown attribute", line_no});
    } else if (keyword == "node") {
      if (tok.size() != 4) {
        issues.push_back({ErrorCode::ParseError, "expected 'node <id> <role> <k>'", line_no});
      } else {
        auto role = parse_role(tok[2]);
        int k = 0;
        auto [ptr, ec] = std::from_chars(tok[3].data(), tok[3].data() + tok[3].size(), k);
        if (!role)
          issues.push_back({ErrorCode::ParseError, "unknown role '" + std::string(tok[2]) + "'", line_no});
        else if (ec != std::errc() || ptr != tok[3].data() + tok[3].size())
          issues.push_back({ErrorCode::ParseError, "bad occasion index '" + std::string(tok[3]) + "'", line_no});
        else
          nodes.push_back({std::string(tok[1]), *role, k, line_no});
      }
    } else if (keyword == "edge") {
      if (tok.size() != 3)
        issues.push_back({ErrorCode::ParseError, "expected 'edge <src> <dst>'", line_no});
      else
        edges.push_back({std::string(tok[1]), std::string(tok[2]), line_no});
    } else {
      issues.push_back({ErrorCode::ParseError, "unknown statement '" + std::string(keyword) + "'", line_no});
    }
    if (end == text.size()) break;
  }
  if (!issues.empty()) throw GraphError(std::move(issues));
  return build_graph(flavor, nodes, edges, frozen);
}

CausalGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_graph(buffer.str());
}

std::string serialize_graph(const CausalGraph& graph) {
  std::ostringstream out;
  out << "flavor " << flavor_name(graph.flavor()) << '\n';
  if (graph.frozen_treatment()) out << "attr frozen_treatment\n";
  for (const auto& n : graph.nodes())
    out << "node " << n.id << ' ' << role_letter(n.role) << ' ' << n.time_index << '\n';
  for (auto [s, t] : graph.edges()) out << "edge " << graph.node(s).id << ' ' << graph.node(t).id << '\n';
  return out.str();
}

CausalGraph standard_tav_template(int follow_ups, const TemplateOptions& options) {
  if (follow_ups < 1) throw Error(ErrorCode::InvalidConfig, "template needs at least one follow-up");
  const int K = follow_ups;
  auto L = [](int k) { return "L" + std::to_string(k); };
  auto A = [](int k) { return "A" + std::to_string(k); };
  auto T = [](int k) { return "T" + std::to_string(k); };
  auto U = [](int k) { return "U" + std::to_string(k); };

  std::vector<NodeSpec> nodes;
  for (int k = 0; k <= K; ++k) {
    if (options.worst_case && k < K) nodes.push_back({U(k + 1), NodeRole::Unmeasured, k});
    if (k > 0) nodes.push_back({T(k), NodeRole::MeasurementTime, k});
    nodes.push_back({L(k), NodeRole::Covariate, k});
    nodes.push_back({A(k), NodeRole::Treatment, k});
  }
  nodes.push_back({"Y", NodeRole::Outcome, K + 1});

  std::vector<EdgeSpec> edges;
  auto add = [&](std::string s, std::string t) { edges.push_back({std::move(s), std::move(t)}); };
  for (int k = 0; k <= K; ++k) {
    // into occasion k, base time-varying confounding structure
    if (k > 0) {
      add(T(k), L(k));
      add(T(k), A(k));
    }
    for (int j = 0; j < k; ++j) {
      add(L(j), L(k));
      add(A(j), L(k));
    }
    for (int j = 0; j <= k; ++j) add(L(j), A(k));
    if (options.treatment_carryover)
      for (int j = 0; j < k; ++j) add(A(j), A(k));
  }
  for (int k = 0; k <= K; ++k) {
    add(L(k), "Y");
    add(A(k), "Y");
  }

  if (options.worst_case) {
    for (int k = 1; k <= K; ++k) {
      for (int j = 0; j < k; ++j) {
        add(L(j), T(k));
        add(A(j), T(k));
      }
      for (int j = 1; j < k; ++j) add(T(j), T(k));
      for (int m = k + 1; m <= K; ++m) {
        add(T(k), L(m));
        add(T(k), A(m));
      }
      add(T(k), "Y");
    }
    for (int j = 1; j <= K; ++j) {
      for (int k = j - 1; k <= K; ++k) add(U(j), L(k));
      for (int k = j; k <= K; ++k) add(U(j), T(k));
      add(U(j), "Y");
    }
  }

  // Order edges by source, then target declaration position.
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i].id] = i;
  std::stable_sort(edges.begin(), edges.end(), [&](const EdgeSpec& a, const EdgeSpec& b) {
    return std::pair(pos[a.source], pos[a.target]) < std::pair(pos[b.source], pos[b.target]);
  });
  return build_graph(Flavor::TAV, nodes, edges);
}

}  // namespace mtbias
