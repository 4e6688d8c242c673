#pragma once

// Time-indexed causal DAGs for longitudinal data with irregular measurement
// times. Two flavors are supported:
//   TAV  measurement time is a node (role T); treatments are indexed by it.
//   DT   time is discretized; each slot carries an indicator node (role N).
//
// Graphs are immutable once built. All construction goes through
// build_graph(), which validates the whole graph and reports every problem
// it finds rather than stopping at the first.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mtbias/error.hpp"

namespace mtbias {

enum class Flavor { TAV, DT };

enum class NodeRole {
  Covariate,             // L
  Treatment,             // A
  MeasurementTime,       // T
  MeasurementIndicator,  // N
  Unmeasured,            // U
  Outcome,               // Y
};

std::string_view role_letter(NodeRole role);
std::optional<NodeRole> parse_role(std::string_view token);
std::string_view flavor_name(Flavor flavor);

/// Ordering of roles inside a single occasion: U, then T/N, then L, then A,
/// then Y.
int role_rank(NodeRole role);

struct CausalNode {
  std::string id;
  NodeRole role = NodeRole::Covariate;
  int time_index = 0;
  bool measured = true;
};

struct NodeSpec {
  std::string id;
  NodeRole role = NodeRole::Covariate;
  int time_index = 0;
  int line = 0;  // source line, 0 when not parsed from text
};

struct EdgeSpec {
  std::string source;
  std::string target;
  int line = 0;
};

struct GraphIssue {
  ErrorCode code;
  std::string message;
  int line = 0;
};

/// Thrown by build_graph() and parse_graph(); carries every issue found.
class GraphError : public Error {
 public:
  explicit GraphError(std::vector<GraphIssue> issues);
  const std::vector<GraphIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<GraphIssue> issues_;
};

class CausalGraph {
 public:
  Flavor flavor() const noexcept { return flavor_; }
  bool frozen_treatment() const noexcept { return frozen_treatment_; }

  const std::vector<CausalNode>& nodes() const noexcept { return nodes_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const CausalNode& node(std::size_t index) const { return nodes_.at(index); }
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::size_t require(std::string_view id) const;  // throws UnknownNode

  const std::vector<std::size_t>& children(std::size_t index) const { return children_.at(index); }
  const std::vector<std::size_t>& parents(std::size_t index) const { return parents_.at(index); }
  bool has_edge(std::size_t from, std::size_t to) const;
  bool has_edge(std::string_view from, std::string_view to) const;

  std::size_t outcome() const noexcept { return outcome_; }
  std::vector<std::size_t> nodes_with_role(NodeRole role) const;

  /// Node indices in a topological order (ties broken by declaration order).
  std::vector<std::size_t> topological_order() const;
  /// Every node reachable from `index` along directed edges, excluding itself.
  std::vector<bool> descendants(std::size_t index) const;

  /// Copy of this graph without the listed edges (given as node indices).
  CausalGraph without_edges(const std::vector<std::pair<std::size_t, std::size_t>>& removed) const;

  friend bool operator==(const CausalGraph& a, const CausalGraph& b);

 private:
  friend CausalGraph build_graph(Flavor, const std::vector<NodeSpec>&, const std::vector<EdgeSpec>&, bool);
  CausalGraph() = default;
  void index();

  Flavor flavor_ = Flavor::TAV;
  bool frozen_treatment_ = false;
  std::vector<CausalNode> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<std::size_t>> parents_;
  std::size_t outcome_ = 0;
};

/// Validates and builds a graph. Throws GraphError listing every violation:
/// duplicate or unknown ids, role/flavor mismatches, outcome count, temporal
/// order violations and cycles.
CausalGraph build_graph(Flavor flavor, const std::vector<NodeSpec>& nodes,
                        const std::vector<EdgeSpec>& edges, bool frozen_treatment = false);

/// Line-oriented graph text:
///   flavor tav|dt
///   attr frozen_treatment
///   node <id> <role> <k>
///   edge <src> <dst>
/// `#` starts a comment. Parse and validation problems carry line numbers.
CausalGraph parse_graph(std::string_view text);
CausalGraph load_graph(const std::string& path);
std::string serialize_graph(const CausalGraph& graph);

struct TemplateOptions {
  /// Add unmeasured nodes and every temporally admissible edge into and out
  /// of the measurement times. Off gives the plain time-varying confounding
  /// graph with T_k -> L_k and T_k -> A_k only.
  bool worst_case = true;
  /// Add A_j -> A_k carry-over edges.
  bool treatment_carryover = false;
};

/// TAV graph with baseline L0, A0, follow-ups k = 1..K each with T_k, L_k,
/// A_k, and a terminal outcome Y. With worst_case, one unmeasured node U_k
/// per follow-up sits at occasion k-1 and may affect every later covariate,
/// measurement time and the outcome (never a treatment).
CausalGraph standard_tav_template(int follow_ups, const TemplateOptions& options = {});

}  // namespace mtbias
