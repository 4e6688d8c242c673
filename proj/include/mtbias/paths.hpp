#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "mtbias/graph.hpp"

namespace mtbias {

struct BackdoorPath {
  std::string root;
  std::vector<std::string> to_treatment;  // root -> ... -> treatment node
  std::vector<std::string> to_outcome;    // root -> ... -> outcome

  friend bool operator==(const BackdoorPath&, const BackdoorPath&) = default;
  friend auto operator<=>(const BackdoorPath&, const BackdoorPath&) = default;
};

enum class BiasCategory { DC, CMV, CUV, Other };

std::string_view category_name(BiasCategory category);

struct Classification {
  BiasCategory category = BiasCategory::Other;
  /// More than one category definition matched; `category` holds the one
  /// with precedence DC > CMV > CUV.
  bool cofired = false;
  std::vector<BiasCategory> matched;
};

struct PrunedGraph {
  CausalGraph graph;
  std::vector<std::pair<std::string, std::string>> removed;  // in graph edge order
};

struct SelectionFinding {
  std::string collider;
  std::string opened_path;  // e.g. "A1 -> N_Y <- L1 -> Y"
  std::vector<std::string> conditioning_set;
};

enum class Method { IPTW, RMT, TAC, TAC_RMT };

std::string_view method_name(Method method);

struct Recommendation {
  Method method = Method::IPTW;
  std::vector<Method> alternates;
};

/// Removes edges assumed absent before enumerating: unmeasured -> treatment
/// (violates exchangeability with or without irregular times) and covariate
/// -> treatment (handled by ordinary IPTW).
PrunedGraph prune_assumed_edges(const CausalGraph& graph);

/// Every pair of directed paths from a common root to a treatment node and to
/// the outcome whose node sets meet only at the root. Treatment nodes are
/// never roots or interior nodes: past treatment is conditioned on by every
/// estimator. Sorted by root id, then node sequences.
std::vector<BackdoorPath> enumerate_backdoor_paths(const CausalGraph& graph);

Classification classify_detailed(const BackdoorPath& path, const CausalGraph& graph);
BiasCategory classify(const BackdoorPath& path, const CausalGraph& graph);

/// Bayes-ball reachability. True when every node in `xs` is d-separated from
/// every node in `ys` given `given`.
bool d_separated(const CausalGraph& graph, const std::vector<std::size_t>& xs,
                 const std::vector<std::size_t>& ys, const std::vector<std::size_t>& given);

/// Colliders that open an otherwise blocked, non-causal path between a
/// treatment node and the outcome once `conditioning_set` is conditioned on.
/// One finding per collider, reporting its shortest opened path (ties
/// broken lexicographically). Throws UnknownNode for ids not in the graph.
std::vector<SelectionFinding> detect_selection_bias(const CausalGraph& graph,
                                                    const std::vector<std::string>& conditioning_set);

/// Method choice for irregular measurement times:
///   no DC/CMV/CUV and no selection  -> IPTW
///   DC or CUV                       -> TAC, or TAC+RMT with selection; needs a
///                                      measurement-time-agnostic target and
///                                      equal measurement counts, otherwise
///                                      InapplicableTarget
///   only CMV and/or selection       -> RMT (TAC listed as alternate when usable)
Recommendation recommend_method(const std::set<BiasCategory>& categories, bool selection_present,
                                bool time_agnostic_target, bool equal_measurement_count);

struct PathReport {
  std::vector<std::pair<std::string, std::string>> pruned_edges;
  std::vector<BackdoorPath> paths;
  std::vector<Classification> classifications;
  std::vector<SelectionFinding> selection;
  std::vector<std::string> conditioning_set;
  bool time_agnostic_target = true;
  bool equal_measurement_count = true;
  std::optional<Recommendation> recommendation;
  std::string recommendation_error;

  std::set<BiasCategory> categories() const;
};

PathReport analyze_paths(const CausalGraph& graph, const std::vector<std::string>& conditioning_set,
                         bool time_agnostic_target = true, bool equal_measurement_count = true);

std::string render_text(const PathReport& report);
std::string render_json(const PathReport& report);

}  // namespace mtbias
