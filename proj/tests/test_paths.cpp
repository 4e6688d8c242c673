#include <doctest.h>

#include <algorithm>
#include <set>

#include "mtbias/dataio.hpp"
#include "mtbias/paths.hpp"
#include "oracles.hpp"

using namespace mtbias;

namespace {

CausalGraph fixture(const std::string& name) { return load_graph(oracle::data_path("data/" + name + ".graph")); }

std::set<BiasCategory> categories_of(const CausalGraph& g) {
  std::set<BiasCategory> out;
  auto pruned = prune_assumed_edges(g).graph;
  for (const auto& p : enumerate_backdoor_paths(pruned)) out.insert(classify(p, pruned));
  return out;
}

}  // namespace

TEST_CASE("pruning drops L->A edges and logs them") {
  auto g = fixture("triangle");
  auto p = prune_assumed_edges(g);
  CHECK_FALSE(p.graph.has_edge("L", "A"));
  REQUIRE(p.removed.size() == 1);
  CHECK(p.removed[0] == std::make_pair(std::string("L"), std::string("A")));
}

TEST_CASE("pruning a graph with nothing to prune is a fixpoint") {
  auto g = parse_graph("flavor tav\nnode L0 L 0\nnode A0 A 0\nnode Y Y 1\nedge L0 Y\nedge A0 Y\n");
  auto p = prune_assumed_edges(g);
  CHECK(p.removed.empty());
  CHECK(p.graph == g);
}

TEST_CASE("pruning the template removes exactly its L->A edges") {
  auto t = standard_tav_template(1);
  std::set<std::pair<std::string, std::string>> expected;
  for (auto [s, d] : t.edges()) {
    const bool la = t.node(s).role == NodeRole::Covariate && t.node(d).role == NodeRole::Treatment;
    if (!la) expected.emplace(t.node(s).id, t.node(d).id);
  }
  auto p = prune_assumed_edges(t);
  std::set<std::pair<std::string, std::string>> got;
  for (auto [s, d] : p.graph.edges()) got.emplace(p.graph.node(s).id, p.graph.node(d).id);
  CHECK(got == expected);
}

TEST_CASE("basic TAV graph has the T1 rooted direct-confounding path") {
  auto g = prune_assumed_edges(fixture("tav_basic")).graph;
  auto paths = enumerate_backdoor_paths(g);
  BackdoorPath expected{"T1", {"T1", "A1"}, {"T1", "L1", "Y"}};
  CHECK(std::find(paths.begin(), paths.end(), expected) != paths.end());
  CHECK(classify(expected, g) == BiasCategory::DC);
}

TEST_CASE("no paths through T when T does not affect treatment") {
  auto g = parse_graph(
      "flavor tav\nnode L0 L 0\nnode A0 A 0\nnode T1 T 1\nnode L1 L 1\nnode A1 A 1\nnode Y Y 2\n"
      "edge L0 T1\nedge T1 L1\nedge L1 Y\nedge A0 Y\nedge A1 Y\nedge T1 Y\n");
  for (const auto& p : enumerate_backdoor_paths(g)) {
    CHECK(p.root != "T1");
    CHECK(std::find(p.to_treatment.begin(), p.to_treatment.end(), "T1") == p.to_treatment.end());
  }
}

TEST_CASE("confounding triangle has one path rooted at L") {
  auto paths = enumerate_backdoor_paths(fixture("triangle"));
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].root == "L");
  CHECK(paths[0].to_treatment == std::vector<std::string>{"L", "A"});
  CHECK(paths[0].to_outcome == std::vector<std::string>{"L", "Y"});
}

TEST_CASE("the three example paths classify as DC, CMV and CUV") {
  auto dc = prune_assumed_edges(fixture("dc")).graph;
  CHECK(classify({"T1", {"T1", "A1"}, {"T1", "Y"}}, dc) == BiasCategory::DC);
  auto cmv = prune_assumed_edges(fixture("cmv")).graph;
  CHECK(classify({"L0", {"L0", "T1", "A1"}, {"L0", "Y"}}, cmv) == BiasCategory::CMV);
  auto cuv = prune_assumed_edges(fixture("cuv")).graph;
  CHECK(classify({"U", {"U", "T1", "A1"}, {"U", "Y"}}, cuv) == BiasCategory::CUV);
  CHECK(categories_of(fixture("dc")) == std::set<BiasCategory>{BiasCategory::DC});
  CHECK(categories_of(fixture("cmv")) == std::set<BiasCategory>{BiasCategory::CMV});
  CHECK(categories_of(fixture("cuv")) == std::set<BiasCategory>{BiasCategory::CUV});
}

TEST_CASE("co-firing definitions are surfaced with CMV over CUV precedence") {
  // U -> T1 starts the path (CUV) and the measured T1 -> T2 edge lies on it
  // too (CMV).
  auto g = parse_graph(
      "flavor tav\nnode U U 0\nnode A0 A 0\nnode T1 T 1\nnode A1 A 1\nnode T2 T 2\nnode A2 A 2\nnode Y Y 3\n"
      "edge U T1\nedge T1 T2\nedge T2 A2\nedge U Y\nedge A0 Y\nedge A1 Y\nedge A2 Y\n");
  auto c = classify_detailed({"U", {"U", "T1", "T2", "A2"}, {"U", "Y"}}, g);
  CHECK(c.category == BiasCategory::CMV);
  CHECK(c.cofired);
  CHECK(c.matched.size() == 2);
  auto d = classify_detailed({"T2", {"T2", "A2"}, {"T2", "Y"}}, parse_graph(
      "flavor tav\nnode T2 T 2\nnode A2 A 2\nnode Y Y 3\nedge T2 A2\nedge T2 Y\nedge A2 Y\n"));
  CHECK(d.category == BiasCategory::DC);
  CHECK_FALSE(d.cofired);
}

TEST_CASE("selection on N_Y opens a path through collider N_Y") {
  auto g = fixture("selection_dt");
  auto f = detect_selection_bias(g, {"N_Y"});
  REQUIRE(f.size() == 1);
  CHECK(f[0].collider == "N_Y");
  CHECK(f[0].conditioning_set == std::vector<std::string>{"N_Y"});
  CHECK(detect_selection_bias(g, {}).empty());
  CHECK_THROWS_AS(detect_selection_bias(g, {"nope"}), Error);
}

TEST_CASE("selection on T2 in the combined graph reports collider T2") {
  auto g = fixture("cuv_selection");
  auto f = detect_selection_bias(g, {"T2"});
  CHECK(std::any_of(f.begin(), f.end(), [](const SelectionFinding& s) { return s.collider == "T2"; }));
  // every reported collider is conditioned on or has a conditioned descendant
  for (const auto& s : f) {
    auto desc = g.descendants(g.require(s.collider));
    CHECK((s.collider == "T2" || desc[g.require("T2")]));
  }
}

TEST_CASE("recommendations follow the flowchart") {
  CHECK(recommend_method({BiasCategory::CUV}, true, true, true).method == Method::TAC_RMT);
  CHECK(recommend_method({}, false, true, true).method == Method::IPTW);
  auto r = recommend_method({BiasCategory::CMV}, false, true, true);
  CHECK(r.method == Method::RMT);
  CHECK(r.alternates == std::vector<Method>{Method::TAC});
  CHECK(recommend_method({BiasCategory::DC}, false, true, true).method == Method::TAC);
  CHECK(recommend_method({}, true, true, true).method == Method::RMT);
  CHECK_THROWS_AS(recommend_method({BiasCategory::DC}, false, false, true), Error);
  CHECK_THROWS_AS(recommend_method({BiasCategory::CUV}, false, true, false), Error);
  CHECK(recommend_method({BiasCategory::CMV}, false, false, true).alternates.empty());
}

TEST_CASE("emitted paths are directed, end correctly and meet only at the root") {
  for (int k = 1; k <= 2; ++k) {
    auto g = prune_assumed_edges(standard_tav_template(k)).graph;
    auto paths = enumerate_backdoor_paths(g);
    CHECK(!paths.empty());
    CHECK(std::is_sorted(paths.begin(), paths.end()));
    for (const auto& p : paths) {
      REQUIRE(p.to_treatment.size() >= 2);
      REQUIRE(p.to_outcome.size() >= 2);
      CHECK(p.to_treatment.front() == p.root);
      CHECK(p.to_outcome.front() == p.root);
      CHECK(g.node(g.require(p.to_treatment.back())).role == NodeRole::Treatment);
      CHECK(p.to_outcome.back() == "Y");
      for (std::size_t i = 1; i < p.to_treatment.size(); ++i) CHECK(g.has_edge(p.to_treatment[i - 1], p.to_treatment[i]));
      for (std::size_t i = 1; i < p.to_outcome.size(); ++i) CHECK(g.has_edge(p.to_outcome[i - 1], p.to_outcome[i]));
      std::set<std::string> a(p.to_treatment.begin() + 1, p.to_treatment.end());
      for (std::size_t i = 1; i < p.to_outcome.size(); ++i) CHECK(a.count(p.to_outcome[i]) == 0);
      // templates never produce an unclassifiable path, and classify is pure
      const auto c = classify(p, g);
      CHECK(c != BiasCategory::Other);
      CHECK(classify(p, g) == c);
    }
  }
}

TEST_CASE("d-separation basics") {
  auto g = parse_graph(
      "flavor tav\nnode X L 0\nnode M L 0\nnode W L 0\nnode A A 0\nnode Y Y 1\n"
      "edge X M\nedge M A\nedge W A\nedge A Y\n");
  const auto x = g.require("X"), m = g.require("M"), w = g.require("W"), a = g.require("A");
  CHECK_FALSE(d_separated(g, {x}, {a}, {}));
  CHECK(d_separated(g, {x}, {a}, {m}));
  CHECK(d_separated(g, {x}, {w}, {}));
  CHECK_FALSE(d_separated(g, {x}, {w}, {a}));
  CHECK_FALSE(d_separated(g, {x}, {w}, {g.require("Y")}));
}

TEST_CASE("d-separation agrees with the path oracle on template subgraphs") {
  // A graph has an open non-causal path exactly when some treatment is
  // d-connected to Y in the backdoor graph.
  auto t = standard_tav_template(1);
  for (int drop = 0; drop < static_cast<int>(t.edges().size()); drop += 3) {
    auto g = t.without_edges({t.edges()[static_cast<std::size_t>(drop)]});
    auto pruned = prune_assumed_edges(g).graph;
    std::vector<std::pair<std::size_t, std::size_t>> cut;
    for (auto [s, d] : pruned.edges())
      if (pruned.node(s).role == NodeRole::Treatment) cut.emplace_back(s, d);
    auto backdoor = pruned.without_edges(cut);
    bool connected = false;
    for (auto a : backdoor.nodes_with_role(NodeRole::Treatment))
      connected = connected || !d_separated(backdoor, {a}, {backdoor.outcome()}, {});
    CHECK(connected == oracle::has_open_noncausal_path(g));
  }
}

TEST_CASE("path reports match golden files") {
  struct Case {
    const char* graph;
    std::vector<std::string> z;
    const char* golden;
  };
  const std::vector<Case> cases = {
      {"dc", {}, "dc.txt"},
      {"cmv", {}, "cmv.txt"},
      {"cuv", {}, "cuv.txt"},
      {"tav_basic", {}, "tav_basic.txt"},
      {"selection_dt", {"N_Y"}, "selection_dt.txt"},
      {"cuv_selection", {"T2"}, "cuv_selection.txt"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.graph);
    const auto text = render_text(analyze_paths(fixture(c.graph), c.z));
    CHECK(text == read_file(oracle::data_path(std::string("golden/") + c.golden)));
  }
}

TEST_CASE("JSON report carries the same content") {
  auto report = analyze_paths(fixture("cuv_selection"), {"T2"});
  auto j = render_json(report);
  CHECK(j.find("\"recommendation\"") != std::string::npos);
  CHECK(j.find("TAC+RMT") != std::string::npos);
  CHECK(j.find("\"collider\": \"T2\"") != std::string::npos);
}

TEST_CASE("inapplicable target is reported, not thrown") {
  auto report = analyze_paths(fixture("dc"), {}, false, true);
  CHECK_FALSE(report.recommendation.has_value());
  CHECK(report.recommendation_error.find("InapplicableTarget") != std::string::npos);
}
