#include <doctest.h>

#include <set>

#include "bagscan/error.hpp"
#include "bagscan/factor_graph.hpp"
#include "bagscan/generators.hpp"
#include "bagscan/lbp.hpp"
#include "support.hpp"

using namespace bagscan;
using bagscan::testing::example_graph;
using bagscan::testing::id_of;

namespace {

std::set<NodeId> scope_set(const Factor& f) { return {f.scope.begin(), f.scope.end()}; }

// Example graph without C->D: the reduced tree-shaped variant.
AttackGraph reduced_example() {
  auto g = example_graph();
  const NodeId c = id_of(g, "C"), d = id_of(g, "D");
  std::vector<BagEdge> edges;
  for (const auto& e : g.edges())
    if (!(e.from == c && e.to == d)) edges.push_back(e);
  return AttackGraph(g.nodes(), edges);
}

double factor_value(const Factor& f, std::uint64_t assignment) {
  std::size_t row = 0;
  for (std::size_t k = 0; k < f.scope.size(); ++k)
    if ((assignment >> f.scope[k]) & 1U) row |= std::size_t{1} << k;
  return f.table[row];
}

double bn_joint(const AttackGraph& g, const std::vector<Cpt>& cpts, std::uint64_t assignment) {
  double p = 1.0;
  for (const auto& c : cpts) {
    const bool x = (assignment >> c.node) & 1U;
    if (c.parent_ids.empty()) {
      p *= x ? 1.0 : 0.0;
      continue;
    }
    std::size_t row = 0;
    for (std::size_t k = 0; k < c.parent_ids.size(); ++k)
      if ((assignment >> c.parent_ids[k]) & 1U) row |= std::size_t{1} << k;
    p *= x ? c.table[row] : 1.0 - c.table[row];
  }
  (void)g;
  return p;
}

}  // namespace

TEST_SUITE("factor-graph") {

TEST_CASE("reduced example scopes") {
  auto g = reduced_example();
  auto fg = from_bag(g);
  REQUIRE(fg.num_factors() == 5);
  std::set<std::set<NodeId>> scopes;
  for (const auto& f : fg.factors()) scopes.insert(scope_set(f));
  auto L = [&](const char* s) { return id_of(g, s); };
  std::set<std::set<NodeId>> expected{{L("A1"), L("B")}, {L("A2"), L("C")}, {L("B"), L("D")},
                                      {L("C"), L("E")}, {L("D"), L("E"), L("F")}};
  CHECK(scopes == expected);
}

TEST_CASE("full example keeps the three-variable factor of D") {
  auto g = example_graph();
  auto fg = from_bag(g);
  const NodeId d = id_of(g, "D");
  bool found = false;
  for (const auto& f : fg.factors())
    if (f.owner == d) {
      found = true;
      CHECK(scope_set(f) == std::set<NodeId>{id_of(g, "B"), id_of(g, "C"), d});
      CHECK(f.scope.front() == d);
    }
  CHECK(found);
}

TEST_CASE("root prior folded into the lowest-id child") {
  AttackGraph g({{0, "r", Gate::Or, true, 0.0}, {1, "b", Gate::Or, false, 0.0}}, {{0, 1, 0.6}});
  auto fg = from_bag(g);
  REQUIRE(fg.num_factors() == 1);
  const auto& f = fg.factor(0);
  CHECK(f.scope == std::vector<NodeId>{1, 0});
  // bit 0 = b, bit 1 = r
  CHECK(f.table == std::vector<double>{0.0, 0.0, 0.4, 0.6});

  AttackGraph two({{0, "r", Gate::Or, true, 0.0}, {1, "a", Gate::Or, false, 0.0}, {2, "b", Gate::Or, false, 0.0}},
                  {{0, 2, 0.5}, {0, 1, 0.5}});
  auto fg2 = from_bag(two);
  for (const auto& f2 : fg2.factors()) {
    const bool zeroed = f2.table[0] == 0.0 && f2.table[1] == 0.0;
    CHECK(zeroed == (f2.owner == 1));
  }
}

TEST_CASE("factor product equals the network joint") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto g = generate(GeneratorSpec{Family::PseudoRandom, 12, 3, 0.5, 0, seed, seed % 2 ? 0.0 : 0.05});
    auto fg = from_bag(g);
    auto cpts = materialize(g);
    for (std::uint64_t a = 0; a < (std::uint64_t{1} << g.size()); a += 7) {
      double prod = 1.0;
      for (const auto& f : fg.factors()) prod *= factor_value(f, a);
      CHECK(prod == doctest::Approx(bn_joint(g, cpts, a)).epsilon(1e-12));
    }
  }
}

TEST_CASE("incidence is consistent with scopes") {
  auto fg = from_bag(generate(GeneratorSpec{Family::PseudoRandom, 30, 4, 0.3, 0, 9}));
  std::size_t total = 0;
  for (NodeId v = 0; v < fg.num_variables(); ++v) {
    CHECK(!fg.incident(v).empty());
    for (const auto& inc : fg.incident(v)) {
      CHECK(fg.factor(inc.factor).scope[inc.position] == v);
      CHECK(fg.edge_variable(inc.edge) == v);
      CHECK(fg.edge_factor(inc.edge) == inc.factor);
      ++total;
    }
  }
  CHECK(total == fg.num_edges());
}

TEST_CASE("apply_evidence clamps rows") {
  auto g = example_graph();
  auto fg = from_bag(g);
  CHECK(apply_evidence(fg, {}) == fg);

  const NodeId d = id_of(g, "D");
  EvidenceSet ev;
  ev.observe(d, true);
  auto clamped = apply_evidence(fg, ev);
  for (std::size_t f = 0; f < fg.num_factors(); ++f) {
    const auto& before = fg.factor(f);
    const auto& after = clamped.factor(f);
    CHECK(after.scope == before.scope);
    auto it = std::find(before.scope.begin(), before.scope.end(), d);
    for (std::size_t i = 0; i < before.table.size(); ++i) {
      if (it == before.scope.end()) {
        CHECK(after.table[i] == before.table[i]);
      } else {
        const auto k = it - before.scope.begin();
        CHECK(after.table[i] == (((i >> k) & 1U) ? before.table[i] : 0.0));
      }
    }
  }
  std::size_t touched = 0;
  for (const auto& f : fg.factors())
    if (std::find(f.scope.begin(), f.scope.end(), d) != f.scope.end()) ++touched;
  CHECK(touched == 2);

  EvidenceSet e2;
  e2.observe(id_of(g, "E"), false);
  CHECK(apply_evidence(apply_evidence(fg, ev), e2) == apply_evidence(fg, ev.merged(e2)));

  EvidenceSet unknown;
  unknown.observe(99, true);
  CHECK_THROWS_AS(apply_evidence(fg, unknown), Error);
}

TEST_CASE("impossible evidence is reported, not returned as NaN") {
  // root observed false while its only child is observed true
  AttackGraph g({{0, "r", Gate::Or, true, 0.0}, {1, "b", Gate::Or, false, 0.0}}, {{0, 1, 0.6}});
  EvidenceSet ev;
  ev.observe(0, false);
  ev.observe(1, true);
  auto fg = apply_evidence(from_bag(g), ev);
  try {
    run_parallel(fg, LbpConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InconsistentEvidence);
  }
}

TEST_CASE("from_bag is deterministic and dumps to JSON") {
  auto g = generate(GeneratorSpec{Family::PseudoRandom, 40, 3, 0.5, 0, 4});
  CHECK(from_bag(g) == from_bag(g));
  auto doc = factors_to_json(from_bag(example_graph()));
  CHECK(doc.size() == 5);
  CHECK(doc[0].contains("scope"));
  CHECK(doc[0].contains("table"));
}

}  // TEST_SUITE
