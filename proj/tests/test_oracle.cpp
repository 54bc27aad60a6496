#include <doctest.h>

#include "bagscan/error.hpp"
#include "bagscan/generators.hpp"
#include "bagscan/junction_tree.hpp"
#include "bagscan/oracle.hpp"
#include "support.hpp"

using namespace bagscan;
using namespace bagscan::testing;

namespace {

AttackGraph chain() {
  return AttackGraph({{0, "r", Gate::Or, true, 0}, {1, "B", Gate::Or, false, 0}, {2, "C", Gate::Or, false, 0}},
                     {{0, 1, 0.6}, {1, 2, 0.5}});
}

AttackGraph diamond(Gate gate) {
  return AttackGraph({{0, "r", Gate::Or, true, 0}, {1, "B", Gate::Or, false, 0}, {2, "C", Gate::Or, false, 0},
                      {3, "D", gate, false, 0}},
                     {{0, 1, 0.5}, {0, 2, 0.5}, {1, 3, 1.0}, {2, 3, 1.0}});
}

// OR-only variant of a generated graph.
AttackGraph or_only(const AttackGraph& g) {
  auto nodes = g.nodes();
  for (auto& n : nodes) n.gate = Gate::Or;
  return AttackGraph(nodes, g.edges());
}

std::vector<bool> descendants(const AttackGraph& g, NodeId from) {
  std::vector<bool> seen(g.size(), false);
  std::vector<NodeId> stack{from};
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (auto c : g.children(v))
      if (!seen[c]) {
        seen[c] = true;
        stack.push_back(c);
      }
  }
  return seen;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("chain") {
  auto r = enumerate(chain());
  CHECK(r.marginals[0] == 1.0);
  CHECK(r.marginals[1] == doctest::Approx(0.6));
  CHECK(r.marginals[2] == doctest::Approx(0.3));
  CHECK(r.evidence_probability == doctest::Approx(1.0));
  EvidenceSet ev;
  ev.observe(2, true);
  auto post = enumerate(chain(), ev);
  CHECK(post.marginals[1] == doctest::Approx(1.0));
  CHECK(post.evidence_probability == doctest::Approx(0.3));
}

TEST_CASE("diamond") {
  CHECK(enumerate(diamond(Gate::And)).marginals[3] == doctest::Approx(0.25));
  CHECK(enumerate(diamond(Gate::Or)).marginals[3] == doctest::Approx(0.75));
}

TEST_CASE("errors") {
  auto big = generate(GeneratorSpec{Family::PseudoRandom, 30, 3, 0.5, 0, 1});
  try {
    enumerate(big);
    FAIL("expected resource limit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResourceLimit);
  }
  CHECK_NOTHROW(enumerate(big, {}, 30));

  EvidenceSet impossible;
  impossible.observe(1, false);
  impossible.observe(2, true);
  try {
    enumerate(chain(), impossible);
    FAIL("expected inconsistent evidence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InconsistentEvidence);
  }
  EvidenceSet root_false;
  root_false.observe(0, false);
  CHECK_THROWS_AS(enumerate(chain(), root_false), Error);
}

TEST_CASE("joint normalizes and matches the junction tree") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = generate(GeneratorSpec{Family::PseudoRandom, 8 + seed % 13, 3, 0.5, 0, seed, 0.02});
    auto r = enumerate(g);
    CHECK(std::abs(r.evidence_probability - 1.0) < 1e-12);
    for (double p : r.marginals) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
    CHECK(max_abs_diff(r.marginals, JunctionTree::build(g).marginals()) < 1e-9);
  }
}

TEST_CASE("true evidence never lowers descendants in OR-only graphs") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    auto g = or_only(generate(GeneratorSpec{Family::PseudoRandom, 12, 3, 0.0, 0, seed}));
    auto prior = enumerate(g).marginals;
    EvidenceSet ev;
    for (NodeId v : {NodeId(3), NodeId(6)}) {
      ev.observe(v, true);
      auto post = enumerate(g, ev).marginals;
      auto below = descendants(g, v);
      for (NodeId u = 0; u < g.size(); ++u)
        if (below[u]) CHECK(post[u] >= prior[u] - 1e-12);
      prior = post;
    }
  }
}

}  // TEST_SUITE
