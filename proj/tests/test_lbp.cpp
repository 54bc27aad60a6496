#include <doctest.h>

#include <numeric>
#include <sstream>

#include "bagscan/error.hpp"
#include "bagscan/factor_graph.hpp"
#include "bagscan/generators.hpp"
#include "bagscan/junction_tree.hpp"
#include "bagscan/lbp.hpp"
#include "bagscan/oracle.hpp"
#include "support.hpp"

using namespace bagscan;
using namespace bagscan::testing;

namespace {

LbpConfig tight(LbpMode mode, double alpha = 0.0) {
  LbpConfig c;
  c.mode = mode;
  c.alpha = alpha;
  c.epsilon = 1e-12;
  return c;
}

AttackGraph reduced_example() {
  auto g = example_graph();
  const NodeId c = id_of(g, "C"), d = id_of(g, "D");
  std::vector<BagEdge> edges;
  for (const auto& e : g.edges())
    if (!(e.from == c && e.to == d)) edges.push_back(e);
  return AttackGraph(g.nodes(), edges);
}

}  // namespace

TEST_SUITE("lbp") {

TEST_CASE("initial messages") {
  AttackGraph g({{0, "A", Gate::Or, true, 0.0}, {1, "B", Gate::Or, false, 0.0}}, {{0, 1, 0.6}});
  auto fg = from_bag(g);
  auto store = init_messages(fg);
  const auto& f = fg.factor(0);
  const auto b_pos = unsigned(std::find(f.scope.begin(), f.scope.end(), 1) - f.scope.begin());
  auto to_b = store.factor_to_var(fg.edge_index(0, b_pos));
  CHECK(to_b[0] == doctest::Approx(0.4));
  CHECK(to_b[1] == doctest::Approx(0.6));
  for (std::size_t e = 0; e < fg.num_edges(); ++e) {
    CHECK(store.var_to_factor(e)[0] == 0.5);
    CHECK(store.var_to_factor(e)[1] == 0.5);
  }
}

TEST_CASE("damp") {
  std::array<double, 2> fresh{0.2, 0.8}, old{0.6, 0.4};
  auto same = damp(fresh, old, 0.0);
  CHECK(same[0] == doctest::Approx(0.2));
  CHECK(same[1] == doctest::Approx(0.8));
  auto mid = damp(fresh, old, 0.5);
  CHECK(mid[0] == doctest::Approx(0.4));
  CHECK(mid[1] == doctest::Approx(0.6));
  for (double a : {0.0, 0.3, 0.9}) {
    auto fixed = damp(old, old, a);
    CHECK(fixed[0] == doctest::Approx(0.6));
    CHECK(fixed[1] == doctest::Approx(0.4));
  }
}

TEST_CASE("beliefs from messages") {
  FactorGraph one(1, {Factor{0, {0}, {0.5, 0.5}}});
  MessageStore s(one.num_edges());
  s.factor_to_var(0)[0] = 0.3;
  s.factor_to_var(0)[1] = 0.7;
  CHECK(beliefs_from_messages(one, s)[0] == doctest::Approx(0.7));

  FactorGraph two(1, {Factor{0, {0}, {0.5, 0.5}}, Factor{1, {0}, {0.5, 0.5}}});
  MessageStore s2(two.num_edges());
  s2.factor_to_var(1)[0] = 0.2;
  s2.factor_to_var(1)[1] = 0.8;
  CHECK(beliefs_from_messages(two, s2)[0] == doctest::Approx(0.8));

  s2.factor_to_var(0)[1] = 0.0;
  s2.factor_to_var(1)[0] = 0.0;
  CHECK_THROWS_AS(beliefs_from_messages(two, s2), Error);
}

TEST_CASE("config validation and JSON") {
  LbpConfig c;
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.alpha = 0.2;
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.epsilon = 1e-4;
  c.mode = LbpMode::Sequential;
  c.metric = ConvergenceMetric::SumAbsChange;
  c.max_iter = 17;
  c.snapshots = true;
  auto back = lbp_config_from_json(to_json(c));
  CHECK(back.mode == c.mode);
  CHECK(back.alpha == c.alpha);
  CHECK(back.epsilon == c.epsilon);
  CHECK(back.metric == c.metric);
  CHECK(back.max_iter == c.max_iter);
  CHECK(back.snapshots);
  CHECK(lbp_config_from_json(nlohmann::json::object()).epsilon == 1e-3);
}

TEST_CASE("reduced example tree is exact") {
  auto g = reduced_example();
  auto exact = enumerate(g).marginals;
  for (auto mode : {LbpMode::Sequential, LbpMode::Parallel}) {
    auto r = run_lbp(from_bag(g), tight(mode));
    CHECK(r.converged);
    CHECK(max_abs_diff(r.beliefs, exact) < 1e-9);
  }
  // the ascending sweep reaches the exact answer in one pass on this tree
  LbpConfig one = tight(LbpMode::Sequential);
  one.max_iter = 1;
  CHECK(max_abs_diff(run_sequential(from_bag(g), one).beliefs, exact) < 1e-9);
}

TEST_CASE("random trees: both modes exact within diameter + 2 iterations") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = random_tree_bag(5 + seed * 4, seed);
    auto exact = JunctionTree::build(g).marginals();
    const auto diam = diameter(g);
    for (auto mode : {LbpMode::Sequential, LbpMode::Parallel}) {
      auto r = run_lbp(from_bag(g), tight(mode));
      CAPTURE(seed);
      CHECK(r.converged);
      CHECK(r.iterations <= diam + 2);
      CHECK(max_abs_diff(r.beliefs, exact) < 1e-9);
    }
  }
}

TEST_CASE("worked example: loopy static estimate and exact posterior under a loop cut") {
  auto g = example_graph();
  const NodeId f = id_of(g, "F"), d = id_of(g, "D");
  for (auto mode : {LbpMode::Sequential, LbpMode::Parallel}) {
    LbpConfig c;
    c.mode = mode;
    auto r = run_lbp(from_bag(g), c);
    CHECK(r.beliefs[f] == doctest::Approx(0.805).epsilon(0.005));
    EvidenceSet ev;
    ev.observe(d, true);
    auto post = run_lbp(apply_evidence(from_bag(g), ev), tight(mode));
    CHECK(max_abs_diff(post.beliefs, enumerate(g, ev).marginals) < 1e-6);
  }
}

TEST_CASE("single-loop graphs with cutting evidence are exact") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto loop = random_single_loop(12, seed);
    EvidenceSet ev;
    ev.observe(loop.cut, true);
    auto exact = enumerate(loop.graph, ev).marginals;
    for (auto mode : {LbpMode::Sequential, LbpMode::Parallel}) {
      auto r = run_lbp(apply_evidence(from_bag(loop.graph), ev), tight(mode));
      CAPTURE(seed);
      CHECK(max_abs_diff(r.beliefs, exact) < 1e-6);
    }
  }
}

TEST_CASE("parallel and sequential agree on loopy graphs") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto fg = from_bag(generate(GeneratorSpec{Family::PseudoRandom, 40, 3, 0.5, 0, seed}));
    LbpConfig p, s;
    s.mode = LbpMode::Sequential;
    auto rp = run_lbp(fg, p), rs = run_lbp(fg, s);
    CAPTURE(seed);
    CHECK(rp.converged);
    CHECK(rs.converged);
    CHECK(max_abs_diff(rp.beliefs, rs.beliefs) <= 2 * p.epsilon);
  }
}

TEST_CASE("parallel result ignores factor order and worker count") {
  auto fg = from_bag(generate(GeneratorSpec{Family::PseudoRandom, 80, 4, 0.5, 0, 3}));
  auto factors = fg.factors();
  std::reverse(factors.begin(), factors.end());
  std::swap(factors[3], factors[10]);
  FactorGraph permuted(fg.num_variables(), factors);
  LbpConfig c;
  c.alpha = 0.2;
  auto base = run_parallel(fg, c);
  auto perm = run_parallel(permuted, c);
  CHECK(base.beliefs == perm.beliefs);
  CHECK(base.iterations == perm.iterations);
  for (unsigned threads : {2U, 3U, 8U}) {
    c.threads = threads;
    CHECK(run_parallel(fg, c).beliefs == base.beliefs);
  }
}

TEST_CASE("damping keeps undamped fixed points") {
  auto fg = from_bag(generate(GeneratorSpec{Family::PseudoRandom, 30, 3, 0.5, 0, 8}));
  for (auto mode : {LbpMode::Parallel, LbpMode::Sequential}) {
    MessageStore state;
    auto fixed = run_lbp(fg, tight(mode), &state);
    REQUIRE(fixed.converged);
    const MessageStore start = state;
    for (double a : {0.1, 0.5, 0.9}) {
      MessageStore s = start;
      LbpConfig c = tight(mode, a);
      c.max_iter = 1;
      auto r = run_lbp(fg, c, &s);
      CHECK(max_abs_diff(s.raw_factor_to_var(), start.raw_factor_to_var()) < 1e-10);
      CHECK(max_abs_diff(r.beliefs, fixed.beliefs) < 1e-10);
    }
  }
}

TEST_CASE("result bookkeeping") {
  auto g = generate(GeneratorSpec{Family::PseudoRandom, 50, 3, 0.5, 0, 12});
  auto fg = from_bag(g);
  for (auto metric : {ConvergenceMetric::MaxAbsChange, ConvergenceMetric::SumAbsChange}) {
    LbpConfig c;
    c.snapshots = true;
    c.metric = metric;
    std::size_t observed = 0;
    c.observer = [&](std::size_t, std::span<const double> b) {
      ++observed;
      CHECK(b.size() == g.size());
    };
    auto r = run_lbp(fg, c);
    CHECK(r.iterations <= 2 * g.size());
    CHECK(r.snapshots.size() == r.iterations);
    CHECK(r.residual_trace.size() == r.iterations);
    CHECK(observed == r.iterations);
    CHECK(r.snapshots.back() == r.beliefs);
    if (r.converged) CHECK(r.residual_trace.back() < c.epsilon);
    for (double b : r.beliefs) {
      CHECK(b >= 0.0);
      CHECK(b <= 1.0);
    }
    std::ostringstream csv;
    write_snapshots_csv(csv, r);
    CHECK(csv.str().rfind("iteration,node,belief", 0) == 0);
  }
  LbpConfig capped;
  capped.max_iter = 2;
  capped.epsilon = 1e-15;
  auto r = run_lbp(fg, capped);
  CHECK(r.iterations == 2);
  CHECK(!r.converged);
}

TEST_CASE("messages stay normalized") {
  auto fg = from_bag(generate(GeneratorSpec{Family::PseudoRandom, 40, 3, 0.5, 0, 2}));
  MessageStore state;
  LbpConfig c;
  c.alpha = 0.3;
  run_lbp(fg, c, &state);
  for (std::size_t e = 0; e < fg.num_edges(); ++e) {
    for (auto m : {state.var_to_factor(e), state.factor_to_var(e)}) {
      CHECK(m[0] >= 0.0);
      CHECK(m[1] >= 0.0);
      CHECK(std::abs(m[0] + m[1] - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("warm start stays within tolerance of a cold start") {
  auto g = generate(GeneratorSpec{Family::PseudoRandom, 60, 3, 0.5, 0, 31});
  auto fg = from_bag(g);
  MessageStore state;
  run_lbp(fg, LbpConfig{}, &state);
  EvidenceSet ev;
  ev.observe(45, true);
  auto clamped = apply_evidence(fg, ev);
  auto warm = run_lbp(clamped, LbpConfig{}, &state);
  auto cold = run_lbp(clamped, LbpConfig{});
  CHECK(max_abs_diff(warm.beliefs, cold.beliefs) < 5e-3);
}

}  // TEST_SUITE
