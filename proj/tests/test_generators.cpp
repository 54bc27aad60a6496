#include <doctest.h>

#include <chrono>

#include "bagscan/error.hpp"
#include "bagscan/generators.hpp"
#include "bagscan/graph_io.hpp"

using namespace bagscan;

namespace {

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Internal;
}

GeneratorSpec pr(std::size_t n, std::size_t m, double p_and, std::uint64_t seed) {
  return GeneratorSpec{Family::PseudoRandom, n, m, p_and, 0, seed};
}

GeneratorSpec cl(std::size_t n, std::size_t n_c, std::size_t m, std::uint64_t seed) {
  return GeneratorSpec{Family::Cluster, n, m, 0.5, n_c, seed};
}

}  // namespace

TEST_SUITE("generators") {

TEST_CASE("rng primitives") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    auto x = r.uniform_int(3, 7);
    CHECK(x >= 3);
    CHECK(x <= 7);
    double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  auto s = r.sample_distinct(10, 10);
  std::sort(s.begin(), s.end());
  for (std::uint64_t i = 0; i < 10; ++i) CHECK(s[i] == i);
  CHECK_THROWS_AS(r.sample_distinct(3, 4), Error);
}

TEST_CASE("sampler") {
  Rng rng(2);
  CvssSampler tens({0, 0, 0, 0, 0, 0, 0, 0, 0, 1}, 0.95);
  CvssSampler fives({0, 0, 0, 0, 1, 0, 0, 0, 0, 0}, std::nullopt);
  CvssSampler uncapped({0, 0, 0, 0, 0, 0, 0, 0, 0, 1}, std::nullopt);
  for (int i = 0; i < 100; ++i) {
    CHECK(sample_pv(tens, rng) == 0.95);
    CHECK(sample_pv(fives, rng) == 0.5);
    CHECK(sample_pv(uncapped, rng) == 1.0);
  }
  CHECK(kind_of([] { CvssSampler({0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, std::nullopt); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { CvssSampler({-1, 2, 0, 0, 0, 0, 0, 0, 0, 0}, std::nullopt); }) == ErrorKind::InvalidSpec);

  auto file = CvssSampler::from_file(std::string(BAGSCAN_DATA_DIR) + "/cvss_histogram.json");
  CHECK(file.weights() == CvssSampler::default_sampler().weights());
  CHECK(file.cap_at() == CvssSampler::default_sampler().cap_at());
  auto j = CvssSampler::from_json({{"weights", {{"3", 1.0}}}});
  CHECK(sample_pv(j, rng) == doctest::Approx(0.3));
}

TEST_CASE("default histogram frequencies") {
  auto s = CvssSampler::default_sampler();
  double total = 0.0;
  for (double w : s.weights()) total += w;
  Rng rng(99);
  std::array<int, 10> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double p = sample_pv(s, rng);
    const int bucket = p == 0.95 ? 10 : int(std::lround(p * 10));
    counts[bucket - 1]++;
  }
  for (int b = 0; b < 10; ++b) CHECK(std::abs(double(counts[b]) / draws - s.weights()[b] / total) < 0.02);
}

TEST_CASE("pseudo-random structure") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = generate(pr(20, 4, 0.5, seed));
    CHECK(g.size() == 20);
    CHECK(g.node(0).attacker_root);
    for (NodeId v = 1; v < 20; ++v) {
      CHECK(!g.node(v).attacker_root);
      const auto k = g.in_edges(v).size();
      CHECK(k >= 1);
      CHECK(k <= 4);
      for (NodeId p : g.parents(v)) CHECK(p < v);
    }
    for (const auto& e : g.edges()) {
      CHECK(e.p_v > 0.0);
      CHECK(e.p_v <= 1.0);
    }
  }
}

TEST_CASE("determinism") {
  CHECK(graph_to_json(generate(pr(200, 3, 0.4, 8))).dump() == graph_to_json(generate(pr(200, 3, 0.4, 8))).dump());
  CHECK(graph_to_json(generate(cl(100, 20, 3, 8))).dump() == graph_to_json(generate(cl(100, 20, 3, 8))).dump());
  CHECK(!(generate(pr(50, 3, 0.4, 1)) == generate(pr(50, 3, 0.4, 2))));
}

TEST_CASE("AND fraction") {
  for (double p : {0.0, 0.2, 0.5, 1.0}) {
    auto g = generate(pr(10001, 3, p, 4));
    std::size_t ands = 0;
    for (const auto& n : g.nodes())
      if (!n.attacker_root && n.gate == Gate::And) ++ands;
    CHECK(std::abs(double(ands) / 10000 - p) < 0.02);
  }
}

TEST_CASE("large instance generates quickly") {
  auto t0 = std::chrono::steady_clock::now();
  auto g = generate(pr(1000, 3, 0.5, 1));
  auto again = graph_from_json(graph_to_json(g));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(again == g);
  CHECK(secs < 1.0);
}

TEST_CASE("clusters") {
  auto g = generate(cl(30, 10, 3, 6));
  CHECK(g.size() == 30);
  CHECK(g.metadata().at("clusters") == 3);
  const auto inter = g.metadata().at("inter_cluster_edges");
  CHECK(inter <= 6);
  CHECK(inter + g.metadata().at("skipped_pairs") == 6);
  std::size_t roots = 0;
  for (const auto& n : g.nodes())
    if (n.attacker_root) {
      ++roots;
      CHECK(n.id % 10 == 0);
    }
  CHECK(roots == 3);
  std::size_t crossing = 0;
  for (const auto& e : g.edges())
    if (e.from / 10 != e.to / 10) ++crossing;
  CHECK(crossing == inter);
  // intra-cluster in-degree stays within m
  for (NodeId v = 0; v < 30; ++v) {
    std::size_t intra = 0;
    for (NodeId p : g.parents(v))
      if (p / 10 == v / 10) ++intra;
    CHECK(intra <= 3);
  }

  auto big = generate(cl(1000, 50, 3, 2));
  CHECK(big.metadata().at("clusters") == 20);
  CHECK(big.topological_order().size() == 1000);

  auto one = generate(cl(25, 25, 3, 42));
  auto plain = generate(pr(25, 3, 0.5, 42));
  CHECK(one.nodes() == plain.nodes());
  CHECK(one.edges() == plain.edges());
}

TEST_CASE("spec validation") {
  CHECK(kind_of([] { generate(pr(1, 1, 0.5, 0)); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { generate(pr(10, 10, 0.5, 0)); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { generate(pr(10, 0, 0.5, 0)); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { generate(pr(10, 3, 1.5, 0)); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([] { generate(cl(30, 7, 3, 0)); }) == ErrorKind::InvalidSpec);
  auto spec = cl(40, 20, 3, 9);
  auto back = generator_spec_from_json(to_json(spec));
  CHECK(back.family == Family::Cluster);
  CHECK(back.n_c == 20);
  CHECK(back.seed == 9);
  CHECK(kind_of([] { generator_spec_from_json({{"family", "mesh"}, {"n", 10}}); }) == ErrorKind::InvalidSpec);
}

}  // TEST_SUITE
