#include "bagscan/generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "bagscan/error.hpp"

namespace bagscan {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

std::uint64_t Rng::uniform_int(std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw Error(ErrorKind::InvalidArgument, "empty integer range");
  const std::uint64_t span = hi - lo;
  if (span == UINT64_MAX) return next();
  const std::uint64_t range = span + 1;
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range + 1) % range;
  for (;;) {
    const std::uint64_t x = next();
    if (x <= limit) return lo + x % range;
  }
}

double Rng::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

bool Rng::bernoulli(double p) { return uniform01() < p; }

std::vector<std::uint64_t> Rng::sample_distinct(std::uint64_t bound, std::size_t count) {
  if (count > bound) throw Error(ErrorKind::InvalidArgument, "sample larger than population");
  // Floyd's algorithm.
  std::set<std::uint64_t> picked;
  for (std::uint64_t j = bound - count; j < bound; ++j) {
    const std::uint64_t t = uniform_int(0, j);
    if (!picked.insert(t).second) picked.insert(j);
  }
  return {picked.begin(), picked.end()};
}

CvssSampler::CvssSampler(std::array<double, 10> weights, std::optional<double> cap_at)
    : weights_(weights), cap_(cap_at) {
  double total = 0.0;
  for (std::size_t b = 0; b < weights_.size(); ++b) {
    if (!std::isfinite(weights_[b]) || weights_[b] < 0.0) {
      throw Error(ErrorKind::InvalidSpec, "histogram weights must be finite and non-negative");
    }
    total += weights_[b];
    cumulative_[b] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidSpec, "histogram is empty");
  if (cap_ && !(*cap_ > 0.0 && *cap_ <= 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "cap must lie in (0, 1]");
  }
}

CvssSampler CvssSampler::default_sampler() {
  return CvssSampler({0.1, 0.7, 4.4, 3.1, 21.0, 20.4, 12.3, 19.1, 1.2, 17.7}, 0.95);
}

CvssSampler CvssSampler::from_json(const nlohmann::json& doc) {
  try {
    std::array<double, 10> weights{};
    for (const auto& [key, value] : doc.at("weights").items()) {
      const int bucket = std::stoi(key);
      if (bucket < 1 || bucket > 10) throw Error(ErrorKind::InvalidSpec, "bucket out of range: " + key);
      weights[bucket - 1] = value.get<double>();
    }
    std::optional<double> cap;
    if (doc.contains("cap_at") && !doc.at("cap_at").is_null()) cap = doc.at("cap_at").get<double>();
    return CvssSampler(weights, cap);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("bad histogram: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("bad histogram: ") + e.what());
  }
}

CvssSampler CvssSampler::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("bad histogram file: ") + e.what());
  }
}

double sample_pv(const CvssSampler& sampler, Rng& rng) {
  const double u = rng.uniform01() * sampler.cumulative_.back();
  const auto& cum = sampler.cumulative_;
  const auto b = static_cast<std::size_t>(
      std::min(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(), std::ptrdiff_t{9}));
  const double value = static_cast<double>(b + 1) / 10.0;
  return value == 1.0 && sampler.cap_ ? *sampler.cap_ : value;
}

void GeneratorSpec::validate() const {
  if (n < 2) throw Error(ErrorKind::InvalidSpec, "n must be at least 2");
  if (m < 1 || m >= n) throw Error(ErrorKind::InvalidSpec, "m must satisfy 1 <= m < n");
  if (!(p_and >= 0.0 && p_and <= 1.0)) throw Error(ErrorKind::InvalidSpec, "p_and outside [0,1]");
  if (!(p_e >= 0.0 && p_e <= 1.0)) throw Error(ErrorKind::InvalidSpec, "p_e outside [0,1]");
  if (family == Family::Cluster) {
    if (n_c < 2 || n % n_c != 0) {
      throw Error(ErrorKind::InvalidSpec, "cluster size must be at least 2 and divide n");
    }
    if (m >= n_c) throw Error(ErrorKind::InvalidSpec, "m must be below the cluster size");
  }
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& doc) {
  try {
    GeneratorSpec spec;
    const std::string family = doc.value("family", std::string("pseudo_random"));
    if (family == "pseudo_random" || family == "PSEUDO_RANDOM") {
      spec.family = Family::PseudoRandom;
    } else if (family == "cluster" || family == "CLUSTER") {
      spec.family = Family::Cluster;
    } else {
      throw Error(ErrorKind::InvalidSpec, "unknown family " + family);
    }
    spec.n = doc.at("n").get<std::size_t>();
    spec.m = doc.at("m").get<std::size_t>();
    spec.p_and = doc.value("p_and", 0.0);
    spec.n_c = doc.value("n_c", std::size_t{0});
    spec.seed = doc.value("seed", std::uint64_t{0});
    spec.p_e = doc.value("p_e", 0.0);
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("bad generator spec: ") + e.what());
  }
}

nlohmann::json to_json(const GeneratorSpec& spec) {
  nlohmann::json out = {{"family", spec.family == Family::Cluster ? "cluster" : "pseudo_random"},
                        {"n", spec.n},
                        {"m", spec.m},
                        {"p_and", spec.p_and},
                        {"seed", spec.seed},
                        {"p_e", spec.p_e}};
  if (spec.family == Family::Cluster) out["n_c"] = spec.n_c;
  return out;
}

namespace {

// Appends one pseudo-random block of `size` nodes starting at `base`.
void grow_block(NodeId base, std::size_t size, const GeneratorSpec& spec, const CvssSampler& sampler,
                Rng& rng, std::vector<BagNode>& nodes, std::vector<BagEdge>& edges) {
  for (std::size_t i = 0; i < size; ++i) {
    const NodeId id = base + static_cast<NodeId>(i);
    BagNode node;
    node.id = id;
    node.label = "n" + std::to_string(id);
    node.p_e = spec.p_e;
    if (i == 0) {
      node.attacker_root = true;
      node.p_e = 0.0;
      nodes.push_back(node);
      continue;
    }
    const std::size_t n_p = rng.uniform_int(1, std::min<std::uint64_t>(spec.m, i));
    const std::vector<std::uint64_t> parents = rng.sample_distinct(i, n_p);
    node.gate = rng.bernoulli(spec.p_and) ? Gate::And : Gate::Or;
    for (std::uint64_t p : parents) {
      edges.push_back({base + static_cast<NodeId>(p), id, sample_pv(sampler, rng)});
    }
    nodes.push_back(node);
  }
}

bool reaches(const std::vector<std::vector<NodeId>>& out, NodeId from, NodeId to) {
  std::vector<char> seen(out.size(), 0);
  std::vector<NodeId> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    if (v == to) return true;
    for (NodeId w : out[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
    }
  }
  return false;
}

constexpr int kEdgeRetries = 16;

}  // namespace

AttackGraph gen_pseudo_random(const GeneratorSpec& spec, const CvssSampler& sampler) {
  spec.validate();
  if (spec.family != Family::PseudoRandom) throw Error(ErrorKind::InvalidSpec, "expected pseudo_random family");
  Rng rng(spec.seed);
  std::vector<BagNode> nodes;
  std::vector<BagEdge> edges;
  grow_block(0, spec.n, spec, sampler, rng, nodes, edges);
  return AttackGraph(std::move(nodes), std::move(edges));
}

AttackGraph gen_cluster(const GeneratorSpec& spec, const CvssSampler& sampler) {
  spec.validate();
  if (spec.family != Family::Cluster) throw Error(ErrorKind::InvalidSpec, "expected cluster family");
  Rng rng(spec.seed);
  const std::size_t k = spec.n / spec.n_c;
  std::vector<BagNode> nodes;
  std::vector<BagEdge> edges;
  for (std::size_t c = 0; c < k; ++c) {
    grow_block(static_cast<NodeId>(c * spec.n_c), spec.n_c, spec, sampler, rng, nodes, edges);
  }

  std::vector<std::vector<NodeId>> out(spec.n);
  for (const BagEdge& e : edges) out[e.from].push_back(e.to);
  std::size_t realized = 0;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      bool placed = false;
      for (int attempt = 0; attempt < kEdgeRetries && !placed; ++attempt) {
        const auto from = static_cast<NodeId>(i * spec.n_c + rng.uniform_int(0, spec.n_c - 1));
        // Offset 0 is the cluster's root, which must stay parentless.
        const auto to = static_cast<NodeId>(j * spec.n_c + rng.uniform_int(1, spec.n_c - 1));
        if (reaches(out, to, from)) continue;
        edges.push_back({from, to, sample_pv(sampler, rng)});
        out[from].push_back(to);
        placed = true;
      }
      placed ? ++realized : ++skipped;
    }
  }
  std::map<std::string, double> meta{{"clusters", static_cast<double>(k)},
                                     {"inter_cluster_edges", static_cast<double>(realized)},
                                     {"skipped_pairs", static_cast<double>(skipped)}};
  return AttackGraph(std::move(nodes), std::move(edges), std::move(meta));
}

AttackGraph generate(const GeneratorSpec& spec, const CvssSampler& sampler) {
  return spec.family == Family::Cluster ? gen_cluster(spec, sampler) : gen_pseudo_random(spec, sampler);
}

}  // namespace bagscan
