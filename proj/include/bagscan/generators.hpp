#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bagscan/attack_graph.hpp"

namespace bagscan {

// Seeded PRNG with a documented, platform-independent stream: std::mt19937_64
// for raw words, rejection sampling for bounded integers and the top 53 bits
// for doubles. The standard library distributions are not used because their
// output differs between implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  // Uniform in [0, 1).
  double uniform01();
  bool bernoulli(double p);
  // `count` distinct values from [0, bound), ascending.
  std::vector<std::uint64_t> sample_distinct(std::uint64_t bound, std::size_t count);

 private:
  std::mt19937_64 engine_;
};

class CvssSampler {
 public:
  // weights[b - 1] is the weight of score bucket b.
  CvssSampler(std::array<double, 10> weights, std::optional<double> cap_at);

  // Histogram compiled into the library; matches data/cvss_histogram.json.
  static CvssSampler default_sampler();
  static CvssSampler from_json(const nlohmann::json& doc);
  static CvssSampler from_file(const std::string& path);

  const std::array<double, 10>& weights() const noexcept { return weights_; }
  std::optional<double> cap_at() const noexcept { return cap_; }

 private:
  friend double sample_pv(const CvssSampler&, Rng&);
  std::array<double, 10> weights_;
  std::array<double, 10> cumulative_;
  std::optional<double> cap_;
};

// bucket / 10, with 1.0 replaced by the cap when one is set.
double sample_pv(const CvssSampler& sampler, Rng& rng);

enum class Family { PseudoRandom, Cluster };

struct GeneratorSpec {
  Family family = Family::PseudoRandom;
  std::size_t n = 20;
  std::size_t m = 3;
  double p_and = 0.0;
  std::size_t n_c = 0;
  std::uint64_t seed = 0;
  double p_e = 0.0;

  // Throws invalid-spec.
  void validate() const;
};

GeneratorSpec generator_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const GeneratorSpec& spec);

// Node 0 is the attacker root; node i >= 1 picks 1..min(m, i) distinct
// parents among lower indices, is AND with probability p_and, and each edge
// takes a p_v from the sampler.
AttackGraph gen_pseudo_random(const GeneratorSpec& spec,
                              const CvssSampler& sampler = CvssSampler::default_sampler());

// n / n_c independent pseudo-random clusters (one root each) joined by one
// edge per ordered cluster pair. Targets are non-root nodes; a candidate
// edge that would close a cycle is redrawn up to 16 times and the pair is
// skipped after that. Metadata records clusters, realized inter-cluster
// edges and skipped pairs.
AttackGraph gen_cluster(const GeneratorSpec& spec,
                        const CvssSampler& sampler = CvssSampler::default_sampler());

AttackGraph generate(const GeneratorSpec& spec,
                     const CvssSampler& sampler = CvssSampler::default_sampler());

}  // namespace bagscan
