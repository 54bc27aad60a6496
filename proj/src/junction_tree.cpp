#include "bagscan/junction_tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "bagscan/error.hpp"

namespace bagscan {

namespace {

constexpr std::size_t kSaturated = std::numeric_limits<std::size_t>::max();

std::size_t saturating_add(std::size_t a, std::size_t b) {
  return a > kSaturated - b ? kSaturated : a + b;
}

std::size_t pow2(std::size_t bits) {
  return bits >= 63 ? kSaturated : std::size_t{1} << bits;
}

template <typename F>
void for_each_bit(const std::uint64_t* row, std::size_t words, F&& f) {
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t word = row[w];
    while (word != 0) {
      const unsigned b = static_cast<unsigned>(std::countr_zero(word));
      f(static_cast<NodeId>(w * 64 + b));
      word &= word - 1;
    }
  }
}

std::vector<NodeId> intersect(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  std::vector<NodeId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

struct Layout {
  std::vector<std::vector<NodeId>> clusters;
  std::vector<SepsetEdge> edges;
  std::vector<std::vector<std::size_t>> clusters_of;  // variable -> clusters, ascending
};

struct DisjointSets {
  std::vector<std::size_t> up;
  explicit DisjointSets(std::size_t n) : up(n) { std::iota(up.begin(), up.end(), 0); }
  std::size_t find(std::size_t x) {
    while (up[x] != x) x = up[x] = up[up[x]];
    return x;
  }
  bool join(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    up[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

Layout make_layout(const Triangulation& triangulation) {
  Layout layout;
  layout.clusters = maximal_cliques(triangulation);
  for (auto& c : layout.clusters) std::sort(c.begin(), c.end());
  const std::size_t k = layout.clusters.size();
  layout.clusters_of.assign(triangulation.chordal.size(), {});
  for (std::size_t c = 0; c < k; ++c) {
    for (NodeId v : layout.clusters[c]) layout.clusters_of[v].push_back(c);
  }

  struct Candidate {
    std::size_t weight, a, b;
  };
  std::vector<Candidate> candidates;
  std::vector<std::size_t> shared(k, 0);
  std::vector<std::size_t> touched;
  for (std::size_t a = 0; a < k; ++a) {
    for (NodeId v : layout.clusters[a]) {
      for (std::size_t b : layout.clusters_of[v]) {
        if (b <= a) continue;
        if (shared[b]++ == 0) touched.push_back(b);
      }
    }
    for (std::size_t b : touched) {
      candidates.push_back({shared[b], a, b});
      shared[b] = 0;
    }
    touched.clear();
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.weight != y.weight) return x.weight > y.weight;
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });

  DisjointSets sets(k);
  for (const Candidate& c : candidates) {
    if (!sets.join(c.a, c.b)) continue;
    layout.edges.push_back({c.a, c.b, intersect(layout.clusters[c.a], layout.clusters[c.b])});
  }
  for (std::size_t c = 1; c < k; ++c) {
    if (sets.join(0, c)) layout.edges.push_back({0, c, {}});
  }
  return layout;
}

std::size_t layout_entries(const Layout& layout) {
  std::size_t total = predicted_table_entries(layout.clusters);
  for (const SepsetEdge& e : layout.edges) {
    total = saturating_add(total, saturating_add(pow2(e.sepset.size()), pow2(e.sepset.size())));
  }
  return total;
}

}  // namespace

UndirectedGraph::UndirectedGraph(std::size_t n)
    : n_(n), words_((n + 63) / 64), bits_(n * ((n + 63) / 64), 0) {}

void UndirectedGraph::add_edge(NodeId a, NodeId b) {
  if (a >= n_ || b >= n_ || a == b) {
    throw Error(ErrorKind::InvalidArgument, "bad undirected edge");
  }
  if (has_edge(a, b)) return;
  bits_[a * words_ + b / 64] |= std::uint64_t{1} << (b % 64);
  bits_[b * words_ + a / 64] |= std::uint64_t{1} << (a % 64);
  ++edges_;
}

bool UndirectedGraph::has_edge(NodeId a, NodeId b) const {
  if (a >= n_ || b >= n_) return false;
  return (bits_[a * words_ + b / 64] >> (b % 64)) & 1U;
}

std::vector<NodeId> UndirectedGraph::neighbors(NodeId v) const {
  if (v >= n_) throw Error(ErrorKind::NotFound, "no vertex " + std::to_string(v));
  std::vector<NodeId> out;
  for_each_bit(bits_.data() + v * words_, words_, [&](NodeId u) { out.push_back(u); });
  return out;
}

std::size_t UndirectedGraph::degree(NodeId v) const {
  if (v >= n_) throw Error(ErrorKind::NotFound, "no vertex " + std::to_string(v));
  std::size_t d = 0;
  for (std::size_t w = 0; w < words_; ++w) d += std::popcount(bits_[v * words_ + w]);
  return d;
}

UndirectedGraph moralize(const AttackGraph& graph) {
  UndirectedGraph moral(graph.size());
  for (const BagEdge& e : graph.edges()) moral.add_edge(e.from, e.to);
  for (NodeId v = 0; v < graph.size(); ++v) {
    const std::vector<NodeId> ps = graph.parents(v);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (std::size_t j = i + 1; j < ps.size(); ++j) moral.add_edge(ps[i], ps[j]);
    }
  }
  return moral;
}

class Eliminator {
 public:
  static Triangulation run(const UndirectedGraph& moral) {
    const std::size_t n = moral.n_;
    const std::size_t words = moral.words_;
    std::vector<std::uint64_t> live = moral.bits_;
    std::vector<std::size_t> degree(n);
    for (NodeId v = 0; v < n; ++v) degree[v] = moral.degree(v);
    std::vector<char> gone(n, 0);

    Triangulation tri;
    tri.chordal = moral;
    tri.order.order.reserve(n);
    tri.elimination_cliques.reserve(n);
    std::vector<std::uint64_t> mask(words);
    std::vector<NodeId> nbrs;

    for (std::size_t step = 0; step < n; ++step) {
      NodeId v = 0;
      std::size_t best = kSaturated;
      for (NodeId u = 0; u < n; ++u) {
        if (!gone[u] && degree[u] < best) {
          best = degree[u];
          v = u;
        }
      }
      std::uint64_t* row = live.data() + v * words;
      std::copy(row, row + words, mask.begin());
      nbrs.clear();
      for_each_bit(mask.data(), words, [&](NodeId u) { nbrs.push_back(u); });

      std::vector<NodeId> clique = nbrs;
      clique.push_back(v);
      std::sort(clique.begin(), clique.end());
      tri.order.induced_width = std::max(tri.order.induced_width, nbrs.size());
      tri.order.order.push_back(v);
      tri.elimination_cliques.push_back(std::move(clique));

      for (NodeId u : nbrs) {
        std::uint64_t* urow = live.data() + u * words;
        std::uint64_t* crow = tri.chordal.bits_.data() + u * words;
        for (std::size_t w = 0; w < words; ++w) {
          std::uint64_t added = mask[w] & ~urow[w];
          if (w == u / 64) added &= ~(std::uint64_t{1} << (u % 64));
          if (added == 0) continue;
          urow[w] |= added;
          crow[w] |= added;
          degree[u] += std::popcount(added);
          for_each_bit(&added, 1, [&](NodeId bit) {
            const NodeId x = static_cast<NodeId>(w * 64 + bit);
            if (u < x) {
              tri.fill_edges.emplace_back(u, x);
              ++tri.chordal.edges_;
            }
          });
        }
        urow[v / 64] &= ~(std::uint64_t{1} << (v % 64));
        --degree[u];
      }
      std::fill(row, row + words, 0);
      gone[v] = 1;
    }
    return tri;
  }
};

Triangulation eliminate(const UndirectedGraph& moral, EliminationHeuristic) {
  return Eliminator::run(moral);
}

std::vector<std::vector<NodeId>> maximal_cliques(const Triangulation& triangulation) {
  const auto& order = triangulation.order.order;
  const auto& cliques = triangulation.elimination_cliques;
  std::vector<std::size_t> pos(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;

  std::vector<char> contained(order.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::size_t parent = kSaturated;
    for (NodeId u : cliques[k]) {
      if (u != order[k]) parent = std::min(parent, pos[u]);
    }
    if (parent != kSaturated && cliques[k].size() == cliques[parent].size() + 1) {
      contained[parent] = 1;
    }
  }
  std::vector<std::vector<NodeId>> out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!contained[k]) out.push_back(cliques[k]);
  }
  return out;
}

std::size_t predicted_table_entries(const std::vector<std::vector<NodeId>>& cliques) {
  std::size_t total = 0;
  for (const auto& c : cliques) total = saturating_add(total, pow2(c.size()));
  return total;
}

Feasibility predict_feasibility(const AttackGraph& graph, std::size_t budget) {
  const Triangulation tri = eliminate(moralize(graph));
  const Layout layout = make_layout(tri);
  Feasibility f;
  f.predicted_entries = layout_entries(layout);
  f.induced_width = tri.order.induced_width;
  f.num_clusters = layout.clusters.size();
  f.budget = budget;
  f.fits = f.predicted_entries <= budget;
  return f;
}

std::size_t CliqueTree::home_cluster(NodeId variable) const {
  if (variable >= home_.size()) {
    throw Error(ErrorKind::NotFound, "no variable " + std::to_string(variable));
  }
  return home_[variable];
}

int CliqueTree::position(std::size_t cluster, NodeId variable) const {
  const auto& c = clusters_.at(cluster);
  const auto it = std::lower_bound(c.begin(), c.end(), variable);
  return it != c.end() && *it == variable ? static_cast<int>(it - c.begin()) : -1;
}

CliqueTree build_clique_tree(const Triangulation& triangulation, const FactorGraph& factors,
                             const JtOptions& options) {
  if (factors.num_variables() != triangulation.chordal.size()) {
    throw Error(ErrorKind::InvalidArgument, "factor graph and triangulation disagree in size");
  }
  Layout layout = make_layout(triangulation);
  const std::size_t entries = layout_entries(layout);
  if (entries > options.entry_budget) {
    throw Error(ErrorKind::ResourceLimit,
                "junction tree needs " +
                    (entries == kSaturated ? std::string("more than 2^64") : std::to_string(entries)) +
                    " table entries, budget is " + std::to_string(options.entry_budget));
  }

  CliqueTree tree;
  tree.clusters_ = std::move(layout.clusters);
  tree.edges_ = std::move(layout.edges);
  const std::size_t k = tree.clusters_.size();

  tree.assignment_.resize(factors.num_factors());
  for (std::size_t f = 0; f < factors.num_factors(); ++f) {
    const auto& scope = factors.factor(f).scope;
    std::size_t chosen = kSaturated;
    for (std::size_t c : layout.clusters_of[scope[0]]) {
      const auto& cl = tree.clusters_[c];
      const bool covers = std::all_of(scope.begin(), scope.end(), [&](NodeId v) {
        return std::binary_search(cl.begin(), cl.end(), v);
      });
      if (covers) {
        chosen = c;
        break;
      }
    }
    if (chosen == kSaturated) throw Error(ErrorKind::Internal, "factor scope not covered by any cluster");
    tree.assignment_[f] = chosen;
  }

  tree.potentials_.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    tree.potentials_[c].assign(std::size_t{1} << tree.clusters_[c].size(), 1.0);
  }
  for (std::size_t f = 0; f < factors.num_factors(); ++f) {
    const Factor& factor = factors.factor(f);
    const std::size_t c = tree.assignment_[f];
    std::vector<int> target(tree.clusters_[c].size(), -1);
    for (std::size_t b = 0; b < target.size(); ++b) {
      const auto it = std::find(factor.scope.begin(), factor.scope.end(), tree.clusters_[c][b]);
      if (it != factor.scope.end()) target[b] = static_cast<int>(it - factor.scope.begin());
    }
    kernels::multiply_projected(tree.potentials_[c], factor.table, kernels::IndexProjection(target));
  }

  tree.links_.assign(k, {});
  tree.projection_.resize(2 * tree.edges_.size());
  tree.summed_bits_.resize(2 * tree.edges_.size());
  for (std::size_t e = 0; e < tree.edges_.size(); ++e) {
    const SepsetEdge& edge = tree.edges_[e];
    tree.links_[edge.a].push_back({edge.b, e});
    tree.links_[edge.b].push_back({edge.a, e});
    for (unsigned d = 0; d < 2; ++d) {
      const auto& sender = tree.clusters_[d == 0 ? edge.a : edge.b];
      std::vector<int> target(sender.size(), -1);
      std::vector<unsigned> summed;
      for (std::size_t b = 0; b < sender.size(); ++b) {
        const auto it = std::lower_bound(edge.sepset.begin(), edge.sepset.end(), sender[b]);
        if (it != edge.sepset.end() && *it == sender[b]) {
          target[b] = static_cast<int>(it - edge.sepset.begin());
        } else {
          summed.push_back(static_cast<unsigned>(b));
        }
      }
      std::reverse(summed.begin(), summed.end());
      tree.projection_[2 * e + d] = kernels::IndexProjection(target);
      tree.summed_bits_[2 * e + d] = std::move(summed);
    }
  }

  tree.home_.assign(factors.num_variables(), 0);
  for (NodeId v = 0; v < factors.num_variables(); ++v) {
    std::size_t best = kSaturated;
    for (std::size_t c : layout.clusters_of[v]) {
      if (best == kSaturated || tree.clusters_[c].size() < tree.clusters_[best].size()) best = c;
    }
    tree.home_[v] = best;
  }

  tree.stats_.num_factors = factors.num_factors();
  for (const auto& c : tree.clusters_) tree.stats_.max_scope = std::max(tree.stats_.max_scope, c.size());
  tree.stats_.table_entries = predicted_table_entries(tree.clusters_);
  return tree;
}

class Propagator {
 public:
  Propagator(const CliqueTree& tree, const Calibration& cal,
             std::vector<std::vector<double>>* out = nullptr)
      : tree_(tree), cal_(cal), out_(out) {}

  // Cluster potential with evidence clamped and incoming messages multiplied
  // in, skipping the edge `except`. Written into `t`, reusing its storage.
  void absorb(std::size_t c, std::size_t except, std::vector<double>& t) const {
    const auto& pot = tree_.potentials_[c];
    t.assign(pot.begin(), pot.end());
    const auto& cl = tree_.clusters_[c];
    for (std::size_t b = 0; b < cl.size(); ++b) {
      const auto s = cal_.evidence.state(cl[b]);
      if (s) kernels::scale_by_bit(t, static_cast<unsigned>(b), *s ? 0.0 : 1.0, *s ? 1.0 : 0.0);
    }
    for (const CliqueTree::Link& link : tree_.links_[c]) {
      if (link.edge == except) continue;
      const unsigned out = outgoing(c, link.edge);
      kernels::multiply_projected(t, cal_.messages[2 * link.edge + (1 - out)],
                                  tree_.projection_[2 * link.edge + out]);
    }
  }

  void send(std::size_t c, std::size_t edge) {
    const unsigned d = outgoing(c, edge);
    absorb(c, edge, a_);
    for (unsigned bit : tree_.summed_bits_[2 * edge + d]) {
      b_.resize(a_.size() / 2);
      kernels::sum_out_bit(a_, bit, b_);
      a_.swap(b_);
    }
    normalize(a_, "message");
    (*out_)[2 * edge + d].assign(a_.begin(), a_.end());
  }

  // Normalized cluster belief, valid until the next call.
  const std::vector<double>& belief(std::size_t c) {
    absorb(c, kSaturated, a_);
    normalize(a_, "cluster belief");
    return a_;
  }

  void run() {
    const std::size_t k = tree_.clusters_.size();
    out_->assign(2 * tree_.edges_.size(), {});
    if (k == 0) return;
    std::vector<std::size_t> order{0};
    std::vector<std::size_t> parent_edge(k, kSaturated);
    std::vector<char> seen(k, 0);
    seen[0] = 1;
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (const CliqueTree::Link& link : tree_.links_[order[i]]) {
        if (seen[link.neighbor]) continue;
        seen[link.neighbor] = 1;
        parent_edge[link.neighbor] = link.edge;
        order.push_back(link.neighbor);
      }
    }
    for (std::size_t i = order.size(); i-- > 1;) send(order[i], parent_edge[order[i]]);
    for (std::size_t c : order) {
      for (const CliqueTree::Link& link : tree_.links_[c]) {
        if (link.edge != parent_edge[c]) send(c, link.edge);
      }
    }
  }

  static void normalize(std::vector<double>& t, const char* what) {
    const double s = kernels::sum(t);
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::InconsistentEvidence,
                  std::string("evidence has zero probability (empty ") + what + ")");
    }
    kernels::scale(t, 1.0 / s);
  }

 private:
  unsigned outgoing(std::size_t c, std::size_t edge) const {
    return tree_.edges_[edge].a == c ? 0U : 1U;
  }

  const CliqueTree& tree_;
  const Calibration& cal_;
  std::vector<std::vector<double>>* out_;
  std::vector<double> a_;
  std::vector<double> b_;
};

Calibration propagate(const CliqueTree& tree, const EvidenceSet& evidence) {
  evidence.check_against(tree.num_variables());
  Calibration cal;
  cal.evidence = evidence;
  Propagator(tree, cal, &cal.messages).run();
  return cal;
}

std::vector<double> cluster_belief(const CliqueTree& tree, const Calibration& calibration,
                                   std::size_t cluster) {
  if (cluster >= tree.clusters().size()) {
    throw Error(ErrorKind::NotFound, "no cluster " + std::to_string(cluster));
  }
  Propagator p(tree, calibration);
  return p.belief(cluster);
}

double marginal_in_cluster(const CliqueTree& tree, const Calibration& calibration,
                           NodeId variable, std::size_t cluster) {
  const int pos = tree.position(cluster, variable);
  if (pos < 0) {
    throw Error(ErrorKind::InvalidArgument,
                "variable " + std::to_string(variable) + " is not in cluster " + std::to_string(cluster));
  }
  const std::vector<double> belief = cluster_belief(tree, calibration, cluster);
  const auto [f, t] = kernels::bit_marginal(belief, static_cast<unsigned>(pos));
  return t / (f + t);
}

double marginal(const CliqueTree& tree, const Calibration& calibration, NodeId variable) {
  return marginal_in_cluster(tree, calibration, variable, tree.home_cluster(variable));
}

std::vector<double> marginals(const CliqueTree& tree, const Calibration& calibration) {
  const std::size_t n = tree.num_variables();
  std::vector<double> out(n, 0.0);
  std::vector<std::vector<NodeId>> by_cluster(tree.clusters().size());
  for (NodeId v = 0; v < n; ++v) by_cluster[tree.home_cluster(v)].push_back(v);
  Propagator p(tree, calibration);
  for (std::size_t c = 0; c < by_cluster.size(); ++c) {
    if (by_cluster[c].empty()) continue;
    const std::vector<double>& belief = p.belief(c);
    for (NodeId v : by_cluster[c]) {
      const auto [f, t] = kernels::bit_marginal(belief, static_cast<unsigned>(tree.position(c, v)));
      out[v] = t / (f + t);
    }
  }
  return out;
}

JunctionTree JunctionTree::build(const AttackGraph& graph, const JtOptions& options) {
  JunctionTree jt;
  jt.factors_ = from_bag(graph);
  jt.triangulation_ = eliminate(moralize(graph));
  jt.tree_ = build_clique_tree(jt.triangulation_, jt.factors_, options);
  jt.budget_ = options.entry_budget;
  return jt;
}

std::vector<double> JunctionTree::marginals(const EvidenceSet& evidence) const {
  return bagscan::marginals(tree_, propagate(tree_, evidence));
}

nlohmann::json JunctionTree::diagnostics() const {
  std::vector<std::size_t> cluster_sizes;
  for (const auto& c : tree_.clusters()) cluster_sizes.push_back(c.size());
  std::vector<std::size_t> sepset_sizes;
  for (const auto& e : tree_.edges()) sepset_sizes.push_back(e.sepset.size());
  return {{"clusters", tree_.clusters().size()},
          {"cluster_sizes", cluster_sizes},
          {"sepset_sizes", sepset_sizes},
          {"induced_width", triangulation_.order.induced_width},
          {"fill_edges", triangulation_.fill_edges.size()},
          {"elimination_order", triangulation_.order.order},
          {"max_scope", tree_.stats().max_scope},
          {"table_entries", tree_.stats().table_entries},
          {"entry_budget", budget_}};
}

}  // namespace bagscan
