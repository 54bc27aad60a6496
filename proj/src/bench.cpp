#include "bagscan/bench.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cctype>
#include <cmath>
#include <map>
#include <ostream>
#include <tuple>

#include "bagscan/error.hpp"
#include "bagscan/factor_graph.hpp"
#include "bagscan/junction_tree.hpp"
#include "bagscan/oracle.hpp"

namespace bagscan {

std::string to_string(Method method) {
  switch (method) {
    case Method::SLbp: return "slbp";
    case Method::PLbp: return "plbp";
    case Method::Jt: return "jt";
    case Method::Oracle: return "oracle";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  std::string key;
  for (char c : text) {
    if (c != '_' && c != '-') key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "slbp") return Method::SLbp;
  if (key == "plbp") return Method::PLbp;
  if (key == "jt") return Method::Jt;
  if (key == "oracle") return Method::Oracle;
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + text + "'");
}

double rmse(const std::vector<double>& estimates, const std::vector<double>& exact) {
  if (estimates.size() != exact.size()) {
    throw Error(ErrorKind::InvalidArgument, "rmse: length mismatch");
  }
  if (estimates.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = estimates[i] - exact[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

void ExperimentSpec::validate() const {
  if (repetitions < 1) throw Error(ErrorKind::InvalidSpec, "repetitions must be at least 1");
  if (n.empty() || m.empty() || p_and.empty() || alphas.empty() || methods.empty()) {
    throw Error(ErrorKind::InvalidSpec, "sweep axes must be non-empty");
  }
  if (family == Family::Cluster && n_c.empty()) throw Error(ErrorKind::InvalidSpec, "n_c is empty");
  if (timing_repeats < 1) throw Error(ErrorKind::InvalidSpec, "timing_repeats must be at least 1");
  const bool oracle = std::find(methods.begin(), methods.end(), Method::Oracle) != methods.end();
  if (oracle && *std::max_element(n.begin(), n.end()) > kOracleNodeLimit) {
    throw Error(ErrorKind::InvalidSpec, "oracle requested above its node limit");
  }
  for (double a : alphas) {
    if (!(a >= 0.0 && a < 1.0)) throw Error(ErrorKind::InvalidSpec, "alpha outside [0,1)");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidSpec, "epsilon must be positive");
  for (std::size_t nn : n) {
    for (std::size_t mm : m) {
      for (double pa : p_and) {
        GeneratorSpec g{family, nn, mm, pa, 0, 0, 0.0};
        if (family == Family::Cluster) {
          for (std::size_t c : n_c) {
            g.n_c = c;
            g.validate();
          }
        } else {
          g.validate();
        }
      }
    }
  }
}

namespace {

template <typename T>
std::vector<T> as_list(const nlohmann::json& doc, const char* key, std::vector<T> fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (v.is_array()) return v.get<std::vector<T>>();
  return {v.get<T>()};
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

using Clock = std::chrono::steady_clock;

template <typename F>
double median_seconds(std::size_t repeats, F&& body) {
  std::vector<double> times;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto start = Clock::now();
    body();
    times.push_back(std::chrono::duration<double>(Clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  // Clocks can report 0 for very short runs; keep durations positive.
  return std::max(times[times.size() / 2], 1e-9);
}

std::size_t lbp_entries(const FactorGraph& graph) {
  std::size_t total = 4 * graph.num_edges();
  for (const Factor& f : graph.factors()) total += f.table.size();
  return total;
}

std::size_t jt_entries(const CliqueTree& tree) {
  std::size_t total = tree.stats().table_entries;
  for (const SepsetEdge& e : tree.edges()) total += std::size_t{2} << e.sepset.size();
  return total;
}

struct Truth {
  std::optional<std::vector<double>> marginals;
  bool from_jt = false;
};

class CellRunner {
 public:
  CellRunner(const ExperimentSpec& spec, const GeneratorSpec& cell, std::size_t rep,
             const CvssSampler& sampler, std::vector<ExperimentRecord>& out)
      : spec_(spec), cell_(cell), rep_(rep), out_(out) {
    cell_.seed = graph_seed(spec.base_seed, cell, rep);
    graph_ = generate(cell_, sampler);
    if (spec.dynamic) evidence_ = random_evidence(graph_, spec.evidence_count, cell_.seed ^ 0xE71DE7CEULL);
  }

  void run() {
    const bool wants_jt = std::find(spec_.methods.begin(), spec_.methods.end(), Method::Jt) != spec_.methods.end();
    if (wants_jt || spec_.ground_truth) {
      try {
        jt_ = JunctionTree::build(graph_, JtOptions{spec_.jt_budget});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::ResourceLimit) throw;
      }
    }
    if (spec_.ground_truth) {
      truth_static_ = truth({});
      if (spec_.dynamic) truth_dynamic_ = truth(evidence_);
    }

    for (Method method : spec_.methods) {
      switch (method) {
        case Method::Jt: run_jt(); break;
        case Method::Oracle: run_oracle(); break;
        case Method::SLbp:
        case Method::PLbp:
          for (double alpha : spec_.alphas) run_lbp(method, alpha);
          break;
      }
    }
  }

 private:
  ExperimentRecord base(Method method, bool dynamic) const {
    ExperimentRecord r;
    r.family = cell_.family;
    r.n = cell_.n;
    r.m = cell_.m;
    r.n_c = cell_.family == Family::Cluster ? cell_.n_c : 0;
    r.p_and = cell_.p_and;
    r.repetition = rep_;
    r.graph_seed = cell_.seed;
    r.method = method;
    r.dynamic = dynamic;
    return r;
  }

  Truth truth(const EvidenceSet& ev) const {
    Truth t;
    try {
      if (jt_) {
        t.marginals = jt_->marginals(ev);
        t.from_jt = true;
      } else if (graph_.size() <= kOracleNodeLimit) {
        t.marginals = enumerate(graph_, ev).marginals;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InconsistentEvidence) throw;
    }
    return t;
  }

  const Truth& truth_for(bool dynamic) const { return dynamic ? truth_dynamic_ : truth_static_; }

  void run_jt() {
    if (!jt_) {
      for (bool dynamic : phases()) {
        ExperimentRecord r = base(Method::Jt, dynamic);
        r.status = "resource-limit";
        out_.push_back(r);
      }
      return;
    }
    const JtOptions options{spec_.jt_budget};
    const double build = median_seconds(spec_.timing_repeats, [&] { JunctionTree::build(graph_, options); });
    for (bool dynamic : phases()) {
      ExperimentRecord r = base(Method::Jt, dynamic);
      const EvidenceSet& ev = dynamic ? evidence_ : EvidenceSet{};
      std::vector<double> beliefs;
      try {
        r.query_seconds = median_seconds(spec_.timing_repeats, [&] { beliefs = jt_->marginals(ev); });
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InconsistentEvidence) throw;
        r.status = "inconsistent-evidence";
        out_.push_back(r);
        continue;
      }
      r.build_seconds = dynamic ? 0.0 : build;
      r.iterations = 1;
      r.converged = true;
      r.peak_table_entries = jt_entries(jt_->tree());
      if (const auto& t = truth_for(dynamic); t.marginals) r.rmse = rmse(beliefs, *t.marginals);
      out_.push_back(r);
    }
  }

  void run_oracle() {
    for (bool dynamic : phases()) {
      ExperimentRecord r = base(Method::Oracle, dynamic);
      if (graph_.size() > kOracleNodeLimit) {
        r.status = "resource-limit";
        out_.push_back(r);
        continue;
      }
      const EvidenceSet& ev = dynamic ? evidence_ : EvidenceSet{};
      std::vector<double> beliefs;
      try {
        r.query_seconds =
            median_seconds(spec_.timing_repeats, [&] { beliefs = enumerate(graph_, ev).marginals; });
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InconsistentEvidence) throw;
        r.status = "inconsistent-evidence";
        out_.push_back(r);
        continue;
      }
      r.iterations = 1;
      r.converged = true;
      r.peak_table_entries = std::size_t{1} << graph_.size();
      if (const auto& t = truth_for(dynamic); t.marginals) r.rmse = rmse(beliefs, *t.marginals);
      out_.push_back(r);
    }
  }

  void run_lbp(Method method, double alpha) {
    LbpConfig config;
    config.mode = method == Method::SLbp ? LbpMode::Sequential : LbpMode::Parallel;
    config.alpha = alpha;
    config.epsilon = spec_.epsilon;
    config.max_iter = spec_.max_iter;
    for (bool dynamic : phases()) {
      ExperimentRecord r = base(method, dynamic);
      r.alpha = alpha;
      const EvidenceSet& ev = dynamic ? evidence_ : EvidenceSet{};
      FactorGraph clamped;
      r.build_seconds = median_seconds(spec_.timing_repeats, [&] {
        clamped = dynamic ? apply_evidence(from_bag(graph_), ev) : from_bag(graph_);
      });
      LbpResult result;
      try {
        r.query_seconds = median_seconds(spec_.timing_repeats, [&] { result = bagscan::run_lbp(clamped, config); });
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InconsistentEvidence) throw;
        r.status = "inconsistent-evidence";
        out_.push_back(r);
        continue;
      }
      r.iterations = result.iterations;
      r.converged = result.converged;
      r.peak_table_entries = lbp_entries(clamped);
      const Truth& t = truth_for(dynamic);
      if (t.marginals) {
        r.rmse = rmse(result.beliefs, *t.marginals);
        if (spec_.track_convergence) {
          LbpConfig traced = config;
          traced.snapshots = true;
          const LbpResult tr = bagscan::run_lbp(clamped, traced);
          for (const auto& snap : tr.snapshots) r.rmse_trace.push_back(rmse(snap, *t.marginals));
        }
      }
      out_.push_back(r);
    }
  }

  std::vector<bool> phases() const {
    return spec_.dynamic ? std::vector<bool>{false, true} : std::vector<bool>{false};
  }

  const ExperimentSpec& spec_;
  GeneratorSpec cell_;
  std::size_t rep_;
  std::vector<ExperimentRecord>& out_;
  AttackGraph graph_;
  EvidenceSet evidence_;
  std::optional<JunctionTree> jt_;
  Truth truth_static_;
  Truth truth_dynamic_;
};

}  // namespace

ExperimentSpec experiment_spec_from_json(const nlohmann::json& doc) {
  try {
    ExperimentSpec spec;
    const nlohmann::json gen = doc.value("generator", nlohmann::json::object());
    const std::string family = gen.value("family", std::string("pseudo_random"));
    if (family == "pseudo_random" || family == "PSEUDO_RANDOM") {
      spec.family = Family::PseudoRandom;
    } else if (family == "cluster" || family == "CLUSTER") {
      spec.family = Family::Cluster;
    } else {
      throw Error(ErrorKind::InvalidSpec, "unknown family " + family);
    }
    spec.n = as_list<std::size_t>(gen, "n", spec.n);
    spec.m = as_list<std::size_t>(gen, "m", spec.m);
    spec.n_c = as_list<std::size_t>(gen, "n_c", spec.n_c);
    spec.p_and = as_list<double>(gen, "p_and", spec.p_and);
    spec.alphas = as_list<double>(doc, "alphas", spec.alphas);
    spec.repetitions = doc.value("repetitions", spec.repetitions);
    if (doc.contains("methods")) {
      spec.methods.clear();
      for (const auto& m : doc.at("methods")) spec.methods.push_back(parse_method(m.get<std::string>()));
    }
    spec.evidence_count = doc.value("evidence_count", spec.evidence_count);
    spec.base_seed = doc.value("base_seed", spec.base_seed);
    spec.dynamic = doc.value("dynamic", spec.dynamic);
    spec.epsilon = doc.value("epsilon", spec.epsilon);
    spec.max_iter = doc.value("max_iter", spec.max_iter);
    spec.timing_repeats = doc.value("timing_repeats", spec.timing_repeats);
    spec.jt_budget = doc.value("jt_budget", spec.jt_budget);
    spec.ground_truth = doc.value("ground_truth", spec.ground_truth);
    spec.track_convergence = doc.value("track_convergence", spec.track_convergence);
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("bad experiment spec: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) throw Error(ErrorKind::InvalidSpec, e.what());
    throw;
  }
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  std::vector<std::string> methods;
  for (Method m : spec.methods) methods.push_back(to_string(m));
  return {{"generator",
           {{"family", spec.family == Family::Cluster ? "cluster" : "pseudo_random"},
            {"n", spec.n},
            {"m", spec.m},
            {"n_c", spec.n_c},
            {"p_and", spec.p_and}}},
          {"alphas", spec.alphas},
          {"repetitions", spec.repetitions},
          {"methods", methods},
          {"evidence_count", spec.evidence_count},
          {"base_seed", spec.base_seed},
          {"dynamic", spec.dynamic},
          {"epsilon", spec.epsilon},
          {"max_iter", spec.max_iter},
          {"timing_repeats", spec.timing_repeats},
          {"jt_budget", spec.jt_budget},
          {"ground_truth", spec.ground_truth},
          {"track_convergence", spec.track_convergence}};
}

std::uint64_t graph_seed(std::uint64_t base_seed, const GeneratorSpec& cell, std::size_t repetition) {
  std::uint64_t h = splitmix(base_seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(cell.family));
  h = splitmix(h ^ cell.n);
  h = splitmix(h ^ cell.m);
  h = splitmix(h ^ (cell.family == Family::Cluster ? cell.n_c : 0));
  h = splitmix(h ^ std::bit_cast<std::uint64_t>(cell.p_and));
  return splitmix(h ^ repetition);
}

EvidenceSet random_evidence(const AttackGraph& graph, std::size_t count, std::uint64_t seed) {
  std::vector<NodeId> candidates;
  for (const BagNode& node : graph.nodes()) {
    if (!node.attacker_root) candidates.push_back(node.id);
  }
  Rng rng(seed);
  EvidenceSet ev;
  for (std::uint64_t i : rng.sample_distinct(candidates.size(), std::min(count, candidates.size()))) {
    ev.observe(candidates[i], true);
  }
  return ev;
}

std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec, const CvssSampler& sampler) {
  spec.validate();
  std::vector<ExperimentRecord> records;
  const std::vector<std::size_t> cluster_sizes =
      spec.family == Family::Cluster ? spec.n_c : std::vector<std::size_t>{0};
  for (std::size_t n : spec.n) {
    for (std::size_t m : spec.m) {
      for (std::size_t n_c : cluster_sizes) {
        for (double p_and : spec.p_and) {
          const GeneratorSpec cell{spec.family, n, m, p_and, n_c, 0, 0.0};
          for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
            CellRunner(spec, cell, rep, sampler, records).run();
          }
        }
      }
    }
  }
  return records;
}

namespace {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

const char* family_name(Family f) { return f == Family::Cluster ? "cluster" : "pseudo_random"; }

template <typename T>
void put_optional(std::ostream& out, const std::optional<T>& v) {
  if (v) out << *v;
}

}  // namespace

std::vector<CellSummary> summarize(const std::vector<ExperimentRecord>& records) {
  using Key = std::tuple<int, std::size_t, std::size_t, std::size_t, double, double, bool, int, bool>;
  std::map<Key, std::size_t> index;
  std::vector<std::vector<const ExperimentRecord*>> groups;
  for (const ExperimentRecord& r : records) {
    const Key key{static_cast<int>(r.family), r.n, r.m, r.n_c, r.p_and, r.alpha.value_or(0.0),
                  r.alpha.has_value(), static_cast<int>(r.method), r.dynamic};
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(&r);
  }

  std::vector<CellSummary> out;
  for (const auto& group : groups) {
    const ExperimentRecord& first = *group.front();
    CellSummary s;
    s.family = first.family;
    s.n = first.n;
    s.m = first.m;
    s.n_c = first.n_c;
    s.p_and = first.p_and;
    s.alpha = first.alpha;
    s.method = first.method;
    s.dynamic = first.dynamic;
    s.runs = group.size();
    std::vector<double> rmses, iterations, converged, build, query, total;
    std::size_t longest = 0;
    for (const ExperimentRecord* r : group) {
      if (r->status != "ok") {
        ++s.failed;
        continue;
      }
      if (r->rmse) rmses.push_back(*r->rmse);
      iterations.push_back(static_cast<double>(r->iterations));
      converged.push_back(r->converged ? 1.0 : 0.0);
      build.push_back(r->build_seconds);
      query.push_back(r->query_seconds);
      total.push_back(r->total_seconds());
      longest = std::max(longest, r->rmse_trace.size());
    }
    s.rmse_count = rmses.size();
    s.rmse_mean = mean(rmses);
    s.rmse_std = sample_std(rmses);
    s.iterations_mean = mean(iterations);
    s.converged_fraction = mean(converged);
    s.build_seconds_mean = mean(build);
    s.query_seconds_mean = mean(query);
    s.total_seconds_mean = mean(total);
    if (longest > 0) {
      for (std::size_t it = 0; it < longest; ++it) {
        std::vector<double> column;
        for (const ExperimentRecord* r : group) {
          if (r->rmse_trace.empty()) continue;
          column.push_back(r->rmse_trace[std::min(it, r->rmse_trace.size() - 1)]);
        }
        s.rmse_curve.push_back(mean(column));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  const auto precision = out.precision(17);
  out << "family,n,m,n_c,p_and,alpha,repetition,graph_seed,method,phase,status,rmse,iterations,"
         "converged,build_seconds,query_seconds,total_seconds,peak_table_entries\n";
  for (const ExperimentRecord& r : records) {
    out << family_name(r.family) << ',' << r.n << ',' << r.m << ',' << r.n_c << ',' << r.p_and << ',';
    put_optional(out, r.alpha);
    out << ',' << r.repetition << ',' << r.graph_seed << ',' << to_string(r.method) << ','
        << (r.dynamic ? "dynamic" : "static") << ',' << r.status << ',';
    put_optional(out, r.rmse);
    out << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << r.build_seconds << ','
        << r.query_seconds << ',' << r.total_seconds() << ',' << r.peak_table_entries << '\n';
  }
  out.precision(precision);
}

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& summaries) {
  const auto precision = out.precision(10);
  out << "family,n,m,n_c,p_and,alpha,method,phase,runs,failed,rmse_count,rmse_mean,rmse_std,"
         "iterations_mean,converged_fraction,build_seconds_mean,query_seconds_mean,"
         "total_seconds_mean\n";
  for (const CellSummary& s : summaries) {
    out << family_name(s.family) << ',' << s.n << ',' << s.m << ',' << s.n_c << ',' << s.p_and << ',';
    put_optional(out, s.alpha);
    out << ',' << to_string(s.method) << ',' << (s.dynamic ? "dynamic" : "static") << ',' << s.runs
        << ',' << s.failed << ',' << s.rmse_count << ',' << s.rmse_mean << ',' << s.rmse_std << ','
        << s.iterations_mean << ',' << s.converged_fraction << ',' << s.build_seconds_mean << ','
        << s.query_seconds_mean << ',' << s.total_seconds_mean << '\n';
  }
  out.precision(precision);
}

nlohmann::json to_json(const std::vector<CellSummary>& summaries) {
  nlohmann::json out = nlohmann::json::array();
  for (const CellSummary& s : summaries) {
    nlohmann::json row = {{"family", family_name(s.family)},
                          {"n", s.n},
                          {"m", s.m},
                          {"n_c", s.n_c},
                          {"p_and", s.p_and},
                          {"alpha", s.alpha ? nlohmann::json(*s.alpha) : nlohmann::json()},
                          {"method", to_string(s.method)},
                          {"phase", s.dynamic ? "dynamic" : "static"},
                          {"runs", s.runs},
                          {"failed", s.failed},
                          {"rmse_count", s.rmse_count},
                          {"rmse_mean", s.rmse_mean},
                          {"rmse_std", s.rmse_std},
                          {"iterations_mean", s.iterations_mean},
                          {"converged_fraction", s.converged_fraction},
                          {"build_seconds_mean", s.build_seconds_mean},
                          {"query_seconds_mean", s.query_seconds_mean},
                          {"total_seconds_mean", s.total_seconds_mean}};
    if (!s.rmse_curve.empty()) row["rmse_curve"] = s.rmse_curve;
    out.push_back(std::move(row));
  }
  return out;
}

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "linear fit needs two or more paired points");
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::InvalidArgument, "linear fit needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace bagscan
