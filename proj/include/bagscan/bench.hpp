#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bagscan/generators.hpp"
#include "bagscan/lbp.hpp"

namespace bagscan {

enum class Method { SLbp, PLbp, Jt, Oracle };

std::string to_string(Method method);
// Accepts slbp/plbp/jt/oracle, case-insensitive, with or without "_" / "-".
Method parse_method(const std::string& text);

// sqrt(mean((a - b)^2)). Throws invalid-argument on length mismatch.
double rmse(const std::vector<double>& estimates, const std::vector<double>& exact);

struct ExperimentSpec {
  Family family = Family::PseudoRandom;
  std::vector<std::size_t> n{40};
  std::vector<std::size_t> m{3};
  std::vector<std::size_t> n_c{20};
  std::vector<double> p_and{0.0};
  std::vector<double> alphas{0.0};
  std::size_t repetitions = 1;
  std::vector<Method> methods{Method::PLbp, Method::Jt};
  std::size_t evidence_count = 3;
  std::uint64_t base_seed = 1;
  bool dynamic = true;
  double epsilon = 1e-3;
  std::size_t max_iter = 0;
  // Median over this many timed runs per measurement.
  std::size_t timing_repeats = 3;
  std::size_t jt_budget = std::size_t{1} << 28;
  // Compute exact marginals for RMSE. Off for pure timing sweeps.
  bool ground_truth = true;
  // Record RMSE after every LBP iteration (needs ground truth).
  bool track_convergence = false;

  // Throws invalid-spec.
  void validate() const;
};

ExperimentSpec experiment_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentSpec& spec);

struct ExperimentRecord {
  Family family = Family::PseudoRandom;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t n_c = 0;
  double p_and = 0.0;
  // Unset for exact methods.
  std::optional<double> alpha;
  std::size_t repetition = 0;
  std::uint64_t graph_seed = 0;
  Method method = Method::PLbp;
  bool dynamic = false;
  // "ok", "resource-limit" or "inconsistent-evidence".
  std::string status = "ok";
  // Unset when no ground truth fits.
  std::optional<double> rmse;
  std::size_t iterations = 0;
  bool converged = false;
  double build_seconds = 0.0;
  double query_seconds = 0.0;
  std::size_t peak_table_entries = 0;
  std::vector<double> rmse_trace;

  double total_seconds() const { return build_seconds + query_seconds; }
};

// Seed of the graph for one generator cell and repetition; independent of
// alpha and method so every method sees the same graphs.
std::uint64_t graph_seed(std::uint64_t base_seed, const GeneratorSpec& cell, std::size_t repetition);

// `evidence_count` distinct non-root nodes observed true.
EvidenceSet random_evidence(const AttackGraph& graph, std::size_t count, std::uint64_t seed);

// Runs every cell x repetition x method. Exact-method failures are recorded,
// never thrown. Ground truth is the junction tree when it fits the budget,
// the oracle otherwise, and absent when neither applies.
std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec,
                                             const CvssSampler& sampler = CvssSampler::default_sampler());

struct CellSummary {
  Family family = Family::PseudoRandom;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t n_c = 0;
  double p_and = 0.0;
  std::optional<double> alpha;
  Method method = Method::PLbp;
  bool dynamic = false;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::size_t rmse_count = 0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double iterations_mean = 0.0;
  double converged_fraction = 0.0;
  double build_seconds_mean = 0.0;
  double query_seconds_mean = 0.0;
  double total_seconds_mean = 0.0;
  // Mean RMSE per iteration; shorter traces are padded with their last value.
  std::vector<double> rmse_curve;
};

// Groups by (cell, alpha, method, phase) in first-seen order. Standard
// deviations are sample deviations (0 for a single value).
std::vector<CellSummary> summarize(const std::vector<ExperimentRecord>& records);

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& summaries);
nlohmann::json to_json(const std::vector<CellSummary>& summaries);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares y = slope * x + intercept.
LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace bagscan
