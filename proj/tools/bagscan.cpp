#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bagscan/bench.hpp"
#include "bagscan/error.hpp"
#include "bagscan/factor_graph.hpp"
#include "bagscan/generators.hpp"
#include "bagscan/graph_io.hpp"
#include "bagscan/junction_tree.hpp"
#include "bagscan/kernels.hpp"
#include "bagscan/lbp.hpp"
#include "bagscan/oracle.hpp"
#include "bagscan/service.hpp"

using namespace bagscan;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidSpec: return 1;
    case ErrorKind::ResourceLimit: return 3;
    default: return 2;
  }
}

struct InferenceArgs {
  std::string graph_path;
  std::string method = "auto";
  std::vector<std::string> evidence;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<std::size_t> max_iter;
  unsigned threads = 1;
  std::size_t jt_budget = std::size_t{1} << 28;
  std::string config_path;
  std::string snapshots_path;
  std::string dot_path;
  bool json = false;
};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path + ": " + e.what());
  }
}

// Config files hold either a bare LBP config or {"lbp": {...}, "jt_budget": n}.
ServiceConfig load_config(const std::string& path) {
  ServiceConfig config;
  if (path.empty()) return config;
  const nlohmann::json doc = read_json_file(path);
  try {
    config.lbp = lbp_config_from_json(doc.contains("lbp") ? doc.at("lbp") : doc);
    config.jt_budget = doc.value("jt_budget", config.jt_budget);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path + ": " + e.what());
  }
  return config;
}

NodeId node_ref(const AttackGraph& graph, const std::string& text) {
  if (const auto id = graph.find_label(text)) return *id;
  if (!text.empty() && text.find_first_not_of("0123456789") == std::string::npos) {
    const auto id = std::stoull(text);
    if (id < graph.size()) return static_cast<NodeId>(id);
  }
  throw Error(ErrorKind::NotFound, "no node '" + text + "'");
}

EvidenceSet parse_evidence(const AttackGraph& graph, const std::vector<std::string>& items) {
  EvidenceSet ev;
  for (const std::string& list : items) {
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "evidence must look like node=true");
      const std::string value = item.substr(eq + 1);
      bool state;
      if (value == "true" || value == "T" || value == "1") {
        state = true;
      } else if (value == "false" || value == "F" || value == "0") {
        state = false;
      } else {
        throw Error(ErrorKind::InvalidArgument, "bad evidence value '" + value + "'");
      }
      ev.observe(node_ref(graph, item.substr(0, eq)), state);
    }
  }
  return ev;
}

int run_inference(const InferenceArgs& args) {
  const AttackGraph graph = read_graph_file(args.graph_path);
  const EvidenceSet ev = parse_evidence(graph, args.evidence);
  ServiceConfig config = load_config(args.config_path);
  if (args.alpha) config.lbp.alpha = *args.alpha;
  if (args.epsilon) config.lbp.epsilon = *args.epsilon;
  if (args.max_iter) config.lbp.max_iter = *args.max_iter;
  config.lbp.threads = args.threads;
  config.lbp.snapshots = !args.snapshots_path.empty();
  if (args.config_path.empty() || args.jt_budget != (std::size_t{1} << 28)) config.jt_budget = args.jt_budget;

  Method method;
  if (args.method == "auto") {
    method = predict_feasibility(graph, config.jt_budget).fits ? Method::Jt : Method::PLbp;
  } else {
    method = parse_method(args.method);
  }

  std::vector<double> beliefs;
  std::optional<LbpResult> lbp;
  switch (method) {
    case Method::Jt:
      beliefs = JunctionTree::build(graph, JtOptions{config.jt_budget}).marginals(ev);
      break;
    case Method::Oracle:
      beliefs = enumerate(graph, ev).marginals;
      break;
    case Method::SLbp:
    case Method::PLbp:
      config.lbp.mode = method == Method::SLbp ? LbpMode::Sequential : LbpMode::Parallel;
      lbp = run_lbp(apply_evidence(from_bag(graph), ev), config.lbp);
      beliefs = lbp->beliefs;
      if (!args.snapshots_path.empty()) {
        std::ofstream out(args.snapshots_path);
        if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + args.snapshots_path);
        write_snapshots_csv(out, *lbp);
      }
      break;
  }

  if (!args.dot_path.empty()) {
    std::ofstream out(args.dot_path);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + args.dot_path);
    out << graph_to_dot(graph, &beliefs);
  }

  if (args.json) {
    nlohmann::json by_label = nlohmann::json::object();
    for (const BagNode& node : graph.nodes()) by_label[node.label] = beliefs[node.id];
    nlohmann::json doc = {{"method", to_string(method)}, {"beliefs", by_label}};
    nlohmann::json evj = nlohmann::json::object();
    for (const auto& [id, state] : ev.observations()) evj[graph.node(id).label] = state;
    doc["evidence"] = evj;
    if (lbp) {
      doc["converged"] = lbp->converged;
      doc["iterations"] = lbp->iterations;
    }
    std::cout << doc.dump(2) << '\n';
  } else {
    std::printf("method %s", to_string(method).c_str());
    if (lbp) std::printf("  iterations %zu  %s", lbp->iterations, lbp->converged ? "converged" : "not converged");
    std::printf("\n");
    for (const BagNode& node : graph.nodes()) {
      const auto observed = ev.state(node.id);
      std::printf("%-16s %.6f%s\n", node.label.c_str(), beliefs[node.id],
                  observed ? (*observed ? "  (observed T)" : "  (observed F)") : "");
    }
  }
  return 0;
}

void add_inference_options(CLI::App* cmd, InferenceArgs& args, bool with_evidence) {
  cmd->add_option("graph", args.graph_path, "graph file (JSON)")->required();
  cmd->add_option("--method", args.method, "auto, slbp, plbp, jt or oracle")
      ->envname("BAGSCAN_METHOD")
      ->check(CLI::IsMember({"auto", "slbp", "plbp", "jt", "oracle"}));
  if (with_evidence) {
    cmd->add_option("--evidence,-e", args.evidence, "observations, e.g. D=true,E=false")
        ->required()
        ->allow_extra_args(false);
  }
  cmd->add_option("--alpha", args.alpha, "LBP damping factor");
  cmd->add_option("--epsilon", args.epsilon, "LBP convergence threshold");
  cmd->add_option("--max-iter", args.max_iter, "LBP iteration cap (0: twice the node count)");
  cmd->add_option("--threads", args.threads, "worker threads for parallel LBP");
  cmd->add_option("--jt-budget", args.jt_budget, "junction tree table-entry budget")->envname("BAGSCAN_JT_BUDGET");
  cmd->add_option("--config", args.config_path, "JSON config file")->envname("BAGSCAN_CONFIG");
  cmd->add_option("--snapshots", args.snapshots_path, "write per-iteration LBP beliefs as CSV");
  cmd->add_option("--dot", args.dot_path, "write Graphviz with beliefs");
  cmd->add_flag("--json", args.json, "machine-readable output");
}

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian attack graph inference"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "force kernel variant: scalar, avx2 or neon");

  // generate
  GeneratorSpec gen;
  std::string family = "pseudo_random";
  std::string gen_spec_path, histogram_path, gen_out;
  bool gen_dot = false;
  auto* generate_cmd = app.add_subcommand("generate", "generate a synthetic attack graph");
  generate_cmd->add_option("--spec", gen_spec_path, "generator spec JSON (overrides flags)");
  generate_cmd->add_option("--family", family)->check(CLI::IsMember({"pseudo_random", "cluster"}));
  generate_cmd->add_option("--n", gen.n, "node count");
  generate_cmd->add_option("--m", gen.m, "maximum parents per node");
  generate_cmd->add_option("--p-and", gen.p_and, "probability of an AND node");
  generate_cmd->add_option("--n-c", gen.n_c, "cluster size");
  generate_cmd->add_option("--seed", gen.seed);
  generate_cmd->add_option("--p-e", gen.p_e, "alert error rate");
  generate_cmd->add_option("--histogram", histogram_path, "CVSS histogram JSON");
  generate_cmd->add_option("-o,--output", gen_out, "output file (default stdout)");
  generate_cmd->add_flag("--dot", gen_dot, "emit Graphviz instead of JSON");

  InferenceArgs static_args, dynamic_args;
  auto* static_cmd = app.add_subcommand("static", "unconditional probabilities");
  add_inference_options(static_cmd, static_args, false);
  auto* dynamic_cmd = app.add_subcommand("dynamic", "posteriors given observed compromises");
  add_inference_options(dynamic_cmd, dynamic_args, true);

  std::string patch_graph, patch_from, patch_to, patch_out;
  auto* patch_cmd = app.add_subcommand("patch", "zero the exploit probability of an edge");
  patch_cmd->add_option("graph", patch_graph)->required();
  patch_cmd->add_option("--from", patch_from)->required();
  patch_cmd->add_option("--to", patch_to)->required();
  patch_cmd->add_option("-o,--output", patch_out, "output file (default stdout)");

  std::string bench_spec, bench_out, bench_summary;
  bool bench_json = false;
  auto* bench_cmd = app.add_subcommand("bench", "run an experiment sweep");
  bench_cmd->add_option("spec", bench_spec, "experiment spec JSON")->required();
  bench_cmd->add_option("-o,--output", bench_out, "records CSV (default stdout)");
  bench_cmd->add_option("--summary", bench_summary, "summary file (.json or .csv)");
  bench_cmd->add_option("--histogram", histogram_path, "CVSS histogram JSON");
  bench_cmd->add_flag("--json", bench_json, "print the summary as JSON on stdout");

  std::string host = "127.0.0.1", serve_config;
  int port = 8080;
  std::size_t serve_budget = std::size_t{1} << 28;
  auto* serve_cmd = app.add_subcommand("serve", "start the HTTP service");
  serve_cmd->add_option("--host", host)->envname("BAGSCAN_HOST");
  serve_cmd->add_option("--port", port)->envname("BAGSCAN_PORT");
  auto* budget_opt = serve_cmd->add_option("--jt-budget", serve_budget)->envname("BAGSCAN_JT_BUDGET");
  serve_cmd->add_option("--config", serve_config)->envname("BAGSCAN_CONFIG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!isa.empty()) {
      if (isa == "scalar") kernels::select(kernels::Isa::Scalar);
      else if (isa == "avx2") kernels::select(kernels::Isa::Avx2);
      else if (isa == "neon") kernels::select(kernels::Isa::Neon);
      else throw Error(ErrorKind::InvalidArgument, "unknown ISA '" + isa + "'");
    }

    if (*generate_cmd) {
      if (!gen_spec_path.empty()) {
        gen = generator_spec_from_json(read_json_file(gen_spec_path));
      } else {
        gen.family = family == "cluster" ? Family::Cluster : Family::PseudoRandom;
      }
      const CvssSampler sampler =
          histogram_path.empty() ? CvssSampler::default_sampler() : CvssSampler::from_file(histogram_path);
      const AttackGraph graph = generate(gen, sampler);
      const std::string text = gen_dot ? graph_to_dot(graph) : graph_to_json(graph).dump(2) + "\n";
      if (gen_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(gen_out);
        if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + gen_out);
        out << text;
      }
      return 0;
    }
    if (*static_cmd) return run_inference(static_args);
    if (*dynamic_cmd) return run_inference(dynamic_args);
    if (*patch_cmd) {
      const AttackGraph graph = read_graph_file(patch_graph);
      const AttackGraph patched = patch(graph, node_ref(graph, patch_from), node_ref(graph, patch_to));
      if (patch_out.empty()) {
        std::cout << graph_to_json(patched).dump(2) << '\n';
      } else {
        write_graph_file(patched, patch_out);
      }
      return 0;
    }
    if (*bench_cmd) {
      const ExperimentSpec spec = experiment_spec_from_json(read_json_file(bench_spec));
      const CvssSampler sampler =
          histogram_path.empty() ? CvssSampler::default_sampler() : CvssSampler::from_file(histogram_path);
      const auto records = run_experiment(spec, sampler);
      const auto summary = summarize(records);
      if (bench_out.empty() && !bench_json) {
        write_records_csv(std::cout, records);
      } else if (!bench_out.empty()) {
        std::ofstream out(bench_out);
        if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + bench_out);
        write_records_csv(out, records);
      }
      if (!bench_summary.empty()) {
        std::ofstream out(bench_summary);
        if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + bench_summary);
        if (bench_summary.size() >= 4 && bench_summary.substr(bench_summary.size() - 4) == ".csv") {
          write_summary_csv(out, summary);
        } else {
          out << to_json(summary).dump(2) << '\n';
        }
      }
      if (bench_json) std::cout << to_json(summary).dump(2) << '\n';
      return 0;
    }
    if (*serve_cmd) {
      ServiceConfig config = load_config(serve_config);
      if (budget_opt->count() > 0 || serve_config.empty()) config.jt_budget = serve_budget;
      HttpService service(config);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), port);
      const bool ok = service.run(host, port);
      g_service = nullptr;
      if (!ok) throw Error(ErrorKind::InvalidArgument, "cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "bagscan: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bagscan: %s\n", e.what());
    return 2;
  }
  return 0;
}
