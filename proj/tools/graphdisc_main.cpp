#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graphdisc/enumeration.hpp"
#include "graphdisc/graph.hpp"
#include "graphdisc/instruction_set.hpp"
#include "graphdisc/json_detail.hpp"
#include "graphdisc/objectives.hpp"
#include "graphdisc/optimizer.hpp"
#include "graphdisc/oracle.hpp"
#include "graphdisc/render.hpp"
#include "graphdisc/state.hpp"

namespace gd = graphdisc;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// Accepts a bare graph file or a discovery result with an embedded "graph".
gd::Graph load_graph(const std::string& path) {
  std::string text = read_file(path);
  {
    json j = json::parse(text, nullptr, false);
    if (j.is_object() && j.contains("graph") && j.contains("loss"))
      text = j["graph"].dump();
  }
  std::vector<std::string> warnings;
  gd::Graph g = gd::deserialize(text, &warnings);
  print_warnings(warnings);
  return g;
}

std::string format_amp(gd::cplx a) {
  char buf[80];
  if (std::abs(a.imag()) < 1e-12)
    std::snprintf(buf, sizeof(buf), "%.9f", a.real());
  else
    std::snprintf(buf, sizeof(buf), "%.9f%+.9fi", a.real(), a.imag());
  return buf;
}

using TermList = std::vector<std::pair<gd::Ket, gd::cplx>>;

// Largest magnitude first; basis order breaks ties.
TermList sorted_terms(const gd::KetMap& state) {
  TermList terms(state.begin(), state.end());
  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
    return std::abs(a.second) > std::abs(b.second);
  });
  return terms;
}

void state_listing(std::ostream& out, const TermList& terms) {
  out << "state (" << terms.size() << (terms.size() == 1 ? " term" : " terms")
      << ", largest first):\n";
  size_t width = 0;
  for (const auto& [k, a] : terms) width = std::max(width, gd::ket_to_string(k).size());
  for (const auto& [k, a] : terms) {
    char prob[32];
    std::snprintf(prob, sizeof(prob), "%.6f", std::norm(a));
    out << "  " << std::left << std::setw(static_cast<int>(width)) << gd::ket_to_string(k)
        << "  " << format_amp(a) << "  p=" << prob << "\n";
  }
}

json state_json(const TermList& terms) {
  json arr = json::array();
  for (const auto& [k, a] : terms)
    arr.push_back({{"ket", gd::detail::ket_to_json(k)},
                   {"amp", json::array({a.real(), a.imag()})}});
  return arr;
}

std::uint64_t parse_seed_text(const char* text, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(text, &end, 10);
  if (errno != 0 || end == text || *end != '\0' || std::string(text).find('-') != std::string::npos)
    throw std::runtime_error(what + " is not an unsigned integer: " + text);
  return v;
}

std::string loss_display_name(const gd::Target& t) {
  return t.loss_name.empty() ? gd::default_loss_name(t.kind) : t.loss_name;
}

int run_discover(const std::string& config_path, const std::string& out_dir,
                 bool seed_given, std::uint64_t seed, bool restarts_given, int restarts,
                 bool threads_given, int threads) {
  const std::string text = read_file(config_path);
  const std::string base = std::filesystem::path(config_path).parent_path().string();
  gd::InstructionSet iset = gd::parse_instruction_set(text, base);

  if (seed_given) {
    iset.optimizer.seed = seed;
  } else {
    const json j = json::parse(text);
    const bool config_has_seed =
        j.contains("optimizer") && j["optimizer"].is_object() && j["optimizer"].contains("seed");
    if (!config_has_seed)
      if (const char* env = std::getenv("GRAPHDISC_SEED"))
        iset.optimizer.seed = parse_seed_text(env, "GRAPHDISC_SEED");
  }
  if (restarts_given) {
    if (restarts < 1) throw std::runtime_error("--restarts must be positive");
    iset.optimizer.restarts = restarts;
  }
  if (threads_given) {
    if (threads < 1) throw std::runtime_error("--threads must be positive");
    iset.optimizer.threads = threads;
  }

  const gd::Graph initial = gd::build_initial_graph(iset);
  const gd::DiscoveryResult result = gd::discover(iset);

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> artifacts;
  if (iset.emit.result) {
    const std::string path = out_dir + "/result.json";
    write_file(path, gd::discovery_result_to_json(result));
    artifacts.push_back(path);
  }
  if (iset.emit.dot) {
    const std::string path = out_dir + "/graph.dot";
    write_file(path, gd::render_dot(result.graph));
    artifacts.push_back(path);
  }
  if (iset.emit.state) {
    const std::string path = out_dir + "/state.txt";
    std::ostringstream ss;
    gd::KetMap st = gd::compute_state(result.graph, gd::rule_for(result.graph));
    if (st.empty())
      ss << "state: empty\n";
    else
      state_listing(ss, sorted_terms(gd::normalize(std::move(st))));
    write_file(path, ss.str());
  }

  std::printf("loss %.6e (%s), %s\n", result.loss, loss_display_name(iset.target).c_str(),
              result.success ? "success" : "threshold not met (best effort)");
  std::printf("graph: %d edges (dense start %d), restart %d, seed %llu\n",
              result.graph.edge_count(), initial.edge_count(), result.restart,
              static_cast<unsigned long long>(result.seed));
  if (result.asymptotic)
    std::printf("asymptotic fidelity: %.9f at scale 0.1, %.9f at scale 0.01\n",
                result.fidelity_at_01, result.fidelity_at_001);
  for (const auto& a : artifacts) std::printf("wrote %s\n", a.c_str());
  return result.success ? 0 : 2;
}

int run_evaluate(const std::string& graph_path, const std::string& target_path,
                 const std::vector<std::string>& metrics, double alpha, int k, bool as_json) {
  const gd::Graph g = load_graph(graph_path);
  const gd::Rule rule = gd::rule_for(g);
  print_warnings(rule.warnings);
  gd::KetMap raw = gd::compute_state(g, rule);
  if (raw.empty()) throw std::runtime_error("conditioned state is empty");
  const gd::KetMap normalized = gd::normalize(raw);
  const TermList terms = sorted_terms(normalized);

  json out;
  std::ostringstream text;
  state_listing(text, terms);

  if (!target_path.empty()) {
    const gd::Target target = gd::target_from_json(read_file(target_path), g);
    const gd::LossModel model(g, target);
    const double loss = model.loss(model.pack(gd::edge_weights(g)));
    const std::string name = model.loss_name();
    out["loss_name"] = name;
    out["loss"] = loss;
    char line[128];
    if (name == "fidelity") {
      out["fidelity"] = 1.0 - loss;
      std::snprintf(line, sizeof(line), "fidelity: %.6f\n", 1.0 - loss);
    } else if (name == "count_rate") {
      out["count_rate"] = 1.0 - loss;
      std::snprintf(line, sizeof(line), "count rate: %.6f\n", 1.0 - loss);
    } else {
      out["floor"] = model.success_floor();
      std::snprintf(line, sizeof(line), "purity sum: %.6f (floor %.6f)\n", loss,
                    model.success_floor());
    }
    text << line << "loss: " << std::setprecision(12) << loss << " (" << name << ")\n";
  }

  for (const auto& m : metrics) {
    if (m == "srv") {
      const std::vector<int> ranks = gd::srv(normalized, g);
      std::string s = "(";
      for (size_t i = 0; i < ranks.size(); ++i)
        s += (i ? "," : "") + std::to_string(ranks[i]);
      s += ")";
      out["srv"] = ranks;
      text << "SRV: " << s << "\n";
    } else if (m == "purity") {
      std::vector<int> logical;
      for (const auto& v : g.vertices)
        if (v.role == gd::Role::detector) logical.push_back(v.id);
      const auto parts = gd::bipartitions(logical, k);
      const double val = gd::purity_sum_loss(normalized, parts);
      const double floor = gd::purity_lower_bound(g, parts);
      out["purity_sum"] = val;
      out["purity_floor"] = floor;
      out["purity_k"] = k;
      char line[96];
      std::snprintf(line, sizeof(line), "purity sum (k=%d): %.6f (floor %.6f)\n", k, val, floor);
      text << line;
    } else {  // entropy
      json arr = json::array();
      for (const auto& v : g.vertices) {
        if (v.role != gd::Role::detector) continue;
        const gd::DensityMatrix dm = gd::reduced_density(normalized, {v.id});
        const double s = gd::renyi_entropy(dm.rho, alpha);
        arr.push_back({{"vertex", v.id}, {"alpha", alpha}, {"value", s}});
        char line[96];
        std::snprintf(line, sizeof(line), "entropy(vertex %d, alpha=%g): %.6f\n", v.id, alpha, s);
        text << line;
      }
      out["entropy"] = arr;
    }
  }

  if (as_json) {
    out["state"] = state_json(terms);
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << text.str();
  }
  return 0;
}

int run_render(const std::string& graph_path, const std::string& out_path) {
  const gd::Graph g = load_graph(graph_path);
  const std::string dot = gd::render_dot(g);
  if (out_path.empty()) {
    std::cout << dot;
  } else {
    write_file(out_path, dot);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int run_oracle_check(const std::string& graph_path, int order, double tol) {
  const gd::Graph g = load_graph(graph_path);
  gd::Rule rule = gd::rule_for(g);
  print_warnings(rule.warnings);
  if (order >= 0) rule.pair_count = order;
  if (rule.pair_count < 1 || rule.pair_count > 5)
    throw std::runtime_error("emission order " + std::to_string(rule.pair_count) +
                             " outside the supported range 1..5");
  const gd::OracleComparison cmp = gd::oracle_compare(g, rule, tol);
  std::printf("max diff %.3e\n", cmp.max_abs_diff);
  if (!cmp.ok) {
    std::cerr << cmp.summary << "\n";
    std::cerr << "worst ket: " << gd::ket_to_string(cmp.worst) << "\n";
    return 3;
  }
  return 0;
}

int run_verify_minimal(const std::string& config_path, const std::string& graph_path,
                       bool seed_given, std::uint64_t seed) {
  const std::string text = read_file(config_path);
  const std::string base = std::filesystem::path(config_path).parent_path().string();
  gd::InstructionSet iset = gd::parse_instruction_set(text, base);
  if (seed_given) iset.optimizer.seed = seed;
  const gd::Graph g = load_graph(graph_path);
  std::vector<gd::Edge> failures;
  if (gd::verify_minimal(g, iset.target, iset.optimizer, &failures)) {
    std::cout << "locally minimal: every single-edge deletion pushes the loss above the threshold\n";
    return 0;
  }
  for (const auto& e : failures)
    std::printf("removable: (%d, %d, %d, %d)\n", e.u, e.v, e.cu, e.cv);
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discover, evaluate and draw pair-source experiment graphs."};
  app.require_subcommand(1);
  app.footer(
      "Exit codes:\n"
      "  0  success\n"
      "  1  usage or configuration error\n"
      "  2  discovery finished without reaching the loss threshold (artifacts still written)\n"
      "  3  verification failure (engine/reference disagreement, or a removable edge)");

  std::string config_path, graph_path, target_path, out_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int restarts = 0, threads = 0, order = -1, k = 1;
  double tol = 1e-10, alpha = 1.0;
  std::vector<std::string> metrics;
  bool as_json = false;

  CLI::App* disc = app.add_subcommand("discover", "Run topology discovery from an instruction set");
  disc->add_option("config", config_path, "Instruction-set JSON file")->required();
  CLI::Option* seed_opt =
      disc->add_option("--seed", seed, "Master seed (overrides the config; GRAPHDISC_SEED is the fallback)");
  CLI::Option* restarts_opt = disc->add_option("--restarts", restarts, "Restart count override");
  CLI::Option* threads_opt = disc->add_option("--threads", threads, "Worker threads for the restart phase");
  disc->add_option("--out", out_dir, "Artifact directory")->capture_default_str();

  CLI::App* eval = app.add_subcommand("evaluate", "Print the conditioned output state and metrics");
  eval->add_option("graph", graph_path, "Graph JSON file (or a discovery result)")->required();
  eval->add_option("--target", target_path, "Target JSON file; prints the loss against it");
  eval->add_option("--metric", metrics, "Extra metrics")
      ->check(CLI::IsMember({"srv", "purity", "entropy"}));
  eval->add_option("--alpha", alpha, "Entropy order (1 = von Neumann)")->capture_default_str();
  eval->add_option("--k", k, "Bipartition size cap for --metric purity")->capture_default_str();
  eval->add_flag("--json", as_json, "Machine-readable output");

  CLI::App* rend = app.add_subcommand("render", "Emit a Graphviz drawing of a graph");
  rend->add_option("graph", graph_path, "Graph JSON file (or a discovery result)")->required();
  rend->add_option("--out", out_path, "Output file (default: stdout)");

  CLI::App* oracle = app.add_subcommand("oracle-check",
                                        "Cross-check the state engine against the reference expansion");
  oracle->add_option("graph", graph_path, "Graph JSON file (or a discovery result)")->required();
  oracle->add_option("--order", order, "Pair-emission order (default: the graph's own rule)");
  oracle->add_option("--tol", tol, "Comparison tolerance")->capture_default_str();

  CLI::App* verify = app.add_subcommand("verify-minimal",
                                        "Check that no single edge of a solution can be removed");
  verify->add_option("config", config_path, "Instruction-set JSON file (target and optimizer settings)")
      ->required();
  verify->add_option("graph", graph_path, "Graph JSON file (or a discovery result)")->required();
  CLI::Option* verify_seed_opt = verify->add_option("--seed", seed, "Master seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*disc)
      return run_discover(config_path, out_dir, seed_opt->count() > 0, seed,
                          restarts_opt->count() > 0, restarts, threads_opt->count() > 0, threads);
    if (*eval) return run_evaluate(graph_path, target_path, metrics, alpha, k, as_json);
    if (*rend) return run_render(graph_path, out_path);
    if (*oracle) return run_oracle_check(graph_path, order, tol);
    if (*verify)
      return run_verify_minimal(config_path, graph_path, verify_seed_opt->count() > 0, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
