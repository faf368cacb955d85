#include "graphdisc/instruction_set.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "graphdisc/enumeration.hpp"
#include "graphdisc/json_detail.hpp"

namespace graphdisc {

namespace {

using nlohmann::json;
using detail::check_keys;

json parse_text(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw parse_error(std::string(what) + ": parse failure at byte " + std::to_string(e.byte) +
                      ": " + e.what());
  }
}

int get_int(const json& obj, const char* key, const char* where, long long lo, long long hi) {
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    throw parse_error(std::string(where) + "." + key + ": expected an integer");
  const long long x = v.get<long long>();
  if (x < lo || x > hi)
    throw parse_error(std::string(where) + "." + key + ": " + std::to_string(x) +
                      " is out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(x);
}

double get_positive(const json& obj, const char* key, const char* where) {
  const json& v = obj.at(key);
  if (!v.is_number())
    throw parse_error(std::string(where) + "." + key + ": expected a number");
  const double x = v.get<double>();
  if (!(x > 0.0)) throw parse_error(std::string(where) + "." + key + ": must be positive");
  return x;
}

bool get_bool(const json& obj, const char* key, const char* where) {
  const json& v = obj.at(key);
  if (!v.is_boolean())
    throw parse_error(std::string(where) + "." + key + ": expected a boolean");
  return v.get<bool>();
}

std::string get_string(const json& obj, const char* key, const char* where) {
  const json& v = obj.at(key);
  if (!v.is_string())
    throw parse_error(std::string(where) + "." + key + ": expected a string");
  return v.get<std::string>();
}

void parse_vertices(const json& arr, Graph& g) {
  if (!arr.is_array() || arr.empty())
    throw parse_error("config.vertices: expected a non-empty array");
  int id = 0;
  for (const json& vj : arr) {
    check_keys(vj, {"role", "dim"}, "config.vertices entry");
    if (!vj.contains("role") || !vj.contains("dim"))
      throw parse_error("config.vertices entry: 'role' and 'dim' are both required");
    Vertex v;
    v.id = id++;
    v.role = role_from_string(get_string(vj, "role", "config.vertices entry"));
    v.dim = get_int(vj, "dim", "config.vertices entry", 1, 64);
    g.vertices.push_back(v);
  }
}

std::vector<std::vector<int>> parse_forbidden(const json& arr, const Graph& g) {
  if (!arr.is_array()) throw parse_error("config.forbidden_edges: expected an array");
  const int n = g.vertex_count();
  std::vector<std::vector<int>> out;
  for (const json& ej : arr) {
    if (!ej.is_array() || (ej.size() != 2 && ej.size() != 4))
      throw parse_error("config.forbidden_edges entry: expected [u, v] or [u, v, cu, cv]");
    std::vector<int> e;
    for (const json& x : ej) {
      if (!x.is_number_integer())
        throw parse_error("config.forbidden_edges entry: expected integers");
      e.push_back(x.get<int>());
    }
    if (e[0] < 0 || e[0] >= n || e[1] < 0 || e[1] >= n)
      throw parse_error("config.forbidden_edges entry (" + std::to_string(e[0]) + ", " +
                        std::to_string(e[1]) + "): vertex out of range for " + std::to_string(n) +
                        " vertices");
    if (e.size() == 2) {
      if (e[0] > e[1]) std::swap(e[0], e[1]);
    } else {
      const Edge c = canonical_edge(e[0], e[1], e[2], e[3], {0.0, 0.0});
      if (c.cu < 0 || c.cu >= g.dim(c.u) || c.cv < 0 || c.cv >= g.dim(c.v))
        throw parse_error("config.forbidden_edges entry (" + std::to_string(e[0]) + ", " +
                          std::to_string(e[1]) + ", " + std::to_string(e[2]) + ", " +
                          std::to_string(e[3]) + "): color out of range");
      e = {c.u, c.v, c.cu, c.cv};
    }
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

OptimizerConfig parse_optimizer(const json& oj) {
  check_keys(oj,
             {"restarts", "max_iters", "loss_threshold", "weight_bound", "init_range", "grad_tol",
              "batch_drop", "removal_order", "asymptotic", "threads", "seed"},
             "config.optimizer");
  OptimizerConfig cfg;
  if (oj.contains("restarts")) cfg.restarts = get_int(oj, "restarts", "config.optimizer", 1, 100000);
  if (oj.contains("max_iters")) cfg.max_iters = get_int(oj, "max_iters", "config.optimizer", 1, 100000000);
  if (oj.contains("loss_threshold"))
    cfg.loss_threshold = get_positive(oj, "loss_threshold", "config.optimizer");
  if (oj.contains("weight_bound"))
    cfg.weight_bound = get_positive(oj, "weight_bound", "config.optimizer");
  if (oj.contains("init_range")) cfg.init_range = get_positive(oj, "init_range", "config.optimizer");
  if (oj.contains("grad_tol")) cfg.grad_tol = get_positive(oj, "grad_tol", "config.optimizer");
  if (oj.contains("batch_drop")) {
    const json& v = oj.at("batch_drop");
    if (!v.is_number() || v.get<double>() < 0.0)
      throw parse_error("config.optimizer.batch_drop: expected a non-negative number");
    cfg.batch_drop = v.get<double>();
  }
  if (oj.contains("removal_order")) {
    cfg.removal_order = get_string(oj, "removal_order", "config.optimizer");
    if (cfg.removal_order != "ascending" && cfg.removal_order != "random")
      throw parse_error("config.optimizer.removal_order: expected 'ascending' or 'random'");
  }
  if (oj.contains("asymptotic")) cfg.asymptotic = get_bool(oj, "asymptotic", "config.optimizer");
  if (oj.contains("threads")) cfg.threads = get_int(oj, "threads", "config.optimizer", 1, 4096);
  if (oj.contains("seed")) {
    const json& v = oj.at("seed");
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
      throw parse_error("config.optimizer.seed: expected a non-negative integer");
    cfg.seed = v.get<std::uint64_t>();
  }
  return cfg;
}

Target parse_target_spec(const json& tj, const Graph& skeleton) {
  if (!tj.is_object()) throw parse_error("config.target: expected an object");
  if (tj.contains("kind") && tj.at("kind").is_string() &&
      tj.at("kind").get<std::string>() == "gate") {
    check_keys(tj, {"kind", "mapping", "loss"}, "gate target");
    if (!tj.contains("mapping") || !tj.at("mapping").is_array() || tj.at("mapping").empty())
      throw parse_error("gate target: 'mapping' must be a non-empty array of [in, out] rows");
    std::vector<std::pair<std::vector<int>, std::vector<int>>> mapping;
    for (const json& row : tj.at("mapping")) {
      if (!row.is_array() || row.size() != 2 || !row[0].is_array() || !row[1].is_array())
        throw parse_error("gate target: each mapping row must be [in-ket, out-ket]");
      std::pair<std::vector<int>, std::vector<int>> entry;
      for (const json& x : row[0]) {
        if (!x.is_number_integer()) throw parse_error("gate target: in-ket entries must be integers");
        entry.first.push_back(x.get<int>());
      }
      for (const json& x : row[1]) {
        if (!x.is_number_integer()) throw parse_error("gate target: out-ket entries must be integers");
        entry.second.push_back(x.get<int>());
      }
      mapping.push_back(std::move(entry));
    }
    std::string loss;
    if (tj.contains("loss")) loss = get_string(tj, "loss", "gate target");
    return encode_gate_target(mapping, skeleton, loss);
  }
  return target_from_json(tj.dump(), skeleton);
}

}  // namespace

InstructionSet parse_instruction_set(const std::string& text, const std::string& base_dir) {
  const json j = parse_text(text, "config");
  check_keys(j,
             {"vertices", "mode", "total_photons", "pair_count", "weight_domain",
              "forbidden_edges", "target", "target_path", "optimizer", "emit"},
             "config");

  InstructionSet iset;
  Graph& g = iset.skeleton;
  if (!j.contains("vertices")) throw parse_error("config: 'vertices' is required");
  parse_vertices(j.at("vertices"), g);
  if (!j.contains("mode")) throw parse_error("config: 'mode' is required");
  g.mode = mode_from_string(get_string(j, "mode", "config"));
  if (!j.contains("weight_domain")) throw parse_error("config: 'weight_domain' is required");
  g.domain = domain_from_string(get_string(j, "weight_domain", "config"));

  if (j.contains("total_photons")) {
    if (g.mode != Mode::fock)
      throw parse_error("config.total_photons: only meaningful in fock mode");
    g.total_photons = get_int(j, "total_photons", "config", 2, 64);
  }
  if (j.contains("pair_count")) {
    if (g.mode != Mode::heralded)
      throw parse_error("config.pair_count: only meaningful in heralded mode");
    g.pair_count = get_int(j, "pair_count", "config", 1, 32);
  }

  {
    const ValidationReport rep = validate(g);
    if (!rep.ok) {
      std::string msg = "config: invalid resource declaration";
      for (const std::string& e : rep.problems) msg += "; " + e;
      throw parse_error(msg);
    }
  }

  if (j.contains("forbidden_edges")) iset.forbidden_edges = parse_forbidden(j.at("forbidden_edges"), g);

  const bool inline_target = j.contains("target");
  const bool path_target = j.contains("target_path");
  if (inline_target == path_target)
    throw parse_error("config: exactly one of 'target' or 'target_path' is required");
  if (path_target) {
    std::string path = get_string(j, "target_path", "config");
    if (!base_dir.empty() && !path.empty() && path.front() != '/') path = base_dir + "/" + path;
    std::ifstream in(path);
    if (!in) throw parse_error("config.target_path: cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    iset.target = parse_target_spec(parse_text(buf.str(), "config.target_path file"), g);
  } else {
    iset.target = parse_target_spec(j.at("target"), g);
  }

  if (j.contains("optimizer")) iset.optimizer = parse_optimizer(j.at("optimizer"));
  if (iset.optimizer.asymptotic && iset.target.loss_name != "fidelity")
    throw parse_error("config.optimizer.asymptotic: requires the fidelity loss");

  if (j.contains("emit")) {
    const json& ej = j.at("emit");
    check_keys(ej, {"result", "dot", "state"}, "config.emit");
    if (ej.contains("result")) iset.emit.result = get_bool(ej, "result", "config.emit");
    if (ej.contains("dot")) iset.emit.dot = get_bool(ej, "dot", "config.emit");
    if (ej.contains("state")) iset.emit.state = get_bool(ej, "state", "config.emit");
  }
  return iset;
}

std::string instruction_set_to_json(const InstructionSet& iset) {
  const Graph& g = iset.skeleton;
  json j;
  json verts = json::array();
  for (const Vertex& v : g.vertices)
    verts.push_back({{"role", to_string(v.role)}, {"dim", v.dim}});
  j["vertices"] = std::move(verts);
  j["mode"] = to_string(g.mode);
  j["weight_domain"] = to_string(g.domain);
  if (g.mode == Mode::fock) j["total_photons"] = g.total_photons;
  if (g.mode == Mode::heralded && g.pair_count > 0) j["pair_count"] = g.pair_count;
  if (!iset.forbidden_edges.empty()) j["forbidden_edges"] = iset.forbidden_edges;
  j["target"] = json::parse(target_to_json(iset.target));
  const OptimizerConfig& c = iset.optimizer;
  j["optimizer"] = {{"restarts", c.restarts},
                    {"max_iters", c.max_iters},
                    {"loss_threshold", c.loss_threshold},
                    {"weight_bound", c.weight_bound},
                    {"init_range", c.init_range},
                    {"grad_tol", c.grad_tol},
                    {"batch_drop", c.batch_drop},
                    {"removal_order", c.removal_order},
                    {"asymptotic", c.asymptotic},
                    {"threads", c.threads},
                    {"seed", c.seed}};
  j["emit"] = {{"result", iset.emit.result}, {"dot", iset.emit.dot}, {"state", iset.emit.state}};
  return j.dump(2) + "\n";
}

Graph build_initial_graph(const InstructionSet& iset) {
  Graph g = iset.skeleton;
  g.edges.clear();

  std::set<std::pair<int, int>> banned_pairs;
  std::set<std::tuple<int, int, int, int>> banned_edges;
  for (const std::vector<int>& f : iset.forbidden_edges) {
    if (f.size() == 2)
      banned_pairs.insert({f[0], f[1]});
    else
      banned_edges.insert({f[0], f[1], f[2], f[3]});
  }

  const int n = g.vertex_count();
  for (int u = 0; u < n; ++u) {
    for (int v = u; v < n; ++v) {
      if (g.role(u) == Role::input && g.role(v) == Role::input) continue;
      if (u == v) {
        if (g.mode != Mode::fock) continue;
        if (g.role(u) == Role::environment || g.role(u) == Role::input) continue;
      }
      if (banned_pairs.count({u, v})) continue;
      const int cu_hi = g.dim(u);
      const int cv_hi = g.dim(v);
      for (int cu = 0; cu < cu_hi; ++cu) {
        for (int cv = (u == v ? cu : 0); cv < cv_hi; ++cv) {
          if (banned_edges.count({u, v, cu, cv})) continue;
          g.edges.push_back(canonical_edge(u, v, cu, cv, {0.0, 0.0}));
        }
      }
    }
  }
  canonicalize(g);
  return g;
}

Target encode_gate_target(
    const std::vector<std::pair<std::vector<int>, std::vector<int>>>& mapping,
    const Graph& skeleton, const std::string& loss_name) {
  if (mapping.empty()) throw parse_error("gate target: empty mapping");
  std::vector<int> inputs, outputs, fillers;
  for (const Vertex& v : skeleton.vertices) {
    switch (v.role) {
      case Role::input:
        inputs.push_back(v.id);
        break;
      case Role::detector:
        outputs.push_back(v.id);
        break;
      case Role::ancilla:
        if (v.dim != 1)
          throw parse_error("gate target: ancilla vertices must have dim 1 (vertex " +
                            std::to_string(v.id) + " cannot be auto-filled)");
        fillers.push_back(v.id);
        break;
      case Role::environment:
        throw parse_error("gate target: not available on graphs with an environment vertex");
    }
  }
  if (inputs.empty()) throw parse_error("gate target: the graph declares no input vertices");
  if (outputs.empty()) throw parse_error("gate target: the graph declares no detector vertices");

  std::set<std::vector<int>> seen_in;
  Target t;
  t.kind = Target::Kind::pure_state;
  t.loss_name = loss_name.empty() ? "fidelity" : loss_name;
  if (t.loss_name != "fidelity" && t.loss_name != "count_rate")
    throw parse_error("gate target: loss must be 'fidelity' or 'count_rate'");

  const double amp = 1.0 / std::sqrt(static_cast<double>(mapping.size()));
  for (const auto& [in, out] : mapping) {
    if (in.size() != inputs.size())
      throw parse_error("gate target: in-ket length " + std::to_string(in.size()) +
                        " does not match the " + std::to_string(inputs.size()) +
                        " input vertices");
    if (out.size() != outputs.size())
      throw parse_error("gate target: out-ket length " + std::to_string(out.size()) +
                        " does not match the " + std::to_string(outputs.size()) +
                        " detector vertices");
    if (!seen_in.insert(in).second)
      throw parse_error("gate target: repeated in-ket (rows must be orthonormal)");
    Ket k;
    k.occ.resize(static_cast<size_t>(skeleton.vertex_count()));
    for (size_t i = 0; i < inputs.size(); ++i) {
      const int color = in[i];
      if (color < 0 || color >= skeleton.dim(inputs[i]))
        throw parse_error("gate target: in-ket color " + std::to_string(color) +
                          " out of range for vertex " + std::to_string(inputs[i]));
      k.occ[static_cast<size_t>(inputs[i])] = {{color, 1}};
    }
    for (size_t i = 0; i < outputs.size(); ++i) {
      const int color = out[i];
      if (color < 0 || color >= skeleton.dim(outputs[i]))
        throw parse_error("gate target: out-ket color " + std::to_string(color) +
                          " out of range for vertex " + std::to_string(outputs[i]));
      k.occ[static_cast<size_t>(outputs[i])] = {{color, 1}};
    }
    for (int vid : fillers) k.occ[static_cast<size_t>(vid)] = {{0, 1}};
    t.terms[k] = amp;
  }
  return t;
}

DiscoveryResult discover(const InstructionSet& iset) {
  return discover_run(build_initial_graph(iset), iset.target, iset.optimizer);
}

}  // namespace graphdisc
