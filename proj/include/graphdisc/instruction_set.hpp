#pragma once

#include <string>
#include <utility>
#include <vector>

#include "graphdisc/objectives.hpp"
#include "graphdisc/optimizer.hpp"

namespace graphdisc {

// Which artifacts a discovery run writes next to its result.
struct EmitOptions {
  bool result = true;
  bool dot = true;
  bool state = true;
};

// A fully validated experiment description: the declared resources (vertices,
// conditioning mode, weight domain), the topological constraints, the target,
// and the optimizer settings.
struct InstructionSet {
  Graph skeleton;  // vertices / mode / domain / photon counts; no edges
  // Constraint entries of length 2 ([u, v]: every color pair on that vertex
  // pair) or length 4 ([u, v, cu, cv]: one colored edge), kept normalized and
  // sorted for deterministic re-serialization.
  std::vector<std::vector<int>> forbidden_edges;
  Target target;
  OptimizerConfig optimizer;
  EmitOptions emit;
};

// Strict parse: unknown keys, missing required fields, range violations, and
// cross-field inconsistencies all raise parse_error naming the offending
// path. `base_dir` resolves a relative "target_path" reference.
InstructionSet parse_instruction_set(const std::string& text, const std::string& base_dir = "");

// Normalized re-serialization (defaults materialized, gate sugar expanded).
// parse . emit is idempotent.
std::string instruction_set_to_json(const InstructionSet& iset);

// The dense starting graph: every canonical colored edge over the declared
// vertices, minus input-input pairs, environment self-loops, and the
// forbidden list. Self-loops appear only in fock mode. Weights start at zero;
// the optimizer owns their initialization.
Graph build_initial_graph(const InstructionSet& iset);

// Expands a gate truth table into the pure state sum_rows |in>|out> / sqrt(rows)
// over input-role and detector-role vertices (dim-1 ancillas auto-filled).
// Rows must have distinct input kets; listing fewer rows restricts the gate
// to a reduced input space.
Target encode_gate_target(const std::vector<std::pair<std::vector<int>, std::vector<int>>>& mapping,
                          const Graph& skeleton, const std::string& loss_name);

// build_initial_graph + the full restart/prune loop.
DiscoveryResult discover(const InstructionSet& iset);

}  // namespace graphdisc
