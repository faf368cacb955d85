#pragma once

#include <map>
#include <string>
#include <vector>

#include "graphdisc/enumeration.hpp"
#include "graphdisc/graph.hpp"
#include "graphdisc/state.hpp"

namespace graphdisc {

// Dense reference expansion, kept deliberately separate from the engine: it
// never looks at edge selections. Occupations are flattened (vertex, color)
// photon counts; coefficients are those of normalized number states.
struct PolyState {
  std::vector<int> slot_offset;  // per vertex, prefix sum of dims
  std::map<std::vector<int>, cplx> coeff;
};

// Coefficients of the order-m term of the pair-source generating function
// applied to vacuum: (1/m!) (sum_e w_e a'[u,cu] a'[v,cv])^m |vac>, applying
// creation operators one at a time (a'|n> = sqrt(n+1)|n+1>).
PolyState oracle_expand(const Graph& g, int order);

// Keeps occupations that satisfy the rule (degree-one vertices hold exactly
// one photon; postselect pins every vertex) and converts them to kets.
KetMap oracle_condition(const PolyState& p, const Graph& g, const Rule& r);

struct OracleComparison {
  bool ok = true;
  double max_abs_diff = 0.0;
  Ket worst;            // ket with the largest deviation
  std::string summary;  // human-readable verdict
};

// Engine-vs-oracle check at the rule's own order, amplitude by amplitude.
OracleComparison oracle_compare(const Graph& g, const Rule& r, double tol);
OracleComparison compare_states(const KetMap& oracle_state, const KetMap& engine_state,
                                double tol);

}  // namespace graphdisc
