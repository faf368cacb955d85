#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "graphdisc/enumeration.hpp"
#include "graphdisc/graph.hpp"

namespace graphdisc {

// Photon occupation of every vertex: occ[v] lists (color, count) sorted by
// color with count >= 1; an empty list is a vacant vertex. A vertex holding a
// single photon has exactly {(c, 1)}.
struct Ket {
  std::vector<std::vector<std::pair<int, int>>> occ;

  bool operator==(const Ket&) const = default;
  bool operator<(const Ket& o) const { return occ < o.occ; }

  int vertex_count() const { return static_cast<int>(occ.size()); }
  int photons_at(int v) const;
  // True when every vertex holds exactly one photon.
  bool single_occupancy() const;
  // The color at vertex v, requiring single occupancy there.
  int color_at(int v) const;
};

// Deterministically ordered sparse state. Iteration order is the basis order:
// lexicographic on (vertex id, occupation record).
using KetMap = std::map<Ket, cplx>;

Ket ket_of(const Graph& g, const Selection& s);

// prod_e w_e^{m_e} / m_e!  x  prod_{(v,color)} sqrt(n!)
cplx selection_amplitude(const Graph& g, const Selection& s);

// Sums selection amplitudes per ket, then drops entries with |amp| below
// 1e-14 times the largest magnitude.
KetMap compute_state(const Graph& g, const Rule& r);

// Unit norm with the largest-magnitude amplitude made real positive (first
// ket in basis order on ties). Only this function touches global phase.
KetMap normalize(KetMap state);

double norm_squared(const KetMap& state);
cplx inner_product(const KetMap& bra, const KetMap& ket);

// Weight-independent expansion of a graph topology: every reachable ket and
// every selection as (ket index, combinatorial factor, edge powers). Lets
// amplitudes be re-evaluated as polynomials while weights move.
struct CompiledTerm {
  int ket = 0;
  double factor = 1.0;                        // 1/prod(m_e!) x prod sqrt(n!)
  std::vector<std::pair<int, int>> powers;    // (edge index, multiplicity)
};

struct CompiledState {
  std::vector<Ket> kets;  // basis order
  std::vector<CompiledTerm> terms;
  int env_vertex = -1;
  // With an environment vertex: kets grouped for tracing. reduced_index[k]
  // indexes the ket with the environment slot removed, env_group[k] the
  // environment color. Without one both stay empty.
  std::vector<Ket> reduced_kets;
  std::vector<int> reduced_index;
  std::vector<int> env_group;
  int env_dim = 0;
};

CompiledState compile_state(const Graph& g, const Rule& r);

Eigen::VectorXcd amplitudes(const CompiledState& cs, const Eigen::VectorXcd& weights);
Eigen::VectorXcd edge_weights(const Graph& g);

// d(amplitude k) / d(weight e), complex derivatives. Row k, column e.
Eigen::MatrixXcd amplitude_jacobian(const CompiledState& cs, const Eigen::VectorXcd& weights);

// Hermitian operator on an explicit ket basis.
struct DensityMatrix {
  std::vector<Ket> basis;
  Eigen::MatrixXcd rho;
};

// Groups amplitudes by environment color: rho = sum_k |psi_k><psi_k| over the
// basis with the environment slot removed. Unnormalized, like the state.
// Requires an environment vertex and rejects fock mode.
DensityMatrix trace_environment(const Graph& g, const KetMap& state);

DensityMatrix normalize_trace(DensityMatrix dm);

// Rendering of one ket as |a,b,...>: color for single photons, _ for vacant,
// (c:n) for multiple photons.
std::string ket_to_string(const Ket& k);

std::string state_to_json(const KetMap& state);
KetMap state_from_json(const std::string& text);

}  // namespace graphdisc
