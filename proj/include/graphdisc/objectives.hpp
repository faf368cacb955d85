#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "graphdisc/state.hpp"

namespace graphdisc {

// F = |<target|state>|^2 / <state|state>. The target must be normalized; the
// state is normalized internally. Throws on a zero state.
double fidelity_pure(const KetMap& state, const KetMap& target);

// Unnormalized squared overlap |<target|state>|^2. Unlike fidelity it decays
// when all weights shrink, so it penalizes asymptotic solutions.
double count_rate(const KetMap& state, const KetMap& target);

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 between trace-1 PSD
// matrices. The DensityMatrix overload aligns the two bases first.
double fidelity_mixed(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& sigma);
double fidelity_mixed(const DensityMatrix& rho, const DensityMatrix& target);

// Partial trace onto `subsystem` (vertex ids). The state must be normalized
// and every ket single-occupation; the result has unit trace and its basis
// kets keep only the subsystem slots, in ascending vertex order.
DensityMatrix reduced_density(const KetMap& state, const std::vector<int>& subsystem);

// All subsets of `vertices` of sizes 1..k, one representative per
// {A, complement} pair: when a subset is exactly half the vertices, only the
// one containing the lowest vertex is kept. Ordered by size, then
// lexicographically.
std::vector<std::vector<int>> bipartitions(const std::vector<int>& vertices, int k);

// sum_A Tr(rho_A^2). Lower is more entangled.
double purity_sum_loss(const KetMap& state, const std::vector<std::vector<int>>& partitions);

// sum_A 1/min(D_A, D_rest): the purity sum when every counted marginal is
// maximally mixed. D_rest multiplies the dims of all non-environment vertices
// outside A.
double purity_lower_bound(const Graph& g, const std::vector<std::vector<int>>& partitions);

// Rank of the reduced density matrix at each detector vertex (eigenvalue
// threshold 1e-8 relative to the largest), sorted descending.
std::vector<int> srv(const KetMap& state, const Graph& g);

// S_a = log(Tr rho^a)/(1-a) and T_a = (Tr rho^a - 1)/(1-a); both fall back to
// the von Neumann entropy for |a-1| < 1e-6. a <= 0 is rejected.
double renyi_entropy(const Eigen::MatrixXcd& rho, double alpha);
double tsallis_entropy(const Eigen::MatrixXcd& rho, double alpha);

struct Target {
  enum class Kind { pure_state, density_matrix, entanglement };

  Kind kind = Kind::pure_state;
  KetMap terms;           // pure_state: normalized coefficients
  DensityMatrix density;  // density_matrix: trace-1 PSD on an explicit basis
  int k = 1;              // entanglement: bipartition size cap
  bool k_all = false;
  std::string loss_name;  // fidelity | count_rate | purity_sum
};

// Default loss for a target kind: fidelity for states, purity_sum for
// entanglement.
std::string default_loss_name(Target::Kind kind);

// Parses {"kind": "pure_state", "terms": [{"ket": ..., "amp": [re, im]}, ...]}
// or {"kind": "density_matrix", "basis": [...], "matrix": [[[re, im], ...]]}
// or {"kind": "entanglement", "k": 2 | "all"}, each with an optional "loss".
// Validates against the graph: dimensions, vertex coverage (pure kets may omit
// dim-1 ancilla slots, which are filled with a color-0 photon), environment
// handling. Unknown keys are errors.
Target target_from_json(const std::string& text, const Graph& g);
std::string target_to_json(const Target& t);

// A loss bound to one graph topology, evaluated and differentiated at packed
// weight parameters: one real per edge in the real domain, [re, im] per edge
// in the complex domain. Losses: fidelity -> 1 - F, count_rate -> 1 - CR,
// purity_sum -> sum of marginal purities. Gradients are exact (Wirtinger
// calculus through the amplitude polynomials).
class LossModel {
 public:
  LossModel(const Graph& g, const Rule& r, const Target& t);
  LossModel(const Graph& g, const Target& t);

  const Graph& graph() const { return g_; }
  const Rule& rule() const { return rule_; }
  const CompiledState& compiled() const { return cs_; }
  const std::string& loss_name() const { return loss_name_; }
  bool complex_domain() const { return g_.domain == WeightDomain::complex_amps; }
  int edge_count() const { return g_.edge_count(); }
  int param_count() const { return edge_count() * (complex_domain() ? 2 : 1); }

  Eigen::VectorXd pack(const Eigen::VectorXcd& w) const;
  Eigen::VectorXcd unpack(const Eigen::VectorXd& x) const;

  double loss(const Eigen::VectorXd& x) const;
  double loss_and_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

  // Success means loss <= success_floor() + threshold: 0 for overlap losses,
  // the maximally-mixed marginal bound for entanglement.
  double success_floor() const { return floor_; }

 private:
  enum class LossKind { fid_pure, count_rate, purity, fid_mixed };
  struct Partition {
    int rows = 0;
    int cols = 0;
    std::vector<std::pair<int, int>> pos;  // compiled ket -> (row, col)
  };

  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;

  Graph g_;
  Rule rule_;
  CompiledState cs_;
  std::string loss_name_;
  LossKind kind_ = LossKind::fid_pure;
  Eigen::VectorXcd tvec_;  // pure target on the compiled basis
  std::vector<Partition> parts_;
  double floor_ = 0.0;
  // density targets, on the union of the traced and target bases
  Eigen::MatrixXcd sqrt_sigma_;
  std::vector<int> rho_index_;  // reduced ket -> union basis index
  int union_dim_ = 0;
};

// Gradient of the named loss at the graph's stored weights, in the packed
// layout above. Empty loss_name uses the target's own.
std::vector<double> loss_gradient(const Graph& g, const Rule& r, const Target& t,
                                  const std::string& loss_name);

}  // namespace graphdisc
