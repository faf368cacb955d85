#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "graphdisc/objectives.hpp"

namespace graphdisc {

// Knobs for the continuous phase and the discovery loop. Defaults follow the
// documented conventions: weights live in a [-bound, bound] box per packed
// component, restarts draw starting points from derived seeds, and an edge is
// worth keeping only if the re-optimized loss stays within `loss_threshold`
// of the attainable floor.
struct OptimizerConfig {
  int restarts = 10;
  int max_iters = 2000;
  double loss_threshold = 1e-3;
  double weight_bound = 1.0;
  double init_range = 0.3;
  double grad_tol = 1e-7;
  // Edges below this magnitude are dropped in one batch before single-edge
  // removals begin.
  double batch_drop = 0.01;
  std::string removal_order = "ascending";  // "ascending" | "random"
  bool asymptotic = false;
  int threads = 1;
  std::uint64_t seed = 0;
};

// One continuous descent. `converged` distinguishes the gradient tolerance
// from the iteration cap.
struct OptimizeOutcome {
  Eigen::VectorXd x;
  double loss = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

struct RemovalRecord {
  Edge edge;
  bool accepted = false;
};

struct DiscoveryResult {
  Graph graph;  // final topology, weights installed
  double loss = std::numeric_limits<double>::infinity();
  bool success = false;
  int restart = -1;          // restart index the result came from
  std::uint64_t seed = 0;    // master seed
  double init_range = 0.3;   // recorded so results are self-describing
  std::vector<RemovalRecord> removals;
  std::vector<double> loss_trace;  // loss after each accepted continuous phase
  bool asymptotic = false;
  // Fidelity of the final weights with the tunable (small) edges rescaled to
  // magnitude 0.1 and 0.01. NaN unless the asymptotic flag is set.
  double fidelity_at_01 = std::numeric_limits<double>::quiet_NaN();
  double fidelity_at_001 = std::numeric_limits<double>::quiet_NaN();
};

// Deterministic 64-bit stream; also used to derive independent sub-seeds.
std::uint64_t splitmix64_next(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

// Starting point for one restart: magnitudes uniform in [0, range] with
// uniform sign (real domain) or uniform phase (complex domain).
Eigen::VectorXd random_parameters(const LossModel& model, double range, std::uint64_t seed);

// Projected quasi-Newton descent from x0. Deterministic; stays inside the
// per-component box [-cfg.weight_bound, cfg.weight_bound].
OptimizeOutcome optimize_from(const LossModel& model, Eigen::VectorXd x0,
                              const OptimizerConfig& cfg);

// Best of cfg.restarts descents from seeded starting points. The winner is
// the lowest loss, ties broken by restart index.
OptimizeOutcome optimize_weights(const Graph& g, const Target& target, const OptimizerConfig& cfg);

// Loss of `x` with every tunable weight (|w| <= bound/2) rescaled so the
// largest tunable magnitude equals `scale`. Identity when nothing is tunable.
double loss_at_scale(const LossModel& model, const Eigen::VectorXd& x, double scale,
                     double weight_bound);

// Whether a loss value counts as success for this model under cfg (asymptotic
// flag applies the 0.01-scale criterion to the candidate weights).
bool meets_threshold(const LossModel& model, const Eigen::VectorXd& x, double loss,
                     const OptimizerConfig& cfg);

// Alternates single-edge deletion with re-optimization until no edge can be
// removed without pushing the loss above the threshold. `g` must arrive with
// weights already meeting the threshold. Fresh restarts inside the prune draw
// seeds derived from cfg.seed and the phase counter, so the whole chain is
// deterministic.
DiscoveryResult prune(const Graph& g, const Target& target, const OptimizerConfig& cfg);

// Full discovery: optimize every restart, prune the lowest-index success.
// Returns a failure result carrying the best loss when nothing succeeds.
// Deterministic for a fixed cfg.seed regardless of cfg.threads.
DiscoveryResult discover_run(const Graph& initial, const Target& target,
                             const OptimizerConfig& cfg);

// Local-minimality certificate: re-attempts every single-edge deletion with
// fresh 3-restart optimization. `failures` collects edges whose removal still
// met the threshold (empty means the graph is locally minimal).
bool verify_minimal(const Graph& g, const Target& target, const OptimizerConfig& cfg,
                    std::vector<Edge>* failures = nullptr);

std::string discovery_result_to_json(const DiscoveryResult& r);

}  // namespace graphdisc
