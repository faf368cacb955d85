#include "graphdisc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "graphdisc/enumeration.hpp"
#include "graphdisc/state.hpp"

namespace graphdisc {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

// Salt spaces for derived seeds: restarts use 1..R, prune phases and
// verify-minimal probes get their own disjoint ranges.
constexpr std::uint64_t kPruneSalt = std::uint64_t{1} << 32;
constexpr std::uint64_t kOrderSalt = std::uint64_t{2} << 32;
constexpr std::uint64_t kVerifySalt = std::uint64_t{3} << 32;

double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

void install_weights(Graph& g, const Eigen::VectorXcd& w) {
  for (int i = 0; i < static_cast<int>(g.edges.size()); ++i) g.edges[i].w = w(i);
}

using EdgeKey = std::tuple<int, int, int, int>;

EdgeKey key_of(const Edge& e) { return {e.u, e.v, e.cu, e.cv}; }

// Best of: descent from the stored weights plus two fresh seeded starts.
OptimizeOutcome reoptimize(const LossModel& model, const Eigen::VectorXd& warm,
                           const OptimizerConfig& cfg, std::uint64_t phase) {
  OptimizeOutcome best = optimize_from(model, warm, cfg);
  for (std::uint64_t j = 0; j < 2; ++j) {
    const std::uint64_t seed = derive_seed(cfg.seed, kPruneSalt + 2 * phase + j);
    OptimizeOutcome alt =
        optimize_from(model, random_parameters(model, cfg.init_range, seed), cfg);
    if (alt.loss < best.loss) best = alt;
  }
  return best;
}

// Untried edges in removal order: ascending |w| (ties by canonical key), or a
// seeded shuffle that is re-drawn for every pass.
std::vector<int> removal_candidates(const Graph& g, const std::set<EdgeKey>& tried,
                                    const OptimizerConfig& cfg, std::uint64_t pass) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(g.edges.size()); ++i)
    if (!tried.count(key_of(g.edges[i]))) idx.push_back(i);
  if (cfg.removal_order == "random") {
    std::uint64_t state = derive_seed(cfg.seed, kOrderSalt + pass);
    std::vector<std::uint64_t> rank(g.edges.size(), 0);
    for (int i = 0; i < static_cast<int>(g.edges.size()); ++i) rank[i] = splitmix64_next(state);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return rank[a] < rank[b]; });
  } else {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      const double ma = std::abs(g.edges[a].w), mb = std::abs(g.edges[b].w);
      if (ma != mb) return ma < mb;
      return key_of(g.edges[a]) < key_of(g.edges[b]);
    });
  }
  return idx;
}

Graph without_edges(const Graph& g, const std::vector<int>& drop) {
  Graph out = g;
  out.edges.clear();
  for (int i = 0; i < static_cast<int>(g.edges.size()); ++i)
    if (std::find(drop.begin(), drop.end(), i) == drop.end()) out.edges.push_back(g.edges[i]);
  return out;
}

void fill_asymptotic_report(DiscoveryResult& r, const LossModel& model, const Eigen::VectorXd& x,
                            const OptimizerConfig& cfg) {
  if (!cfg.asymptotic) return;
  r.asymptotic = true;
  r.fidelity_at_01 = 1.0 - loss_at_scale(model, x, 0.1, cfg.weight_bound);
  r.fidelity_at_001 = 1.0 - loss_at_scale(model, x, 0.01, cfg.weight_bound);
}

}  // namespace

std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t s = base ^ (salt * 0x9e3779b97f4a7c15ULL);
  return splitmix64_next(s);
}

Eigen::VectorXd random_parameters(const LossModel& model, double range, std::uint64_t seed) {
  std::uint64_t state = seed;
  const int edges = model.edge_count();
  Eigen::VectorXd x(model.param_count());
  for (int e = 0; e < edges; ++e) {
    const double mag = range * unit_double(splitmix64_next(state));
    if (model.complex_domain()) {
      const double phase = 2.0 * kPi * unit_double(splitmix64_next(state));
      x(2 * e) = mag * std::cos(phase);
      x(2 * e + 1) = mag * std::sin(phase);
    } else {
      const bool negative = (splitmix64_next(state) & 1) != 0;
      x(e) = negative ? -mag : mag;
    }
  }
  return x;
}

OptimizeOutcome optimize_from(const LossModel& model, Eigen::VectorXd x,
                              const OptimizerConfig& cfg) {
  const int n = static_cast<int>(x.size());
  if (n != model.param_count()) throw std::invalid_argument("optimize_from: wrong parameter count");
  const double bound = cfg.weight_bound;
  const auto project = [bound](const Eigen::VectorXd& v) {
    return v.cwiseMax(-bound).cwiseMin(bound).eval();
  };
  x = project(x);

  OptimizeOutcome out;
  out.x = x;
  if (n == 0) {
    out.loss = model.loss(x);
    out.converged = true;
    return out;
  }

  Eigen::VectorXd g(n);
  double f = model.loss_and_grad(x, g);
  if (!std::isfinite(f)) {
    out.loss = f;
    return out;
  }

  std::deque<Eigen::VectorXd> hist_s, hist_y;
  std::deque<double> hist_rho;
  constexpr int kMemory = 10;
  constexpr double kArmijo = 1e-4;

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    const Eigen::VectorXd pg = x - project(x - g);
    if (pg.norm() <= cfg.grad_tol) {
      out.converged = true;
      break;
    }

    // Two-loop recursion; falls back to steepest descent on empty history.
    Eigen::VectorXd d = -g;
    if (!hist_s.empty()) {
      const int m = static_cast<int>(hist_s.size());
      std::vector<double> alpha(static_cast<size_t>(m));
      for (int i = m - 1; i >= 0; --i) {
        alpha[static_cast<size_t>(i)] = hist_rho[static_cast<size_t>(i)] * hist_s[static_cast<size_t>(i)].dot(d);
        d -= alpha[static_cast<size_t>(i)] * hist_y[static_cast<size_t>(i)];
      }
      d *= hist_s.back().dot(hist_y.back()) / hist_y.back().squaredNorm();
      for (int i = 0; i < m; ++i) {
        const double beta = hist_rho[static_cast<size_t>(i)] * hist_y[static_cast<size_t>(i)].dot(d);
        d += (alpha[static_cast<size_t>(i)] - beta) * hist_s[static_cast<size_t>(i)];
      }
      if (d.dot(g) >= 0.0) {  // not a descent direction: restart from scratch
        hist_s.clear();
        hist_y.clear();
        hist_rho.clear();
        d = -g;
      }
    }

    double t = hist_s.empty() ? std::min(1.0, 1.0 / std::max(1e-12, g.norm())) : 1.0;
    Eigen::VectorXd x_new;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = project(x + t * d);
      const Eigen::VectorXd step = x_new - x;
      if (step.lpNorm<Eigen::Infinity>() < 1e-18) break;
      const double f_new = model.loss(x_new);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * g.dot(step)) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      if (!hist_s.empty()) {  // curvature model misled the search; retry plainly
        hist_s.clear();
        hist_y.clear();
        hist_rho.clear();
        continue;
      }
      break;  // steepest descent cannot move: numerically stationary
    }

    Eigen::VectorXd g_new(n);
    const double f_new = model.loss_and_grad(x_new, g_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const bool clipped = ((x + t * d) - x_new).lpNorm<Eigen::Infinity>() > 1e-15;
    if (clipped) {
      // The box bent the step, so the (s, y) pair no longer samples the
      // unconstrained curvature.
      hist_s.clear();
      hist_y.clear();
      hist_rho.clear();
    } else {
      const double sy = s.dot(y);
      if (sy > 1e-10 * s.norm() * y.norm()) {
        hist_s.push_back(s);
        hist_y.push_back(y);
        hist_rho.push_back(1.0 / sy);
        if (static_cast<int>(hist_s.size()) > kMemory) {
          hist_s.pop_front();
          hist_y.pop_front();
          hist_rho.pop_front();
        }
      }
    }
    x = x_new;
    f = f_new;
    g = g_new;
  }

  out.x = x;
  out.loss = f;
  out.iterations = iter;
  return out;
}

OptimizeOutcome optimize_weights(const Graph& g, const Target& target,
                                 const OptimizerConfig& cfg) {
  const LossModel model(g, rule_for(g), target);
  OptimizeOutcome best;
  const int restarts = std::max(1, cfg.restarts);
  for (int i = 0; i < restarts; ++i) {
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1);
    OptimizeOutcome o = optimize_from(model, random_parameters(model, cfg.init_range, seed), cfg);
    if (o.loss < best.loss) best = o;
  }
  return best;
}

double loss_at_scale(const LossModel& model, const Eigen::VectorXd& x, double scale,
                     double weight_bound) {
  const Eigen::VectorXcd w = model.unpack(x);
  double max_tunable = 0.0;
  bool any = false;
  for (int i = 0; i < w.size(); ++i) {
    const double mag = std::abs(w(i));
    if (mag <= weight_bound / 2) {
      any = true;
      max_tunable = std::max(max_tunable, mag);
    }
  }
  if (!any || max_tunable == 0.0) return model.loss(x);
  Eigen::VectorXcd scaled = w;
  for (int i = 0; i < w.size(); ++i)
    if (std::abs(w(i)) <= weight_bound / 2) scaled(i) *= scale / max_tunable;
  return model.loss(model.pack(scaled));
}

bool meets_threshold(const LossModel& model, const Eigen::VectorXd& x, double loss,
                     const OptimizerConfig& cfg) {
  const double bar = model.success_floor() + cfg.loss_threshold;
  if (cfg.asymptotic) return loss_at_scale(model, x, 0.01, cfg.weight_bound) <= bar;
  return loss <= bar;
}

DiscoveryResult prune(const Graph& g0, const Target& target, const OptimizerConfig& cfg) {
  DiscoveryResult out;
  out.graph = g0;
  out.seed = cfg.seed;
  out.init_range = cfg.init_range;

  Graph cur = g0;
  {
    const LossModel model(cur, rule_for(cur), target);
    const Eigen::VectorXd x = model.pack(edge_weights(cur));
    out.loss = model.loss(x);
    out.success = meets_threshold(model, x, out.loss, cfg);
    out.loss_trace.push_back(out.loss);
    if (!out.success) {  // caller violated the precondition; report as-is
      fill_asymptotic_report(out, model, x, cfg);
      return out;
    }
  }

  std::uint64_t phase = 0;

  // One batch pass over the near-zero weights before single removals.
  {
    std::vector<int> tiny;
    for (int i = 0; i < static_cast<int>(cur.edges.size()); ++i)
      if (std::abs(cur.edges[i].w) < cfg.batch_drop) tiny.push_back(i);
    if (!tiny.empty() && tiny.size() < cur.edges.size()) {
      Graph cand = without_edges(cur, tiny);
      const LossModel model(cand, rule_for(cand), target);
      const OptimizeOutcome o = reoptimize(model, model.pack(edge_weights(cand)), cfg, phase);
      const bool ok = meets_threshold(model, o.x, o.loss, cfg);
      for (int i : tiny) out.removals.push_back({cur.edges[i], ok});
      if (ok) {
        install_weights(cand, model.unpack(o.x));
        cur = cand;
        out.loss = o.loss;
        out.loss_trace.push_back(o.loss);
      }
    }
    ++phase;
  }

  std::set<EdgeKey> tried;
  std::uint64_t pass = 0;
  while (true) {
    const std::vector<int> order = removal_candidates(cur, tried, cfg, pass);
    if (order.empty()) break;
    const int pick = order.front();
    const Edge removed = cur.edges[pick];

    Graph cand = without_edges(cur, {pick});
    const LossModel model(cand, rule_for(cand), target);
    const OptimizeOutcome o = reoptimize(model, model.pack(edge_weights(cand)), cfg, phase);
    ++phase;

    const bool ok = meets_threshold(model, o.x, o.loss, cfg);
    out.removals.push_back({removed, ok});
    if (ok) {
      install_weights(cand, model.unpack(o.x));
      cur = cand;
      out.loss = o.loss;
      out.loss_trace.push_back(o.loss);
      tried.clear();  // a changed topology makes previously kept edges fair game again
      ++pass;
    } else {
      tried.insert(key_of(removed));
    }
  }

  out.graph = cur;
  {
    const LossModel model(cur, rule_for(cur), target);
    const Eigen::VectorXd x = model.pack(edge_weights(cur));
    out.success = meets_threshold(model, x, out.loss, cfg);
    fill_asymptotic_report(out, model, x, cfg);
  }
  return out;
}

DiscoveryResult discover_run(const Graph& initial, const Target& target,
                             const OptimizerConfig& cfg) {
  const LossModel model(initial, rule_for(initial), target);
  if (cfg.asymptotic && model.loss_name() != "fidelity")
    throw std::invalid_argument("asymptotic mode requires the fidelity loss");

  const int restarts = std::max(1, cfg.restarts);
  std::vector<OptimizeOutcome> outcomes(static_cast<size_t>(restarts));
  const auto run_range = [&](int first, int stride) {
    for (int i = first; i < restarts; i += stride) {
      const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1);
      outcomes[static_cast<size_t>(i)] =
          optimize_from(model, random_parameters(model, cfg.init_range, seed), cfg);
    }
  };

  const int threads = std::max(1, std::min(cfg.threads, restarts));
  if (threads == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          run_range(t, threads);
        } catch (...) {
          errors[static_cast<size_t>(t)] = std::current_exception();
        }
      });
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // The selection rule is a pure function of the per-restart outcomes, so the
  // result cannot depend on scheduling: prune the lowest-index success.
  int winner = -1;
  for (int i = 0; i < restarts; ++i)
    if (meets_threshold(model, outcomes[static_cast<size_t>(i)].x,
                        outcomes[static_cast<size_t>(i)].loss, cfg)) {
      winner = i;
      break;
    }

  if (winner < 0) {
    int best = 0;
    for (int i = 1; i < restarts; ++i)
      if (outcomes[static_cast<size_t>(i)].loss < outcomes[static_cast<size_t>(best)].loss)
        best = i;
    DiscoveryResult fail;
    fail.graph = initial;
    install_weights(fail.graph, model.unpack(outcomes[static_cast<size_t>(best)].x));
    fail.loss = outcomes[static_cast<size_t>(best)].loss;
    fail.success = false;
    fail.restart = best;
    fail.seed = cfg.seed;
    fail.init_range = cfg.init_range;
    fail.loss_trace.push_back(fail.loss);
    fill_asymptotic_report(fail, model, outcomes[static_cast<size_t>(best)].x, cfg);
    return fail;
  }

  Graph start = initial;
  install_weights(start, model.unpack(outcomes[static_cast<size_t>(winner)].x));
  DiscoveryResult result = prune(start, target, cfg);
  result.restart = winner;
  return result;
}

bool verify_minimal(const Graph& g, const Target& target, const OptimizerConfig& cfg,
                    std::vector<Edge>* failures) {
  if (failures) failures->clear();
  bool minimal = true;
  for (int i = 0; i < static_cast<int>(g.edges.size()); ++i) {
    Graph cand = without_edges(g, {i});
    const LossModel model(cand, rule_for(cand), target);
    OptimizeOutcome best;
    for (std::uint64_t j = 0; j < 3; ++j) {
      const std::uint64_t seed =
          derive_seed(cfg.seed, kVerifySalt + 3 * static_cast<std::uint64_t>(i) + j);
      OptimizeOutcome o =
          optimize_from(model, random_parameters(model, cfg.init_range, seed), cfg);
      if (o.loss < best.loss) best = o;
    }
    if (best.x.size() == model.param_count() &&
        meets_threshold(model, best.x, best.loss, cfg)) {
      minimal = false;
      if (failures) failures->push_back(g.edges[i]);
    }
  }
  return minimal;
}

std::string discovery_result_to_json(const DiscoveryResult& r) {
  json j;
  j["graph"] = json::parse(serialize(r.graph));
  j["loss"] = r.loss;
  j["success"] = r.success;
  j["restart"] = r.restart;
  j["seed"] = r.seed;
  j["init_range"] = r.init_range;
  json removals = json::array();
  for (const RemovalRecord& rec : r.removals)
    removals.push_back({{"edge", {rec.edge.u, rec.edge.v, rec.edge.cu, rec.edge.cv}},
                        {"accepted", rec.accepted}});
  j["removals"] = std::move(removals);
  j["loss_trace"] = r.loss_trace;
  if (r.asymptotic)
    j["asymptotic"] = {{"fidelity_at_0.1", r.fidelity_at_01},
                       {"fidelity_at_0.01", r.fidelity_at_001}};
  return j.dump(2) + "\n";
}

}  // namespace graphdisc
