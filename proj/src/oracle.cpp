#include "graphdisc/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace graphdisc {

namespace {

std::vector<int> slot_offsets(const Graph& g) {
  std::vector<int> off(static_cast<size_t>(g.vertex_count()) + 1, 0);
  for (int v = 0; v < g.vertex_count(); ++v)
    off[static_cast<size_t>(v) + 1] = off[static_cast<size_t>(v)] + g.dim(v);
  return off;
}

}  // namespace

PolyState oracle_expand(const Graph& g, int order) {
  PolyState p;
  p.slot_offset = slot_offsets(g);
  const int slots = p.slot_offset.back();

  std::map<std::vector<int>, cplx> cur;
  cur.emplace(std::vector<int>(static_cast<size_t>(slots), 0), cplx{1.0, 0.0});

  for (int step = 0; step < order; ++step) {
    std::map<std::vector<int>, cplx> next;
    for (const auto& [occ, c] : cur) {
      for (const Edge& e : g.edges) {
        if (e.w == cplx{0.0, 0.0}) continue;
        std::vector<int> o = occ;
        const size_t su = static_cast<size_t>(p.slot_offset[static_cast<size_t>(e.u)] + e.cu);
        const size_t sv = static_cast<size_t>(p.slot_offset[static_cast<size_t>(e.v)] + e.cv);
        double boost = std::sqrt(static_cast<double>(o[su] + 1));
        o[su] += 1;
        boost *= std::sqrt(static_cast<double>(o[sv] + 1));
        o[sv] += 1;
        next[o] += c * e.w * boost;
      }
    }
    cur = std::move(next);
  }
  double mfac = 1.0;
  for (int i = 2; i <= order; ++i) mfac *= i;
  for (auto& [occ, c] : cur) c /= mfac;
  p.coeff = std::move(cur);
  return p;
}

KetMap oracle_condition(const PolyState& p, const Graph& g, const Rule& r) {
  std::vector<char> pinned(static_cast<size_t>(g.vertex_count()), 0);
  for (int v : r.degree_one) pinned[static_cast<size_t>(v)] = 1;

  KetMap out;
  for (const auto& [occ, c] : p.coeff) {
    bool keep = true;
    for (int v = 0; v < g.vertex_count() && keep; ++v) {
      if (!pinned[static_cast<size_t>(v)]) continue;
      int total = 0;
      for (int s = p.slot_offset[static_cast<size_t>(v)];
           s < p.slot_offset[static_cast<size_t>(v) + 1]; ++s)
        total += occ[static_cast<size_t>(s)];
      if (total != 1) keep = false;
    }
    if (!keep) continue;
    Ket k;
    k.occ.resize(static_cast<size_t>(g.vertex_count()));
    for (int v = 0; v < g.vertex_count(); ++v)
      for (int col = 0; col < g.dim(v); ++col) {
        const int n = occ[static_cast<size_t>(p.slot_offset[static_cast<size_t>(v)] + col)];
        if (n > 0) k.occ[static_cast<size_t>(v)].emplace_back(col, n);
      }
    out[k] += c;
  }
  for (auto it = out.begin(); it != out.end();) {
    if (it->second == cplx{0.0, 0.0}) it = out.erase(it);
    else ++it;
  }
  return out;
}

OracleComparison compare_states(const KetMap& oracle_state, const KetMap& engine_state,
                                double tol) {
  OracleComparison cmp;
  auto scan = [&](const KetMap& a, const KetMap& b) {
    for (const auto& [k, amp] : a) {
      auto it = b.find(k);
      const cplx other = it == b.end() ? cplx{0.0, 0.0} : it->second;
      const double d = std::abs(amp - other);
      if (d > cmp.max_abs_diff) {
        cmp.max_abs_diff = d;
        cmp.worst = k;
      }
    }
  };
  scan(oracle_state, engine_state);
  scan(engine_state, oracle_state);
  cmp.ok = cmp.max_abs_diff <= tol;
  if (cmp.ok) {
    cmp.summary = "agreement within " + std::to_string(tol);
  } else {
    cmp.summary = "mismatch " + std::to_string(cmp.max_abs_diff) + " at " +
                  ket_to_string(cmp.worst);
  }
  return cmp;
}

OracleComparison oracle_compare(const Graph& g, const Rule& r, double tol) {
  // The engine prunes relative to the peak amplitude; mirror that here so the
  // comparison tests physics, not the pruning threshold.
  KetMap ref = oracle_condition(oracle_expand(g, r.pair_count), g, r);
  double max_abs = 0.0;
  for (const auto& [k, a] : ref) max_abs = std::max(max_abs, std::abs(a));
  const double cutoff = 1e-14 * max_abs;
  for (auto it = ref.begin(); it != ref.end();) {
    if (std::abs(it->second) < cutoff) it = ref.erase(it);
    else ++it;
  }
  return compare_states(ref, compute_state(g, r), tol);
}

}  // namespace graphdisc
