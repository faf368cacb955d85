#include "graphdisc/state.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "graphdisc/json_detail.hpp"

namespace graphdisc {

using nlohmann::json;

int Ket::photons_at(int v) const {
  int n = 0;
  for (auto [c, cnt] : occ[static_cast<size_t>(v)]) n += cnt;
  return n;
}

bool Ket::single_occupancy() const {
  for (const auto& slot : occ)
    if (slot.size() != 1 || slot[0].second != 1) return false;
  return true;
}

int Ket::color_at(int v) const {
  const auto& slot = occ[static_cast<size_t>(v)];
  if (slot.size() != 1 || slot[0].second != 1)
    throw std::logic_error("color_at needs a single-photon vertex");
  return slot[0].first;
}

Ket ket_of(const Graph& g, const Selection& s) {
  Ket k;
  k.occ.resize(static_cast<size_t>(g.vertex_count()));
  auto add = [&](int v, int color, int count) {
    auto& slot = k.occ[static_cast<size_t>(v)];
    for (auto& [c, n] : slot)
      if (c == color) {
        n += count;
        return;
      }
    slot.emplace_back(color, count);
  };
  for (auto [idx, mult] : s.items) {
    const Edge& e = g.edges[static_cast<size_t>(idx)];
    add(e.u, e.cu, mult);
    add(e.v, e.cv, mult);
  }
  for (auto& slot : k.occ) std::sort(slot.begin(), slot.end());
  return k;
}

namespace {

double sqrt_factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return std::sqrt(f);
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// 1/prod(m_e!) x prod over (vertex, color) of sqrt(n!)
double combinatorial_factor(const Graph& g, const Selection& s) {
  double f = 1.0;
  for (auto [idx, mult] : s.items) f /= factorial(mult);
  Ket k = ket_of(g, s);
  for (const auto& slot : k.occ)
    for (auto [c, n] : slot) f *= sqrt_factorial(n);
  return f;
}

}  // namespace

cplx selection_amplitude(const Graph& g, const Selection& s) {
  cplx a{combinatorial_factor(g, s), 0.0};
  for (auto [idx, mult] : s.items) {
    const cplx w = g.edges[static_cast<size_t>(idx)].w;
    for (int i = 0; i < mult; ++i) a *= w;
  }
  return a;
}

KetMap compute_state(const Graph& g, const Rule& r) {
  KetMap out;
  enumerate_selections(g, r, [&](const Selection& s) {
    out[ket_of(g, s)] += selection_amplitude(g, s);
    return true;
  });
  double max_abs = 0.0;
  for (const auto& [k, a] : out) max_abs = std::max(max_abs, std::abs(a));
  const double cutoff = 1e-14 * max_abs;
  for (auto it = out.begin(); it != out.end();) {
    if (std::abs(it->second) < cutoff || it->second == cplx{0.0, 0.0})
      it = out.erase(it);
    else
      ++it;
  }
  return out;
}

double norm_squared(const KetMap& state) {
  double n = 0.0;
  for (const auto& [k, a] : state) n += std::norm(a);
  return n;
}

cplx inner_product(const KetMap& bra, const KetMap& ket) {
  // <bra|ket>, iterating the smaller map
  const KetMap& small = bra.size() <= ket.size() ? bra : ket;
  const KetMap& large = bra.size() <= ket.size() ? ket : bra;
  cplx out{0.0, 0.0};
  for (const auto& [k, a] : small) {
    auto it = large.find(k);
    if (it == large.end()) continue;
    const cplx& b = it->second;
    out += (&small == &bra) ? std::conj(a) * b : std::conj(b) * a;
  }
  return out;
}

KetMap normalize(KetMap state) {
  const double n2 = norm_squared(state);
  if (n2 <= 0.0) return state;
  double best = -1.0;
  cplx anchor{1.0, 0.0};
  for (const auto& [k, a] : state) {
    const double m = std::abs(a);
    if (m > best + 1e-15 * best && m > best) {
      best = m;
      anchor = a;
    }
  }
  const cplx phase = anchor / std::abs(anchor);
  const double scale = 1.0 / std::sqrt(n2);
  for (auto& [k, a] : state) a = a / phase * scale;
  return state;
}

CompiledState compile_state(const Graph& g, const Rule& r) {
  CompiledState cs;
  std::map<Ket, int> index;
  std::vector<std::pair<Selection, Ket>> raw;
  enumerate_selections(g, r, [&](const Selection& s) {
    raw.emplace_back(s, ket_of(g, s));
    return true;
  });
  for (const auto& [s, k] : raw) index.emplace(k, 0);
  int next = 0;
  for (auto& [k, idx] : index) idx = next++;  // basis order = map order
  cs.kets.resize(index.size());
  for (const auto& [k, idx] : index) cs.kets[static_cast<size_t>(idx)] = k;
  cs.terms.reserve(raw.size());
  for (const auto& [s, k] : raw) {
    CompiledTerm t;
    t.ket = index.at(k);
    t.factor = combinatorial_factor(g, s);
    t.powers = s.items;
    cs.terms.push_back(std::move(t));
  }

  cs.env_vertex = environment_vertex(g);
  if (cs.env_vertex >= 0) {
    cs.env_dim = g.dim(cs.env_vertex);
    std::map<Ket, int> rindex;
    std::vector<Ket> stripped(cs.kets.size());
    std::vector<int> envcol(cs.kets.size());
    for (size_t i = 0; i < cs.kets.size(); ++i) {
      Ket rk = cs.kets[i];
      const auto& slot = rk.occ[static_cast<size_t>(cs.env_vertex)];
      if (slot.size() != 1 || slot[0].second != 1)
        throw std::logic_error("environment vertex must hold exactly one photon per term");
      envcol[i] = slot[0].first;
      rk.occ.erase(rk.occ.begin() + cs.env_vertex);
      stripped[i] = rk;
      rindex.emplace(stripped[i], 0);
    }
    next = 0;
    for (auto& [k, idx] : rindex) idx = next++;
    cs.reduced_kets.resize(rindex.size());
    for (const auto& [k, idx] : rindex) cs.reduced_kets[static_cast<size_t>(idx)] = k;
    cs.reduced_index.resize(cs.kets.size());
    cs.env_group.resize(cs.kets.size());
    for (size_t i = 0; i < cs.kets.size(); ++i) {
      cs.reduced_index[i] = rindex.at(stripped[i]);
      cs.env_group[i] = envcol[i];
    }
  }
  return cs;
}

Eigen::VectorXcd edge_weights(const Graph& g) {
  Eigen::VectorXcd w(g.edge_count());
  for (int i = 0; i < g.edge_count(); ++i) w[i] = g.edges[static_cast<size_t>(i)].w;
  return w;
}

Eigen::VectorXcd amplitudes(const CompiledState& cs, const Eigen::VectorXcd& weights) {
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(cs.kets.size()));
  for (const CompiledTerm& t : cs.terms) {
    cplx m{t.factor, 0.0};
    for (auto [e, p] : t.powers)
      for (int i = 0; i < p; ++i) m *= weights[e];
    a[t.ket] += m;
  }
  return a;
}

Eigen::MatrixXcd amplitude_jacobian(const CompiledState& cs, const Eigen::VectorXcd& weights) {
  Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(cs.kets.size()),
                                                weights.size());
  for (const CompiledTerm& t : cs.terms) {
    for (size_t d = 0; d < t.powers.size(); ++d) {
      // derivative with respect to edge t.powers[d].first
      cplx m{t.factor, 0.0};
      for (size_t j = 0; j < t.powers.size(); ++j) {
        auto [e, p] = t.powers[j];
        const int pw = j == d ? p - 1 : p;
        for (int i = 0; i < pw; ++i) m *= weights[e];
      }
      m *= static_cast<double>(t.powers[d].second);
      jac(t.ket, t.powers[d].first) += m;
    }
  }
  return jac;
}

DensityMatrix trace_environment(const Graph& g, const KetMap& state) {
  const int env = environment_vertex(g);
  if (env < 0) throw std::invalid_argument("trace_environment: no environment vertex");
  if (g.mode == Mode::fock)
    throw std::invalid_argument("trace_environment: fock mode is not supported");

  std::map<Ket, std::map<int, cplx>> grouped;  // reduced ket -> env color -> amp
  std::map<Ket, int> rindex;
  for (const auto& [k, a] : state) {
    const auto& slot = k.occ[static_cast<size_t>(env)];
    if (slot.size() != 1 || slot[0].second != 1)
      throw std::invalid_argument("environment vertex must hold exactly one photon per term");
    Ket rk = k;
    rk.occ.erase(rk.occ.begin() + env);
    grouped[rk][slot[0].first] += a;
    rindex.emplace(rk, 0);
  }
  int next = 0;
  for (auto& [k, idx] : rindex) idx = next++;

  DensityMatrix dm;
  dm.basis.resize(rindex.size());
  for (const auto& [k, idx] : rindex) dm.basis[static_cast<size_t>(idx)] = k;
  const Eigen::Index d = static_cast<Eigen::Index>(rindex.size());
  dm.rho = Eigen::MatrixXcd::Zero(d, d);

  std::map<int, Eigen::VectorXcd> branches;  // env color -> state vector
  for (const auto& [rk, colamps] : grouped)
    for (const auto& [color, amp] : colamps) {
      auto [it, fresh] = branches.try_emplace(color, Eigen::VectorXcd::Zero(d));
      it->second[rindex.at(rk)] = amp;
    }
  for (const auto& [color, psi] : branches) dm.rho += psi * psi.adjoint();
  return dm;
}

DensityMatrix normalize_trace(DensityMatrix dm) {
  const double tr = dm.rho.trace().real();
  if (tr > 0.0) dm.rho /= tr;
  return dm;
}

std::string ket_to_string(const Ket& k) {
  std::string out = "|";
  for (size_t v = 0; v < k.occ.size(); ++v) {
    if (v) out += ",";
    const auto& slot = k.occ[v];
    if (slot.empty()) {
      out += "_";
    } else if (slot.size() == 1 && slot[0].second == 1) {
      out += std::to_string(slot[0].first);
    } else {
      out += "(";
      for (size_t i = 0; i < slot.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(slot[i].first) + ":" + std::to_string(slot[i].second);
      }
      out += ")";
    }
  }
  out += ">";
  return out;
}

std::string state_to_json(const KetMap& state) {
  json arr = json::array();
  for (const auto& [k, a] : state)
    arr.push_back({{"ket", detail::ket_to_json(k)},
                   {"amp", json::array({a.real(), a.imag()})}});
  return arr.dump(2) + "\n";
}

KetMap state_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw parse_error(std::string("state JSON: ") + e.what());
  }
  if (!j.is_array()) throw parse_error("state JSON: top level must be an array");
  KetMap out;
  for (const json& term : j) {
    if (!term.is_object() || !term.contains("ket") || !term.contains("amp"))
      throw parse_error("state JSON: each term needs 'ket' and 'amp'");
    const json& amp = term["amp"];
    if (!amp.is_array() || amp.size() != 2)
      throw parse_error("state JSON: 'amp' must be a [re, im] pair");
    out[detail::ket_from_json(term["ket"])] +=
        cplx{amp[0].get<double>(), amp[1].get<double>()};
  }
  return out;
}

}  // namespace graphdisc
