#include "graphdisc/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>
#include <stdexcept>

#include "graphdisc/json_detail.hpp"

namespace graphdisc {

using nlohmann::json;
using detail::check_keys;

namespace {

constexpr double kTinyNorm = 1e-290;

using OccRecord = std::vector<std::vector<std::pair<int, int>>>;

OccRecord restrict_occ(const Ket& k, const std::vector<int>& verts) {
  OccRecord out;
  out.reserve(verts.size());
  for (int v : verts) out.push_back(k.occ[static_cast<size_t>(v)]);
  return out;
}

Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

void require_density_shape(const Eigen::MatrixXcd& m, const char* name) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(name) + " is not square");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument(std::string(name) + " is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9)
    throw std::invalid_argument(std::string(name) + " is not positive semidefinite");
}

std::vector<double> psd_spectrum(const Eigen::MatrixXcd& rho) {
  require_density_shape(rho, "density matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  std::vector<double> lam(static_cast<size_t>(rho.rows()));
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    lam[static_cast<size_t>(i)] = std::max(0.0, es.eigenvalues()(i));
  return lam;
}

double von_neumann(const std::vector<double>& lam) {
  double s = 0.0;
  for (double l : lam)
    if (l > 0.0) s -= l * std::log(l);
  return s;
}

}  // namespace

double fidelity_pure(const KetMap& state, const KetMap& target) {
  const double n = norm_squared(state);
  if (n <= 0.0) throw std::invalid_argument("fidelity is undefined for a zero state");
  const cplx o = inner_product(target, state);
  return std::norm(o) / n;
}

double count_rate(const KetMap& state, const KetMap& target) {
  return std::norm(inner_product(target, state));
}

double fidelity_mixed(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw std::invalid_argument("density matrices have mismatched shapes");
  require_density_shape(rho, "rho");
  require_density_shape(sigma, "sigma");
  const Eigen::MatrixXcd sr = psd_sqrt(rho);
  Eigen::MatrixXcd m = sr * sigma * sr;
  m = ((m + m.adjoint()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  return std::clamp(tr * tr, 0.0, 1.0);
}

double fidelity_mixed(const DensityMatrix& rho, const DensityMatrix& target) {
  if (static_cast<Eigen::Index>(rho.basis.size()) != rho.rho.rows() ||
      static_cast<Eigen::Index>(target.basis.size()) != target.rho.rows())
    throw std::invalid_argument("density matrix basis does not match its dimension");
  std::map<Ket, int> index;
  for (const Ket& k : rho.basis) index.emplace(k, 0);
  for (const Ket& k : target.basis) index.emplace(k, 0);
  int next = 0;
  for (auto& [k, i] : index) i = next++;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(next, next);
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(next, next);
  for (size_t r = 0; r < rho.basis.size(); ++r)
    for (size_t c = 0; c < rho.basis.size(); ++c)
      a(index.at(rho.basis[r]), index.at(rho.basis[c])) =
          rho.rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (size_t r = 0; r < target.basis.size(); ++r)
    for (size_t c = 0; c < target.basis.size(); ++c)
      b(index.at(target.basis[r]), index.at(target.basis[c])) =
          target.rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return fidelity_mixed(a, b);
}

DensityMatrix reduced_density(const KetMap& state, const std::vector<int>& subsystem) {
  if (state.empty()) throw std::invalid_argument("reduced_density of an empty state");
  const int v = state.begin()->first.vertex_count();
  std::vector<int> sub = subsystem;
  std::sort(sub.begin(), sub.end());
  sub.erase(std::unique(sub.begin(), sub.end()), sub.end());
  if (sub.empty() || static_cast<int>(sub.size()) >= v)
    throw std::invalid_argument("subsystem must be a nonempty proper subset of the vertices");
  for (int s : sub)
    if (s < 0 || s >= v) throw std::invalid_argument("subsystem vertex out of range");
  std::vector<int> rest;
  for (int i = 0; i < v; ++i)
    if (!std::binary_search(sub.begin(), sub.end(), i)) rest.push_back(i);

  std::map<Ket, int> rows;
  std::map<OccRecord, int> cols;
  for (const auto& [ket, amp] : state) {
    if (ket.vertex_count() != v)
      throw std::invalid_argument("state mixes kets of different vertex counts");
    if (!ket.single_occupancy())
      throw std::invalid_argument("reduced_density requires single-occupation kets");
    Ket kr;
    kr.occ = restrict_occ(ket, sub);
    rows.emplace(std::move(kr), 0);
    cols.emplace(restrict_occ(ket, rest), 0);
  }
  int next = 0;
  for (auto& [k, i] : rows) i = next++;
  next = 0;
  for (auto& [k, i] : cols) i = next++;

  Eigen::MatrixXcd m =
      Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(cols.size()));
  for (const auto& [ket, amp] : state) {
    Ket kr;
    kr.occ = restrict_occ(ket, sub);
    m(rows.at(kr), cols.at(restrict_occ(ket, rest))) = amp;
  }

  DensityMatrix dm;
  dm.basis.reserve(rows.size());
  for (const auto& [k, i] : rows) dm.basis.push_back(k);
  dm.rho = (m * m.adjoint()) / m.squaredNorm();
  return dm;
}

std::vector<std::vector<int>> bipartitions(const std::vector<int>& vertices, int k) {
  const int n = static_cast<int>(vertices.size());
  if (n < 2) throw std::invalid_argument("bipartitions need at least two vertices");
  if (k < 1 || 2 * k > n)
    throw std::invalid_argument("bipartition size cap must lie in [1, n/2]");
  std::vector<std::vector<int>> out;
  for (int s = 1; s <= k; ++s) {
    std::vector<int> comb(static_cast<size_t>(s));
    for (int i = 0; i < s; ++i) comb[static_cast<size_t>(i)] = i;
    while (true) {
      // at the half split, only the complement-pair representative holding
      // the lowest vertex is counted
      if (2 * s != n || comb[0] == 0) {
        std::vector<int> part;
        part.reserve(static_cast<size_t>(s));
        for (int idx : comb) part.push_back(vertices[static_cast<size_t>(idx)]);
        out.push_back(std::move(part));
      }
      int i = s - 1;
      while (i >= 0 && comb[static_cast<size_t>(i)] == n - s + i) --i;
      if (i < 0) break;
      ++comb[static_cast<size_t>(i)];
      for (int j = i + 1; j < s; ++j)
        comb[static_cast<size_t>(j)] = comb[static_cast<size_t>(j - 1)] + 1;
    }
  }
  return out;
}

double purity_sum_loss(const KetMap& state, const std::vector<std::vector<int>>& partitions) {
  double total = 0.0;
  for (const auto& part : partitions) total += reduced_density(state, part).rho.squaredNorm();
  return total;
}

double purity_lower_bound(const Graph& g, const std::vector<std::vector<int>>& partitions) {
  double total = 0.0;
  for (const auto& part : partitions) {
    double da = 1.0;
    double rest = 1.0;
    for (const Vertex& v : g.vertices) {
      if (v.role == Role::environment) continue;
      if (std::find(part.begin(), part.end(), v.id) != part.end())
        da *= v.dim;
      else
        rest *= v.dim;
    }
    total += 1.0 / std::min(da, rest);
  }
  return total;
}

std::vector<int> srv(const KetMap& state, const Graph& g) {
  std::vector<int> ranks;
  for (const Vertex& v : g.vertices) {
    if (v.role != Role::detector) continue;
    const DensityMatrix dm = reduced_density(state, {v.id});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dm.rho, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    int rank = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()(i) >= 1e-8 * top) ++rank;
    ranks.push_back(rank);
  }
  std::sort(ranks.rbegin(), ranks.rend());
  return ranks;
}

double renyi_entropy(const Eigen::MatrixXcd& rho, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("entropy order must be positive");
  const auto lam = psd_spectrum(rho);
  if (std::abs(alpha - 1.0) < 1e-6) return von_neumann(lam);
  double tr = 0.0;
  for (double l : lam) tr += std::pow(l, alpha);
  return std::log(tr) / (1.0 - alpha);
}

double tsallis_entropy(const Eigen::MatrixXcd& rho, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("entropy order must be positive");
  const auto lam = psd_spectrum(rho);
  if (std::abs(alpha - 1.0) < 1e-6) return von_neumann(lam);
  double tr = 0.0;
  for (double l : lam) tr += std::pow(l, alpha);
  return (tr - 1.0) / (1.0 - alpha);
}

std::string default_loss_name(Target::Kind kind) {
  return kind == Target::Kind::entanglement ? "purity_sum" : "fidelity";
}

namespace {

cplx amp_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw parse_error("amplitude must be a [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

// Slots of a pure-target ket, with dim-1 ancilla slots filled in when the
// config omits them.
Ket pure_ket(const json& j, const Graph& g) {
  Ket given = detail::ket_from_json(j);
  std::vector<int> autofill;
  for (const Vertex& v : g.vertices)
    if (v.role == Role::ancilla && v.dim == 1) autofill.push_back(v.id);
  const int full = g.vertex_count();
  if (given.vertex_count() == full) return given;
  if (given.vertex_count() != full - static_cast<int>(autofill.size()))
    throw parse_error("target ket covers " + std::to_string(given.vertex_count()) +
                      " vertices; expected " + std::to_string(full) +
                      (autofill.empty() ? "" : " (or " +
                           std::to_string(full - static_cast<int>(autofill.size())) +
                           " with dim-1 ancillas omitted)"));
  Ket filled;
  size_t src = 0;
  for (int v = 0; v < full; ++v) {
    if (std::find(autofill.begin(), autofill.end(), v) != autofill.end())
      filled.occ.push_back({{0, 1}});
    else
      filled.occ.push_back(given.occ[src++]);
  }
  return filled;
}

void check_ket_dims(const Ket& k, const std::vector<int>& dims, const char* where) {
  if (k.vertex_count() != static_cast<int>(dims.size()))
    throw parse_error(std::string(where) + " ket covers " + std::to_string(k.vertex_count()) +
                      " vertices; expected " + std::to_string(dims.size()));
  for (size_t v = 0; v < k.occ.size(); ++v)
    for (auto [c, n] : k.occ[v])
      if (c < 0 || c >= dims[v])
        throw parse_error(std::string(where) + " ket uses color " + std::to_string(c) +
                          " at vertex " + std::to_string(v) + " with local dimension " +
                          std::to_string(dims[v]));
}

void set_loss(Target& t, const json& j) {
  t.loss_name = default_loss_name(t.kind);
  if (j.contains("loss")) t.loss_name = j["loss"].get<std::string>();
  const bool ok = (t.kind == Target::Kind::pure_state &&
                   (t.loss_name == "fidelity" || t.loss_name == "count_rate")) ||
                  (t.kind == Target::Kind::density_matrix && t.loss_name == "fidelity") ||
                  (t.kind == Target::Kind::entanglement && t.loss_name == "purity_sum");
  if (!ok) throw parse_error("loss '" + t.loss_name + "' does not apply to this target kind");
}

}  // namespace

Target target_from_json(const std::string& text, const Graph& g) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw parse_error("target JSON: parse failure at byte " + std::to_string(e.byte) + ": " +
                      e.what());
  }
  if (!j.is_object() || !j.contains("kind"))
    throw parse_error("target JSON must be an object with a 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  Target t;

  if (kind == "pure_state") {
    t.kind = Target::Kind::pure_state;
    check_keys(j, {"kind", "terms", "loss"}, "target");
    if (environment_vertex(g) >= 0)
      throw parse_error("pure-state targets are undefined with an environment vertex; "
                        "use a density_matrix target");
    if (!j.contains("terms") || !j["terms"].is_array() || j["terms"].empty())
      throw parse_error("pure_state target needs a nonempty 'terms' array");
    std::vector<int> dims;
    for (const Vertex& v : g.vertices) dims.push_back(v.dim);
    double norm = 0.0;
    for (const json& termj : j["terms"]) {
      check_keys(termj, {"ket", "amp"}, "target term");
      if (!termj.contains("ket") || !termj.contains("amp"))
        throw parse_error("target term needs 'ket' and 'amp'");
      Ket k = pure_ket(termj["ket"], g);
      check_ket_dims(k, dims, "target");
      const cplx a = amp_from_json(termj["amp"]);
      if (!t.terms.emplace(std::move(k), a).second)
        throw parse_error("target repeats a ket");
      norm += std::norm(a);
    }
    if (norm <= 0.0) throw parse_error("target state is zero");
    // Already-normalized input passes through bit-exact, so re-serializing a
    // parsed target is idempotent.
    if (std::abs(norm - 1.0) > 1e-12)
      for (auto& [k, a] : t.terms) a /= std::sqrt(norm);
  } else if (kind == "density_matrix") {
    t.kind = Target::Kind::density_matrix;
    check_keys(j, {"kind", "basis", "matrix", "loss"}, "target");
    if (environment_vertex(g) < 0)
      throw parse_error("density_matrix targets require an environment vertex");
    if (!j.contains("basis") || !j["basis"].is_array() || j["basis"].empty())
      throw parse_error("density_matrix target needs a nonempty 'basis'");
    if (!j.contains("matrix") || !j["matrix"].is_array())
      throw parse_error("density_matrix target needs a 'matrix'");
    std::vector<int> dims;
    for (const Vertex& v : g.vertices)
      if (v.role != Role::environment) dims.push_back(v.dim);
    for (const json& kj : j["basis"]) {
      Ket k = detail::ket_from_json(kj);
      check_ket_dims(k, dims, "density basis");
      t.density.basis.push_back(std::move(k));
    }
    for (size_t i = 1; i < t.density.basis.size(); ++i)
      for (size_t p = 0; p < i; ++p)
        if (t.density.basis[p] == t.density.basis[i])
          throw parse_error("density basis repeats a ket");
    const auto n = static_cast<Eigen::Index>(t.density.basis.size());
    if (static_cast<Eigen::Index>(j["matrix"].size()) != n)
      throw parse_error("density matrix row count does not match the basis");
    t.density.rho.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const json& rowj = j["matrix"][static_cast<size_t>(r)];
      if (!rowj.is_array() || static_cast<Eigen::Index>(rowj.size()) != n)
        throw parse_error("density matrix rows must be length-" + std::to_string(n) + " arrays");
      for (Eigen::Index c = 0; c < n; ++c)
        t.density.rho(r, c) = amp_from_json(rowj[static_cast<size_t>(c)]);
    }
    if (std::abs(t.density.rho.trace().real() - 1.0) > 1e-6 ||
        std::abs(t.density.rho.trace().imag()) > 1e-9)
      throw parse_error("density matrix target must have unit trace");
    try {
      require_density_shape(t.density.rho, "density matrix target");
    } catch (const std::invalid_argument& e) {
      throw parse_error(e.what());
    }
  } else if (kind == "entanglement") {
    t.kind = Target::Kind::entanglement;
    check_keys(j, {"kind", "k", "loss"}, "target");
    int logical = 0;
    for (const Vertex& v : g.vertices)
      if (v.role == Role::detector) ++logical;
    if (logical < 2)
      throw parse_error("entanglement targets need at least two detector vertices");
    if (j.contains("k") && j["k"].is_string()) {
      if (j["k"].get<std::string>() != "all")
        throw parse_error("'k' must be an integer or \"all\"");
      t.k_all = true;
      t.k = logical / 2;
    } else if (j.contains("k")) {
      t.k = j["k"].get<int>();
    }
    if (t.k < 1 || 2 * t.k > logical)
      throw parse_error("'k' must lie in [1, " + std::to_string(logical / 2) +
                        "] for " + std::to_string(logical) + " detectors");
  } else {
    throw parse_error("unknown target kind '" + kind + "'");
  }

  set_loss(t, j);
  return t;
}

std::string target_to_json(const Target& t) {
  json j;
  j["loss"] = t.loss_name.empty() ? default_loss_name(t.kind) : t.loss_name;
  switch (t.kind) {
    case Target::Kind::pure_state: {
      j["kind"] = "pure_state";
      json terms = json::array();
      for (const auto& [k, a] : t.terms)
        terms.push_back({{"ket", detail::ket_to_json(k)}, {"amp", {a.real(), a.imag()}}});
      j["terms"] = terms;
      break;
    }
    case Target::Kind::density_matrix: {
      j["kind"] = "density_matrix";
      json basis = json::array();
      for (const Ket& k : t.density.basis) basis.push_back(detail::ket_to_json(k));
      j["basis"] = basis;
      json matrix = json::array();
      for (Eigen::Index r = 0; r < t.density.rho.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < t.density.rho.cols(); ++c)
          row.push_back({t.density.rho(r, c).real(), t.density.rho(r, c).imag()});
        matrix.push_back(row);
      }
      j["matrix"] = matrix;
      break;
    }
    case Target::Kind::entanglement:
      j["kind"] = "entanglement";
      if (t.k_all)
        j["k"] = "all";
      else
        j["k"] = t.k;
      break;
  }
  return j.dump(2) + "\n";
}

LossModel::LossModel(const Graph& g, const Rule& r, const Target& t)
    : g_(g), rule_(r), cs_(compile_state(g, r)), loss_name_(t.loss_name) {
  if (loss_name_.empty()) loss_name_ = default_loss_name(t.kind);

  switch (t.kind) {
    case Target::Kind::pure_state: {
      if (loss_name_ == "fidelity")
        kind_ = LossKind::fid_pure;
      else if (loss_name_ == "count_rate")
        kind_ = LossKind::count_rate;
      else
        throw std::invalid_argument("loss '" + loss_name_ + "' needs a different target kind");
      std::map<Ket, int> index;
      for (size_t i = 0; i < cs_.kets.size(); ++i)
        index.emplace(cs_.kets[i], static_cast<int>(i));
      tvec_ = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(cs_.kets.size()));
      // target kets outside the reachable basis stay at amplitude zero and
      // simply cap the attainable overlap
      for (const auto& [k, a] : t.terms) {
        auto it = index.find(k);
        if (it != index.end()) tvec_(it->second) = a;
      }
      break;
    }
    case Target::Kind::density_matrix: {
      if (loss_name_ != "fidelity")
        throw std::invalid_argument("density-matrix targets use the fidelity loss");
      kind_ = LossKind::fid_mixed;
      if (cs_.env_vertex < 0)
        throw std::invalid_argument("density-matrix targets require an environment vertex");
      std::map<Ket, int> index;
      for (const Ket& k : cs_.reduced_kets) index.emplace(k, 0);
      for (const Ket& k : t.density.basis) index.emplace(k, 0);
      union_dim_ = 0;
      for (auto& [k, i] : index) i = union_dim_++;
      rho_index_.reserve(cs_.reduced_kets.size());
      for (const Ket& k : cs_.reduced_kets) rho_index_.push_back(index.at(k));
      Eigen::MatrixXcd sigma = Eigen::MatrixXcd::Zero(union_dim_, union_dim_);
      for (size_t rr = 0; rr < t.density.basis.size(); ++rr)
        for (size_t cc = 0; cc < t.density.basis.size(); ++cc)
          sigma(index.at(t.density.basis[rr]), index.at(t.density.basis[cc])) =
              t.density.rho(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(cc));
      sqrt_sigma_ = psd_sqrt(sigma);
      break;
    }
    case Target::Kind::entanglement: {
      if (loss_name_ != "purity_sum")
        throw std::invalid_argument("entanglement targets use the purity_sum loss");
      kind_ = LossKind::purity;
      std::vector<int> logical;
      for (const Vertex& v : g_.vertices)
        if (v.role == Role::detector) logical.push_back(v.id);
      const int k = t.k_all ? static_cast<int>(logical.size()) / 2 : t.k;
      const auto parts = bipartitions(logical, k);
      floor_ = purity_lower_bound(g_, parts);
      const int v = g_.vertex_count();
      for (const auto& part : parts) {
        std::vector<int> rest;
        for (int i = 0; i < v; ++i)
          if (std::find(part.begin(), part.end(), i) == part.end()) rest.push_back(i);
        std::map<OccRecord, int> rows, cols;
        for (const Ket& ket : cs_.kets) {
          rows.emplace(restrict_occ(ket, part), 0);
          cols.emplace(restrict_occ(ket, rest), 0);
        }
        Partition p;
        for (auto& [rec, i] : rows) i = p.rows++;
        for (auto& [rec, i] : cols) i = p.cols++;
        p.pos.reserve(cs_.kets.size());
        for (const Ket& ket : cs_.kets)
          p.pos.emplace_back(rows.at(restrict_occ(ket, part)),
                             cols.at(restrict_occ(ket, rest)));
        parts_.push_back(std::move(p));
      }
      break;
    }
  }
}

LossModel::LossModel(const Graph& g, const Target& t) : LossModel(g, rule_for(g), t) {}

Eigen::VectorXd LossModel::pack(const Eigen::VectorXcd& w) const {
  Eigen::VectorXd x(param_count());
  for (int e = 0; e < edge_count(); ++e) {
    if (complex_domain()) {
      x(2 * e) = w(e).real();
      x(2 * e + 1) = w(e).imag();
    } else {
      x(e) = w(e).real();
    }
  }
  return x;
}

Eigen::VectorXcd LossModel::unpack(const Eigen::VectorXd& x) const {
  Eigen::VectorXcd w(edge_count());
  for (int e = 0; e < edge_count(); ++e)
    w(e) = complex_domain() ? cplx{x(2 * e), x(2 * e + 1)} : cplx{x(e), 0.0};
  return w;
}

double LossModel::loss(const Eigen::VectorXd& x) const { return evaluate(x, nullptr); }

double LossModel::loss_and_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  return evaluate(x, &grad);
}

double LossModel::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  const Eigen::VectorXcd w = unpack(x);
  const Eigen::VectorXcd a = amplitudes(cs_, w);
  const double n = a.squaredNorm();
  const auto kets = static_cast<Eigen::Index>(cs_.kets.size());

  if (grad) grad->setZero(param_count());
  const bool needs_norm = kind_ != LossKind::count_rate;
  if (needs_norm && n < kTinyNorm) return std::numeric_limits<double>::infinity();

  double loss = 0.0;
  Eigen::VectorXcd dlda = Eigen::VectorXcd::Zero(kets);

  switch (kind_) {
    case LossKind::fid_pure: {
      const cplx o = tvec_.dot(a);
      loss = 1.0 - std::norm(o) / n;
      if (grad)
        dlda = -(tvec_.conjugate() * std::conj(o) / n - a.conjugate() * (std::norm(o) / (n * n)));
      break;
    }
    case LossKind::count_rate: {
      const cplx o = tvec_.dot(a);
      loss = 1.0 - std::norm(o);
      if (grad) dlda = -tvec_.conjugate() * std::conj(o);
      break;
    }
    case LossKind::purity: {
      double total = 0.0;
      for (const Partition& p : parts_) {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(p.rows, p.cols);
        for (Eigen::Index k = 0; k < kets; ++k)
          m(p.pos[static_cast<size_t>(k)].first, p.pos[static_cast<size_t>(k)].second) = a(k);
        const Eigen::MatrixXcd r = m * m.adjoint();
        total += r.squaredNorm();
        if (grad) {
          const Eigen::MatrixXcd rm = r * m;
          for (Eigen::Index k = 0; k < kets; ++k)
            dlda(k) += 2.0 * std::conj(rm(p.pos[static_cast<size_t>(k)].first,
                                          p.pos[static_cast<size_t>(k)].second)) / (n * n);
        }
      }
      loss = total / (n * n);
      if (grad) dlda -= 2.0 * total / (n * n * n) * a.conjugate();
      break;
    }
    case LossKind::fid_mixed: {
      Eigen::MatrixXcd psi = Eigen::MatrixXcd::Zero(union_dim_, cs_.env_dim);
      for (Eigen::Index k = 0; k < kets; ++k)
        psi(rho_index_[static_cast<size_t>(cs_.reduced_index[static_cast<size_t>(k)])],
            cs_.env_group[static_cast<size_t>(k)]) = a(k);
      Eigen::MatrixXcd b = sqrt_sigma_ * (psi * psi.adjoint() / n) * sqrt_sigma_;
      b = ((b + b.adjoint()) / 2.0).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b);
      double trg = 0.0;
      for (Eigen::Index i = 0; i < b.rows(); ++i)
        trg += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
      loss = 1.0 - trg * trg;
      if (grad) {
        // d Tr sqrt(B) = 1/2 Tr(B^{-1/2} dB); eigenvalues below 1e-12 are
        // excluded from the inverse root (rank-deficient directions carry no
        // first-order information)
        Eigen::VectorXd inv = es.eigenvalues().unaryExpr(
            [](double l) { return l > 1e-12 ? 1.0 / std::sqrt(l) : 0.0; });
        const Eigen::MatrixXcd binvh =
            es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
        const Eigen::MatrixXcd kmat = sqrt_sigma_ * binvh * sqrt_sigma_;
        const Eigen::MatrixXcd y = kmat * psi;
        const double trk_rho = (psi.adjoint() * y).trace().real();
        for (Eigen::Index k = 0; k < kets; ++k) {
          const int r =
              rho_index_[static_cast<size_t>(cs_.reduced_index[static_cast<size_t>(k)])];
          const int gcol = cs_.env_group[static_cast<size_t>(k)];
          dlda(k) = -trg * (std::conj(y(r, gcol)) / n - trk_rho * std::conj(a(k)) / (n * n));
        }
      }
      break;
    }
  }

  if (grad) {
    const Eigen::MatrixXcd j = amplitude_jacobian(cs_, w);
    const Eigen::VectorXcd d = j.transpose() * dlda;
    for (int e = 0; e < edge_count(); ++e) {
      if (complex_domain()) {
        (*grad)(2 * e) = 2.0 * d(e).real();
        (*grad)(2 * e + 1) = -2.0 * d(e).imag();
      } else {
        (*grad)(e) = 2.0 * d(e).real();
      }
    }
  }
  return loss;
}

std::vector<double> loss_gradient(const Graph& g, const Rule& r, const Target& t,
                                  const std::string& loss_name) {
  Target bound = t;
  if (!loss_name.empty()) bound.loss_name = loss_name;
  LossModel model(g, r, bound);
  Eigen::VectorXd grad;
  const double l = model.loss_and_grad(model.pack(edge_weights(g)), grad);
  if (!std::isfinite(l))
    throw std::invalid_argument("loss is not differentiable here (zero state)");
  return {grad.data(), grad.data() + grad.size()};
}

}  // namespace graphdisc
