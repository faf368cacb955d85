#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "graphdisc/state.hpp"
#include "helpers.hpp"

using namespace graphdisc;
using testutil::load_fixture_graph;
using testutil::random_graph;

namespace {

Ket qudit_ket(const std::vector<int>& colors) {
  Ket k;
  for (int c : colors) k.occ.push_back({{c, 1}});
  return k;
}

std::vector<Vertex> detectors(int n, int dim) {
  std::vector<Vertex> v;
  for (int i = 0; i < n; ++i) v.push_back({i, Role::detector, dim});
  return v;
}

}  // namespace

TEST_CASE("minimal GHZ graph produces its two-term state") {
  Graph g = load_fixture_graph("ghz_4_2_minimal/graph.json");
  g.edges[0].w = {0.5, 0.0};   // (0,1,0,0)
  g.edges[3].w = {0.25, 0.0};  // (2,3,0,0)
  KetMap psi = compute_state(g, rule_for(g));
  REQUIRE(psi.size() == 2);
  CHECK(psi.at(qudit_ket({0, 0, 0, 0})) == cplx{0.125, 0.0});
  CHECK(psi.at(qudit_ket({1, 1, 1, 1})) == cplx{1.0, 0.0});
}

TEST_CASE("normalize fixes norm and global phase") {
  Graph g = load_fixture_graph("ghz_4_2_minimal/graph.json");
  for (Edge& e : g.edges) e.w = {-0.3, 0.0};
  KetMap psi = normalize(compute_state(g, rule_for(g)));
  REQUIRE(psi.size() == 2);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(psi.at(qudit_ket({0, 0, 0, 0})).real() == doctest::Approx(r));
  CHECK(psi.at(qudit_ket({1, 1, 1, 1})).real() == doctest::Approx(r));
  CHECK(psi.begin()->second.imag() == doctest::Approx(0.0));

  // complex anchor rotates onto the positive real axis
  KetMap raw;
  raw[qudit_ket({0})] = cplx{0.0, 2.0};
  raw[qudit_ket({1})] = cplx{1.0, 0.0};
  KetMap fixed = normalize(raw);
  CHECK(fixed.at(qudit_ket({0})).real() == doctest::Approx(2.0 / std::sqrt(5.0)));
  CHECK(fixed.at(qudit_ket({0})).imag() == doctest::Approx(0.0));
}

TEST_CASE("single self-loop at one pair gives amplitude w sqrt(2)") {
  Graph g = make_graph(Mode::fock, WeightDomain::real, detectors(1, 1),
                       {canonical_edge(0, 0, 0, 0, {0.7, 0.0})}, 2);
  KetMap psi = compute_state(g, rule_for(g));
  REQUIRE(psi.size() == 1);
  Ket two;
  two.occ = {{{0, 2}}};
  CHECK(psi.at(two).real() == doctest::Approx(0.7 * std::sqrt(2.0)));
}

TEST_CASE("duplicate-edge selections carry half the weight of distinct pairs") {
  // One path vertex with a self-loop plus two single-photon companions. The
  // four-photon ket at the path vertex arises both from {loop, a-c, a-d} and
  // from {loop x2, c-d}; the repeated loop contributes with 1/2!.
  std::vector<Vertex> v = {{0, Role::detector, 1}, {1, Role::ancilla, 1}, {2, Role::ancilla, 1}};
  Graph g = make_graph(Mode::fock, WeightDomain::real, v,
                       {canonical_edge(0, 0, 0, 0, {1.0, 0.0}),
                        canonical_edge(0, 1, 0, 0, {1.0, 0.0}),
                        canonical_edge(0, 2, 0, 0, {1.0, 0.0}),
                        canonical_edge(1, 2, 0, 0, {1.0, 0.0})},
                       6);
  Rule r = rule_for(g);
  auto sel = collect_selections(g, r);
  REQUIRE(sel.size() == 2);
  const double sqrt24 = std::sqrt(24.0);
  CHECK(selection_amplitude(g, sel[0]).real() == doctest::Approx(sqrt24 / 2.0));  // loop twice
  CHECK(selection_amplitude(g, sel[1]).real() == doctest::Approx(sqrt24));
  KetMap psi = compute_state(g, r);
  REQUIRE(psi.size() == 1);
  CHECK(psi.begin()->second.real() == doctest::Approx(1.5 * sqrt24));
}

TEST_CASE("same-vertex loops in different colors multiply their own factorials") {
  std::vector<Vertex> v = {{0, Role::detector, 2}};
  Graph g = make_graph(Mode::fock, WeightDomain::real, v,
                       {canonical_edge(0, 0, 0, 0, {1.0, 0.0}),
                        canonical_edge(0, 0, 1, 1, {1.0, 0.0})},
                       4);
  KetMap psi = compute_state(g, rule_for(g));
  Ket mixed;
  mixed.occ = {{{0, 2}, {1, 2}}};
  REQUIRE(psi.count(mixed) == 1);
  // sqrt(2!) per color, not sqrt(4!) for the vertex
  CHECK(psi.at(mixed).real() == doctest::Approx(2.0));
}

TEST_CASE("two-photon interference fixture gives the balanced superposition") {
  Graph g = load_fixture_graph("noon_2_2/graph.json");
  KetMap psi = compute_state(g, rule_for(g));
  REQUIRE(psi.size() == 2);
  Ket left, right;
  left.occ = {{{0, 2}}, {}};
  right.occ = {{}, {{0, 2}}};
  CHECK(psi.at(left).real() == doctest::Approx(std::sqrt(2.0)));
  CHECK(psi.at(right).real() == doctest::Approx(-std::sqrt(2.0)));
}

TEST_CASE("three-photon bunching fixture cancels its cross terms exactly") {
  Graph g = load_fixture_graph("noon_3_2_ancilla/graph.json");
  KetMap psi = compute_state(g, rule_for(g));
  REQUIRE(psi.size() == 2);
  Ket three_zero, zero_three;
  three_zero.occ = {{{0, 3}}, {}, {{0, 1}}};
  zero_three.occ = {{}, {{0, 3}}, {{0, 1}}};
  REQUIRE(psi.count(three_zero) == 1);
  REQUIRE(psi.count(zero_three) == 1);
  CHECK(psi.at(three_zero).real() == doctest::Approx(std::sqrt(6.0)));
  CHECK(psi.at(zero_three).real() == doctest::Approx(-std::sqrt(6.0)));
  KetMap normed = normalize(psi);
  // exact magnitude tie: the first basis ket (empty slot sorts first) anchors the phase
  CHECK(normed.at(zero_three).real() == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(normed.at(three_zero).real() == doctest::Approx(-1.0 / std::sqrt(2.0)));
}

TEST_CASE("asymptotic GHZ fixture keeps exactly four kets in ratio 1:1:1:w^2") {
  Graph g = load_fixture_graph("ghz_6_3_asymptotic/graph.json");
  KetMap psi = compute_state(g, rule_for(g));
  REQUIRE(psi.size() == 4);
  const double w = 0.1;
  CHECK(psi.at(qudit_ket({0, 0, 0, 0, 0, 0})).real() == doctest::Approx(w));
  CHECK(psi.at(qudit_ket({1, 1, 1, 1, 1, 1})).real() == doctest::Approx(w));
  CHECK(psi.at(qudit_ket({2, 2, 2, 2, 2, 2})).real() == doctest::Approx(w));
  CHECK(psi.at(qudit_ket({0, 0, 2, 1, 2, 1})).real() == doctest::Approx(w * w * w));
}

TEST_CASE("amplitudes below the relative floor are pruned") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real, detectors(2, 2),
                       {canonical_edge(0, 1, 0, 0, {1.0, 0.0}),
                        canonical_edge(0, 1, 1, 1, {1e-20, 0.0})});
  CHECK(compute_state(g, rule_for(g)).size() == 1);
}

TEST_CASE("compiled amplitudes agree with the direct computation") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 60; ++trial) {
    Graph g = random_graph(rng);
    Rule r = rule_for(g);
    CompiledState cs = compile_state(g, r);
    Eigen::VectorXcd amp = amplitudes(cs, edge_weights(g));
    KetMap direct = compute_state(g, r);
    for (size_t k = 0; k < cs.kets.size(); ++k) {
      auto it = direct.find(cs.kets[k]);
      const cplx want = it == direct.end() ? cplx{0.0, 0.0} : it->second;
      CHECK(std::abs(amp[static_cast<Eigen::Index>(k)] - want) < 1e-12);
    }
  }
}

TEST_CASE("scaling one edge weight scales its selections polynomially") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 30; ++trial) {
    Graph g = random_graph(rng);
    if (g.edge_count() == 0) continue;
    Rule r = rule_for(g);
    CompiledState cs = compile_state(g, r);
    Eigen::VectorXcd w = edge_weights(g);
    const int e = static_cast<int>(rng() % static_cast<uint64_t>(g.edge_count()));
    const cplx c{1.7, 0.0};
    Eigen::VectorXcd w2 = w;
    w2[e] *= c;
    Eigen::VectorXcd a1 = amplitudes(cs, w);
    Eigen::VectorXcd a2 = amplitudes(cs, w2);
    // check per term: rebuild from compiled structure
    for (const CompiledTerm& t : cs.terms) {
      int mult = 0;
      for (auto [idx, m] : t.powers)
        if (idx == e) mult = m;
      cplx term1{t.factor, 0.0}, term2{t.factor, 0.0};
      for (auto [idx, m] : t.powers)
        for (int i = 0; i < m; ++i) {
          term1 *= w[idx];
          term2 *= w2[idx];
        }
      CHECK(std::abs(term2 - term1 * std::pow(c, mult)) < 1e-12);
    }
    (void)a1;
    (void)a2;
  }
}

TEST_CASE("amplitude jacobian matches finite differences") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 25; ++trial) {
    Graph g = random_graph(rng);
    if (g.edge_count() == 0) continue;
    Rule r = rule_for(g);
    CompiledState cs = compile_state(g, r);
    if (cs.kets.empty()) continue;
    Eigen::VectorXcd w = edge_weights(g);
    Eigen::MatrixXcd jac = amplitude_jacobian(cs, w);
    const double h = 1e-6;
    for (int e = 0; e < g.edge_count(); ++e) {
      Eigen::VectorXcd wp = w, wm = w;
      wp[e] += h;
      wm[e] -= h;
      Eigen::VectorXcd fd = (amplitudes(cs, wp) - amplitudes(cs, wm)) / (2.0 * h);
      for (Eigen::Index k = 0; k < fd.size(); ++k)
        CHECK(std::abs(fd[k] - jac(k, e)) < 1e-6);
    }
  }
}

TEST_CASE("environment tracing reproduces the dephased GHZ mixture") {
  Graph g = load_fixture_graph("ghz_3_2_environment/graph.json");
  KetMap psi = compute_state(g, rule_for(g));
  DensityMatrix dm = trace_environment(g, psi);
  REQUIRE(dm.basis.size() == 2);
  CHECK(dm.basis[0] == qudit_ket({0, 0, 0}));
  CHECK(dm.basis[1] == qudit_ket({1, 1, 1}));
  CHECK(std::abs(dm.rho(0, 0) - cplx{1.0, 0.0}) < 1e-12);
  CHECK(std::abs(dm.rho(1, 1) - cplx{1.0, 0.0}) < 1e-12);
  CHECK(std::abs(dm.rho(0, 1)) < 1e-12);
  DensityMatrix unit = normalize_trace(dm);
  CHECK(std::abs(unit.rho.trace() - cplx{1.0, 0.0}) < 1e-12);
  CHECK(std::abs(unit.rho(0, 0) - cplx{0.5, 0.0}) < 1e-12);
}

TEST_CASE("environment tracing rejects fock-mode states") {
  Graph g = load_fixture_graph("noon_2_2/graph.json");
  KetMap psi = compute_state(g, rule_for(g));
  CHECK_THROWS_AS(trace_environment(g, psi), std::invalid_argument);
}

TEST_CASE("state JSON round trip") {
  Graph g = load_fixture_graph("noon_3_2_ancilla/graph.json");
  KetMap psi = normalize(compute_state(g, rule_for(g)));
  KetMap back = state_from_json(state_to_json(psi));
  REQUIRE(back.size() == psi.size());
  for (const auto& [k, a] : psi) {
    REQUIRE(back.count(k) == 1);
    CHECK(std::abs(back.at(k) - a) < 1e-15);
  }
}

TEST_CASE("ket rendering") {
  Ket k;
  k.occ = {{{0, 1}}, {}, {{0, 2}, {1, 1}}};
  CHECK(ket_to_string(k) == "|0,_,(0:2,1:1)>");
  CHECK(ket_to_string(qudit_ket({1, 0})) == "|1,0>");
}
