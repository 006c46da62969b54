#include <doctest.h>

#include <cmath>
#include <numeric>

#include "elearn/landscape/exact_fpe.hpp"
#include "elearn/landscape/fpe_kernels.hpp"
#include "elearn/landscape/gnfpe.hpp"
#include "elearn/numerics/gradcheck.hpp"
#include "elearn/numerics/random.hpp"
#include "landscape_helpers.hpp"

using namespace elearn;
using namespace elearn::landscape;
using test_helpers::random_connected_graph;

namespace {

// Dense-matrix evaluation of the graph Fokker-Planck right-hand side.
std::vector<double> dense_rhs(const std::vector<std::vector<int>>& A, const std::vector<double>& E,
                              const std::vector<double>& p, double beta) {
  const std::size_t n = E.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!A[i][j]) continue;
      const double Eji = E[j] - E[i];
      const double lg = beta * std::log(p[j] / p[i]);
      if (Eji > 0) out[i] += (Eji + lg) * p[j];
      else if (Eji < 0) out[i] += (Eji + lg) * p[i];
      else out[i] += beta * (p[j] - p[i]);
    }
  }
  return out;
}

std::vector<std::vector<int>> dense_adjacency(const Graph& g) {
  std::vector<std::vector<int>> A(g.n, std::vector<int>(g.n, 0));
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) A[i][g.neighbors[e]] = 1;
  }
  return A;
}

std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (double& v : p) s += (v = u(rng));
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("graph construction") {
  const auto g = Graph::from_edges(4, {{0, 1}, {1, 0}, {1, 1}, {2, 3}, {0, 1}});
  CHECK(g.nnz() == 4);
  CHECK(g.has_edge(1, 0));
  CHECK(!g.has_edge(1, 1));
  CHECK(g.n_components() == 2);
  for (std::size_t e = 0; e < g.nnz(); ++e) {
    CHECK(g.neighbors[g.reverse[e]] == g.owner[e]);
  }
  // Symmetric normalisation weights against the dense formula.
  CHECK(g.self_weight[0] == doctest::Approx(0.5));
  CHECK(g.edge_weight[0] == doctest::Approx(0.5));

  const auto lg = build_topology_from_sequences({{0, 1, 0, 1, 0}}, 5);
  CHECK(lg.n() == 2);
  CHECK(lg.graph.undirected_edges().size() == 1);
  CHECK(lg.node(1) == 1);
  CHECK_THROWS_AS(lg.node(3), Error);
  CHECK_THROWS_AS(build_topology_from_sequences({{2, 2, 2, 2}}, 5), Error);
}

TEST_CASE("exact rhs agrees with the dense formula and conserves mass") {
  auto rng = stream_rng(21, 0);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 19;
    const auto g = random_connected_graph(n, 0.2, rng);
    std::vector<double> E(n);
    for (double& e : E) e = u(rng);
    if (trial % 5 == 0) E[0] = E[n - 1];  // exercise the E_ji = 0 branch
    const auto p = random_distribution(n, rng);
    const auto rhs = exact_fpe_rhs(g, E, p, 1.0);
    const auto oracle = dense_rhs(dense_adjacency(g), E, p, 1.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(rhs[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
      total += rhs[i];
    }
    CHECK(std::abs(total) < 1e-12);
  }
}

TEST_CASE("exact rhs examples and invariants") {
  const auto g = Graph::from_edges(2, {{0, 1}});
  const std::vector<double> flat{0.3, 0.3}, half{0.5, 0.5};
  for (double v : exact_fpe_rhs(g, flat, half, 1.0)) CHECK(v == 0.0);
  const std::vector<double> E{0.2, -0.9};
  const auto q = boltzmann_distribution(E, 1.0);
  for (double v : exact_fpe_rhs(g, E, q, 1.0)) CHECK(std::abs(v) < 1e-12);
  CHECK_THROWS_AS(exact_fpe_rhs(g, E, std::vector<double>{1.0, 0.0}, 1.0), Error);

  // Shift invariance.
  auto rng = stream_rng(4, 0);
  const auto g2 = random_connected_graph(12, 0.3, rng);
  std::vector<double> E2(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double& e : E2) e = u(rng);
  std::vector<double> E3 = E2;
  for (double& e : E3) e += 0.375;  // exactly representable shift
  const auto p = random_distribution(12, rng);
  const auto a = exact_fpe_rhs(g2, E2, p, 1.0), b = exact_fpe_rhs(g2, E3, p, 1.0);
  for (std::size_t i = 0; i < 12; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("boltzmann distribution examples") {
  const std::vector<double> eq{1.0, 1.0, 1.0};
  for (double v : boltzmann_distribution(eq, 0.7)) CHECK(v == doctest::Approx(1.0 / 3.0));
  const std::vector<double> two{0.0, 0.5 * std::log(2.0)};
  const auto q = boltzmann_distribution(two, 0.5);
  CHECK(q[0] == doctest::Approx(2.0 / 3.0));
  CHECK(q[1] == doctest::Approx(1.0 / 3.0));
  const std::vector<double> big{1000.0, 1001.0};
  const auto r = boltzmann_distribution(big, 1.0);
  CHECK(r[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("integration reaches Boltzmann with monotone free energy") {
  auto rng = stream_rng(8, 0);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + trial;
    const auto g = random_connected_graph(n, 0.2, rng);
    std::vector<double> E(n);
    for (double& e : E) e = u(rng);
    const auto p0 = random_distribution(n, rng);
    double prev = free_energy(E, p0, 1.0);
    bool monotone = true, conserved = true;
    const auto p = integrate_exact_fpe(g, E, p0, 1.0, 200.0, 40000, [&](const ExactFpeStep& s) {
      const double f = free_energy(E, s.p, 1.0);
      monotone = monotone && f <= prev + 1e-8;
      prev = f;
      conserved = conserved && std::abs(std::accumulate(s.p.begin(), s.p.end(), 0.0) - 1.0) < 1e-9;
    });
    CHECK(monotone);
    CHECK(conserved);
    CHECK(total_variation(p, boltzmann_distribution(E, 1.0)) < 1e-3);
  }
  // Uniform energies relax to the uniform distribution.
  const auto g = random_connected_graph(8, 0.3, rng);
  const std::vector<double> flat(8, 0.4);
  const auto p = integrate_exact_fpe(g, flat, random_distribution(8, rng), 1.0, 100.0, 10000);
  for (double v : p) CHECK(v == doctest::Approx(0.125).epsilon(1e-3));
}

TEST_CASE("too coarse integration reports negative mass") {
  const auto g = Graph::from_edges(3, {{0, 1}, {1, 2}});
  const std::vector<double> E{-2.0, 2.0, -2.0};
  const std::vector<double> p0{0.01, 0.98, 0.01};
  CHECK_THROWS_WITH_AS(integrate_exact_fpe(g, E, p0, 1.0, 10.0, 2), doctest::Contains("steps"), Error);
}

TEST_CASE("parallel sparse kernels match the serial references") {
  auto rng = stream_rng(12, 0);
  const auto g = random_connected_graph(300, 0.02, rng);
  const std::size_t B = 4, C = 8;
  std::uniform_real_distribution<double> u(0.1, 2.0), v(-1.0, 1.0);
  std::vector<double> G(g.n * B * C), E(g.n), W(g.nnz()), beta(C), gout(g.n * B * C);
  for (double& x : G) x = u(rng);
  for (double& x : E) x = v(rng);
  for (double& x : W) x = u(rng);
  for (double& x : beta) x = u(rng);
  for (double& x : gout) x = v(rng);
  std::vector<double> a(G.size()), b(G.size());
  kernels::fpe_rhs_forward(g, G.data(), E.data(), W.data(), beta.data(), B, C, 10.0, a.data());
  kernels::serial::fpe_rhs_forward(g, G.data(), E.data(), W.data(), beta.data(), B, C, 10.0, b.data());
  CHECK(a == b);
  std::vector<double> pa(g.n * C), pb(g.n * C);
  kernels::propagate(g, G.data(), C, pa.data());
  kernels::serial::propagate(g, G.data(), C, pb.data());
  CHECK(pa == pb);

  std::vector<double> dG1(G.size()), dE1(g.n), dW1(g.nnz()), db1(C);
  std::vector<double> dG2(G.size()), dE2(g.n), dW2(g.nnz()), db2(C);
  kernels::fpe_rhs_backward(g, G.data(), E.data(), W.data(), beta.data(), B, C, 10.0, gout.data(), dG1.data(),
                            dE1.data(), dW1.data(), db1.data());
  kernels::serial::fpe_rhs_backward(g, G.data(), E.data(), W.data(), beta.data(), B, C, 10.0, gout.data(),
                                    dG2.data(), dE2.data(), dW2.data(), db2.data());
  for (std::size_t i = 0; i < dG1.size(); ++i) CHECK(dG1[i] == doctest::Approx(dG2[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < dE1.size(); ++i) CHECK(dE1[i] == doctest::Approx(dE2[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < dW1.size(); ++i) CHECK(dW1[i] == doctest::Approx(dW2[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < C; ++i) CHECK(db1[i] == doctest::Approx(db2[i]).epsilon(1e-12));
}

TEST_CASE("neural rhs examples") {
  auto rng = stream_rng(13, 0);
  const auto g = random_connected_graph(6, 0.3, rng);
  const std::size_t C = 3;
  std::vector<double> G(6 * C, 0.8), E(6, 0.25), W(g.nnz(), 0.5), beta(C, 1.3), out(6 * C);
  kernels::fpe_rhs_forward(g, G.data(), E.data(), W.data(), beta.data(), 1, C, 10.0, out.data());
  for (double v : out) CHECK(v == 0.0);

  // Single edge with a steep sigmoid: flux uses the higher-energy node's H.
  const auto e = Graph::from_edges(2, {{0, 1}});
  const std::vector<double> G2{1.0, 2.0}, E2{0.0, 1.0}, W2{1.0, 1.0}, b2{1.0};
  std::vector<double> o2(2);
  kernels::fpe_rhs_forward(e, G2.data(), E2.data(), W2.data(), b2.data(), 1, 1, 1e6, o2.data());
  CHECK(o2[0] == doctest::Approx((1.0 + std::log(2.0)) * 2.0));
}

TEST_CASE("fpe model: encoder locality, attention, valid predictions, equivariance") {
  auto rng = stream_rng(14, 0);
  const std::size_t n = 9;
  const auto g = random_connected_graph(n, 0.25, rng);
  FpeModel m(test_helpers::landscape_of(g), test_helpers::random_codewords(n, rng), FpeOptions{}, rng);

  {
    ad::Tape tape;
    const auto W = m.attention(tape);
    std::vector<double> row(n, 0.0);
    for (std::size_t e = 0; e < g.nnz(); ++e) row[g.owner[e]] += W.value()[e];
    for (double s : row) CHECK(s == doctest::Approx(1.0));
  }
  const std::vector<std::int64_t> all{0, 1, 2, 3, 4, 5, 6, 7, 8};
  const Tensor H = m.encode_values(all);
  CHECK(H.rows() == n * n);
  CHECK(H.cols() == 64);
  const Tensor T = m.transition_matrix();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(T(i, j) >= 0.0);
      s += T(i, j);
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  const auto q = m.predict_distribution(4);
  CHECK(q.size() == n);
  CHECK_THROWS_AS(m.predict_distribution(42), Error);

  // Relabel nodes with a permutation and move per-node parameters with them.
  std::vector<std::int64_t> perm{3, 7, 0, 8, 1, 5, 2, 6, 4};  // new label of old node i
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  for (auto [a, b] : g.undirected_edges()) edges.emplace_back(perm[a], perm[b]);
  Tensor cw(n, 32);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 32; ++c) cw(perm[i], c) = m.codewords(i, c);
  }
  auto rng2 = stream_rng(99, 0);
  FpeModel p(test_helpers::landscape_of(Graph::from_edges(n, edges)), cw, FpeOptions{}, rng2);
  const auto src = m.parameters(), dst = p.parameters();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k]->value = src[k]->value;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) p.positions.value(perm[i], c) = m.positions.value(i, c);
  }
  const Tensor Tp = p.transition_matrix();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) CHECK(Tp(perm[i], perm[j]) == doctest::Approx(T(i, j)).epsilon(1e-9));
  }
}

TEST_CASE("encoder on a graph without edges is node-local") {
  auto rng = stream_rng(15, 0);
  Graph g = Graph::from_edges(3, {});
  FpeModel m(test_helpers::landscape_of(g), test_helpers::random_codewords(3, rng), FpeOptions{}, rng);
  const std::vector<std::int64_t> s0{0}, s1{1};
  const Tensor a = m.encode_values(s0), b = m.encode_values(s1);
  // Node 2 is neither start in both cases, so its encoding is unchanged.
  for (std::size_t c = 0; c < 64; ++c) CHECK(a(2, c) == b(2, c));
  CHECK(a(0, 0) != b(0, 0));
}

TEST_CASE("fpe networks pass gradient checks") {
  auto rng = stream_rng(16, 0);
  for (bool bypass : {false, true}) {
    const auto g = random_connected_graph(6, 0.3, rng);
    FpeOptions o;
    o.n_int = 3;
    o.bypass_phi_psi = bypass;
    FpeModel m(test_helpers::landscape_of(g), test_helpers::random_codewords(6, rng), o, rng);
    const std::vector<std::int64_t> starts{0, 3};
    Tensor target(2, 6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : target.values()) v = u(rng);
    auto loss = [&](ad::Tape& t) {
      const auto f = m.forward(t, starts);
      return ad::add(ad::sum(ad::mul(f.log_q, t.constant(target))), ad::sum(ad::square(f.energy)));
    };
    const auto r = gradient_check(loss, m.parameters(), rng, 1e-5, 12);
    INFO("bypass=" << bypass << " worst " << r.worst_parameter << " a=" << r.analytic << " n=" << r.numeric);
    CHECK(r.max_relative_error < 1e-4);
  }
}
