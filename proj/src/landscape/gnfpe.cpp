#include "elearn/landscape/gnfpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "elearn/codebook/codebook.hpp"
#include "elearn/landscape/fpe_kernels.hpp"

namespace elearn::landscape {

ad::Var propagate(const Graph& g, const ad::Var& x, bool serial) {
  const Tensor& X = x.value();
  if (g.n == 0 || X.rows() % g.n != 0) {
    throw Error("propagate: " + X.shape_string() + " is not node-major over " + std::to_string(g.n) + " nodes");
  }
  const std::size_t width = X.size() / g.n;
  Tensor out(X.rows(), X.cols());
  (serial ? kernels::serial::propagate : kernels::propagate)(g, X.data(), width, out.data());
  const std::size_t ix = x.id();
  return x.tape().record("propagate", std::move(out), {x}, [ix, &g, width, serial](ad::Tape& t, std::size_t self) {
    if (!t.needs_grad(ix)) return;
    const Tensor& go = t.grad(self);
    Tensor tmp(go.rows(), go.cols());
    // The normalised adjacency is symmetric.
    (serial ? kernels::serial::propagate : kernels::propagate)(g, go.data(), width, tmp.data());
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
  });
}

ad::Var fpe_rhs(const Graph& g, const ad::Var& G, const ad::Var& E, const ad::Var& W, const ad::Var& beta,
                std::size_t B, double k, bool serial) {
  const Tensor& Gv = G.value();
  const std::size_t C = Gv.cols();
  if (Gv.rows() != g.n * B) {
    throw Error("fpe_rhs: state " + Gv.shape_string() + " does not match " + std::to_string(g.n) + " nodes x " +
                std::to_string(B) + " starts");
  }
  if (E.rows() != g.n || E.cols() != 1) throw Error("fpe_rhs: energy must be " + shape_string(g.n, 1));
  if (W.rows() != g.nnz() || W.cols() != 1) throw Error("fpe_rhs: attention must be " + shape_string(g.nnz(), 1));
  if (beta.rows() != 1 || beta.cols() != C) throw Error("fpe_rhs: beta must be " + shape_string(1, C));
  for (std::size_t i = 0; i < Gv.size(); ++i) {
    if (!(Gv[i] > 0.0)) {
      throw Error("fpe_rhs: state entry at node " + std::to_string(i / (B * C)) + " is not positive");
    }
  }
  Tensor out(Gv.rows(), C);
  (serial ? kernels::serial::fpe_rhs_forward : kernels::fpe_rhs_forward)(
      g, Gv.data(), E.value().data(), W.value().data(), beta.value().data(), B, C, k, out.data());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) throw Error("fpe_rhs: non-finite derivative at node " + std::to_string(i / (B * C)));
  }
  const std::size_t iG = G.id(), iE = E.id(), iW = W.id(), ib = beta.id();
  return G.tape().record("fpe_rhs", std::move(out), {G, E, W, beta},
                         [&g, iG, iE, iW, ib, B, C, k, serial](ad::Tape& t, std::size_t self) {
                           const Tensor& go = t.grad(self);
                           double* dG = t.needs_grad(iG) ? t.grad(iG).data() : nullptr;
                           double* dE = t.needs_grad(iE) ? t.grad(iE).data() : nullptr;
                           double* dW = t.needs_grad(iW) ? t.grad(iW).data() : nullptr;
                           double* db = t.needs_grad(ib) ? t.grad(ib).data() : nullptr;
                           (serial ? kernels::serial::fpe_rhs_backward : kernels::fpe_rhs_backward)(
                               g, t.value(iG).data(), t.value(iE).data(), t.value(iW).data(),
                               t.value(ib).data(), B, C, k, go.data(), dG, dE, dW, db);
                         });
}

FpeModel::FpeModel(LandscapeGraph g, Tensor cw, FpeOptions o, std::mt19937_64& rng)
    : graph(std::move(g)), codewords(std::move(cw)), opts(o) {
  if (codewords.rows() != graph.n()) {
    throw Error("fpe model: " + std::to_string(codewords.rows()) + " codeword rows for " +
                std::to_string(graph.n()) + " nodes");
  }
  if (opts.n_int == 0 || !(opts.horizon >= 0.0) || !(opts.sigmoid_scale > 0.0)) {
    throw Error("fpe model: n_int must be positive, horizon non-negative and sigmoid_scale positive");
  }
  energy_head = Mlp("energy", {codewords.cols(), kFpeHidden, 1}, rng);
  positions = Parameter("positions", normal_init(graph.n(), kPositionDim, 1.0, rng));
  query = Linear("attention.query", kPositionDim, kFpeHidden, rng);
  key = Linear("attention.key", kPositionDim, kFpeHidden, rng);
  log_beta = Parameter("log_beta", Tensor(1, width(), 0.0));
  if (!opts.bypass_phi_psi) {
    phi1 = Linear("phi.gcn1", kPositionDim + 2, kFpeHidden, rng);
    phi2 = Linear("phi.gcn2", kFpeHidden, kFpeHidden, rng);
    psi1 = Linear("psi.gcn1", kFpeHidden, kFpeHidden, rng);
    psi2 = Linear("psi.gcn2", kFpeHidden, 1, rng);
  }
}

ad::Var FpeModel::energies(ad::Tape& tape) { return energy_head.forward(tape, tape.constant(codewords)); }

std::vector<double> FpeModel::energy_values() {
  const Tensor e = energy_head.apply(codewords);
  return e.values();
}

ad::Var FpeModel::attention(ad::Tape& tape) {
  const Graph& g = graph.graph;
  const ad::Var pos = tape.parameter(positions);
  const ad::Var q = query.forward(tape, pos);
  const ad::Var k = key.forward(tape, pos);
  const ad::Var qe = ad::gather_rows(q, g.owner);
  const ad::Var ke = ad::gather_rows(k, g.neighbors);
  const ad::Var scores = ad::scale(ad::row_sums(ad::mul(qe, ke)), 1.0 / std::sqrt(static_cast<double>(kFpeHidden)));
  return ad::segment_softmax(scores, g.owner, g.n);
}

Tensor FpeModel::initial_distribution(std::span<const std::int64_t> starts) const {
  const std::size_t B = starts.size(), nn = n();
  const double eps = opts.smoothing;
  const double z = 1.0 + eps * static_cast<double>(nn);
  Tensor p(nn * B, 1, eps / z);
  for (std::size_t b = 0; b < B; ++b) {
    if (starts[b] < 0 || static_cast<std::size_t>(starts[b]) >= nn) {
      throw Error("start node " + std::to_string(starts[b]) + " outside " + std::to_string(nn) + " nodes");
    }
    p[static_cast<std::size_t>(starts[b]) * B + b] = (1.0 + eps) / z;
  }
  return p;
}

ad::Var FpeModel::encode(ad::Tape& tape, const ad::Var& energy, const ad::Var& p, std::size_t B) {
  if (opts.bypass_phi_psi) return p;
  std::vector<std::int64_t> node_of_row(n() * B);
  for (std::size_t r = 0; r < node_of_row.size(); ++r) node_of_row[r] = static_cast<std::int64_t>(r / B);
  const ad::Var pos = ad::gather_rows(tape.parameter(positions), node_of_row);
  const ad::Var e = ad::gather_rows(energy, node_of_row);
  const ad::Var parts[] = {pos, p, e};
  const ad::Var x = ad::concat_cols(parts);
  const bool s = opts.serial_kernels;
  const ad::Var h1 = ad::tanh(phi1.forward(tape, propagate(graph.graph, x, s)));
  return ad::tanh(phi2.forward(tape, propagate(graph.graph, h1, s)));
}

ad::Var FpeModel::evolve(ad::Tape& tape, const ad::Var& energy, const ad::Var& H0, std::size_t B) {
  const ad::Var W = attention(tape);
  const ad::Var beta = ad::exp(tape.parameter(log_beta));
  const double dt = opts.horizon / static_cast<double>(opts.n_int);
  ad::Var H = H0;
  for (std::size_t step = 0; step < opts.n_int; ++step) {
    const ad::Var G = opts.bypass_phi_psi ? ad::maximum(H, 1e-10) : ad::softplus(H);
    const ad::Var dH = fpe_rhs(graph.graph, G, energy, W, beta, B, opts.sigmoid_scale, opts.serial_kernels);
    H = ad::add(H, ad::scale(dH, dt));
  }
  return H;
}

ad::Var FpeModel::decode_log_probs(ad::Tape& tape, const ad::Var& H, std::size_t B) {
  const std::size_t nn = n();
  if (opts.bypass_phi_psi) {
    const ad::Var G = ad::transpose(ad::reshape(ad::maximum(H, 1e-10), nn, B));
    return ad::add_col(ad::log(G), ad::neg(ad::log(ad::row_sums(G))));
  }
  const bool s = opts.serial_kernels;
  const ad::Var y = ad::tanh(psi1.forward(tape, propagate(graph.graph, H, s)));
  const ad::Var logits = psi2.forward(tape, propagate(graph.graph, y, s));
  return ad::log_softmax_rows(ad::transpose(ad::reshape(logits, nn, B)));
}

FpeModel::Forward FpeModel::forward(ad::Tape& tape, std::span<const std::int64_t> starts) {
  const std::size_t B = starts.size();
  if (B == 0) throw Error("fpe forward: no start nodes");
  Forward f;
  f.energy = energies(tape);
  f.H0 = encode(tape, f.energy, tape.constant(initial_distribution(starts)), B);
  f.H1 = evolve(tape, f.energy, f.H0, B);
  f.log_q = decode_log_probs(tape, f.H1, B);
  return f;
}

Tensor FpeModel::predict(std::span<const std::int64_t> starts) {
  ad::Tape tape;
  const auto f = forward(tape, starts);
  Tensor q = f.log_q.value();
  for (std::size_t b = 0; b < q.rows(); ++b) {
    auto row = q.row(b);
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v);
      s += v;
    }
    for (double& v : row) v /= s;
  }
  return q;
}

std::vector<double> FpeModel::predict_distribution(std::int64_t start_codeword) {
  const std::int64_t node = graph.node(start_codeword);
  const Tensor q = predict(std::span<const std::int64_t>(&node, 1));
  return q.values();
}

Tensor FpeModel::transition_matrix(std::size_t chunk) {
  const std::size_t nn = n();
  Tensor T(nn, nn);
  std::vector<std::int64_t> starts;
  for (std::size_t s0 = 0; s0 < nn; s0 += chunk) {
    starts.clear();
    for (std::size_t s = s0; s < std::min(nn, s0 + chunk); ++s) starts.push_back(static_cast<std::int64_t>(s));
    const Tensor q = predict(starts);
    for (std::size_t b = 0; b < starts.size(); ++b) {
      std::copy(q.row(b).begin(), q.row(b).end(), T.row(s0 + b).begin());
    }
  }
  return T;
}

Tensor FpeModel::encode_values(std::span<const std::int64_t> nodes) {
  ad::Tape tape;
  const ad::Var e = energies(tape);
  return encode(tape, e, tape.constant(initial_distribution(nodes)), nodes.size()).value();
}

std::vector<Parameter*> FpeModel::parameters() {
  std::vector<Parameter*> out = energy_head.parameters();
  out.push_back(&positions);
  for (Parameter* p : query.parameters()) out.push_back(p);
  for (Parameter* p : key.parameters()) out.push_back(p);
  out.push_back(&log_beta);
  if (!opts.bypass_phi_psi) {
    for (Linear* l : {&phi1, &phi2, &psi1, &psi2}) {
      for (Parameter* p : l->parameters()) out.push_back(p);
    }
  }
  return out;
}

}  // namespace elearn::landscape
