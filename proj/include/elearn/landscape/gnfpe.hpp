#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "elearn/landscape/graph.hpp"
#include "elearn/numerics/autodiff.hpp"
#include "elearn/numerics/layers.hpp"

namespace elearn::landscape {

// Differentiable wrappers around the sparse kernels. `x` rows are node-major
// (n blocks of equal height).
ad::Var propagate(const Graph& g, const ad::Var& x, bool serial = false);
// G: n*B x C positive, E: n x 1, W: nnz x 1, beta: 1 x C.
ad::Var fpe_rhs(const Graph& g, const ad::Var& G, const ad::Var& E, const ad::Var& W, const ad::Var& beta,
                std::size_t B, double k, bool serial = false);

struct FpeOptions {
  std::size_t n_int = 10;       // Euler substeps per lag
  double horizon = 1.0;         // model time per lag
  double sigmoid_scale = 10.0;  // k
  double smoothing = 1e-6;      // added to one-hot starts before normalising
  bool bypass_phi_psi = false;  // evolve p directly, no encoder or decoder
  bool serial_kernels = false;
};

constexpr std::size_t kFpeHidden = 64;
constexpr std::size_t kPositionDim = 3;

// Energy function, positional encodings, probability encoder and decoder,
// attention and noise coefficients over a fixed landscape graph.
class FpeModel {
 public:
  FpeModel() = default;
  // `codewords` holds the vector of each active codeword, one row per node.
  FpeModel(LandscapeGraph graph, Tensor codewords, FpeOptions opts, std::mt19937_64& rng);

  LandscapeGraph graph;
  Tensor codewords;
  FpeOptions opts;

  Mlp energy_head;       // 32 -> 64 -> 1
  Parameter positions;   // n x 3
  Linear query, key;     // 3 -> 64
  Parameter log_beta;    // 1 x width; beta = exp(log_beta)
  Linear phi1, phi2;     // GCN 5 -> 64 -> 64
  Linear psi1, psi2;     // GCN 64 -> 64 -> 1

  std::size_t n() const { return graph.n(); }
  // Channels of the evolved state.
  std::size_t width() const { return opts.bypass_phi_psi ? 1 : kFpeHidden; }

  ad::Var energies(ad::Tape& tape);   // n x 1
  std::vector<double> energy_values();
  ad::Var attention(ad::Tape& tape);  // nnz x 1, rows sum to 1 per target node

  // Smoothed one-hot distributions in node-major layout (n*B x 1).
  Tensor initial_distribution(std::span<const std::int64_t> start_nodes) const;
  // Phi: n*B x 1 distributions -> n*B x width hidden state.
  ad::Var encode(ad::Tape& tape, const ad::Var& energy, const ad::Var& p, std::size_t B);
  ad::Var evolve(ad::Tape& tape, const ad::Var& energy, const ad::Var& H0, std::size_t B);
  // Psi and normalisation: n*B x width -> B x n log-probabilities.
  ad::Var decode_log_probs(ad::Tape& tape, const ad::Var& H, std::size_t B);

  struct Forward {
    ad::Var energy;
    ad::Var H0;
    ad::Var H1;
    ad::Var log_q;
  };
  Forward forward(ad::Tape& tape, std::span<const std::int64_t> start_nodes);

  // Predicted next-lag distribution for each start node, B x n.
  Tensor predict(std::span<const std::int64_t> start_nodes);
  // Same, addressed by codeword index; throws for inactive codewords.
  std::vector<double> predict_distribution(std::int64_t start_codeword);
  // Row s is the prediction from node s.
  Tensor transition_matrix(std::size_t chunk = 16);
  // Phi of each listed node's smoothed one-hot, rows node-major (n*B x width).
  Tensor encode_values(std::span<const std::int64_t> nodes);

  std::vector<Parameter*> parameters();
};

}  // namespace elearn::landscape
