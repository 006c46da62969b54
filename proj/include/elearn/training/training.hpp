#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "elearn/codebook/codebook.hpp"
#include "elearn/landscape/gnfpe.hpp"
#include "elearn/landscape/graph.hpp"

namespace elearn::training {

struct Ablation {
  bool disable_phy = false;
  bool disable_latent = false;
  bool bypass_phi_psi = false;
};

struct LossWeights {
  double latent = 1.0;
  double code = 1.0;
  double phy = 1.0;
};

struct Stage2Config {
  std::size_t epochs = 30;
  // Start codewords per minibatch; every lag pair of a start is in its batch.
  std::size_t start_batch = 16;
  double learning_rate = 3e-3;
  double lr_decay = 0.99;
  std::size_t lag = 100;  // observation steps between paired states
  double laplace_alpha = 1.0;
  double kT = 1.0;
  landscape::FpeOptions fpe;
  Ablation ablation;
  LossWeights weights;
};

struct LossBreakdown {
  double reconstruct = 0.0;
  double vq = 0.0;
  double latent = 0.0;
  double code = 0.0;
  double phy = 0.0;
  double total = 0.0;
};

// Lag pairs grouped by start node. A prediction depends only on its start,
// so the mean loss over all pairs equals the count-weighted mean over starts.
struct LagPairs {
  std::vector<std::int64_t> starts;
  Tensor target_counts;  // starts.size() x n
  std::vector<double> weight;  // pairs per start
  double total = 0.0;
};

LagPairs collect_lag_pairs(const std::vector<std::vector<std::int64_t>>& node_sequences, std::size_t lag,
                           std::size_t n_nodes);

// Laplace-smoothed occupancy frequencies.
std::vector<double> empirical_distribution(std::span<const std::size_t> occupancy, double alpha);

// sum_{b,j} weights(b,j) * -log_q(b,j); with one-hot rows this is -log q[target].
ad::Var loss_code(const ad::Var& log_q, const Tensor& weights);
double loss_code_value(std::span<const double> q, std::size_t target);

// KL(p || boltzmann(E, kT)); E is n x 1.
ad::Var loss_phy(const ad::Var& energy, std::span<const double> p, double kT = 1.0);
double loss_phy_value(std::span<const double> energy, std::span<const double> p, double kT = 1.0);

// sum over rows r of row_weight[r] * ||H(r) - target(r)||^2.
ad::Var loss_latent(const ad::Var& H, const Tensor& target, std::span<const double> row_weight);
// Plain squared error averaged over nodes and channels.
double loss_latent_value(const Tensor& H, const Tensor& target);

struct Stage2EpochLog {
  std::size_t epoch = 0;
  LossBreakdown loss;
};

struct Stage2Result {
  landscape::FpeModel model;
  std::vector<Stage2EpochLog> log;
  // Codeword sequence of each training trajectory.
  std::vector<std::vector<std::int64_t>> sequences;
};

// Builds the landscape graph from the frozen codebook and trains the energy
// function and the neural Fokker-Planck dynamics.
Stage2Result stage2_train(const codebook::CodebookModel& frozen, const std::vector<Trajectory>& trajs,
                          const Stage2Config& cfg, std::uint64_t seed,
                          const std::function<void(const Stage2EpochLog&)>& on_epoch = {});

// Marks the stage-1 parameters of `model` as non-trainable.
void freeze(codebook::CodebookModel& model);

}  // namespace elearn::training
