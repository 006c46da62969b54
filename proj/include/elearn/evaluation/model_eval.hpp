#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "elearn/codebook/codebook.hpp"
#include "elearn/landscape/gnfpe.hpp"
#include "elearn/systems/trajectory.hpp"

namespace elearn::evaluation {

// Energy of the nearest active codeword (latent space) for each state.
class ModelEnergy {
 public:
  ModelEnergy(const codebook::CodebookModel& cb, landscape::FpeModel& fpe);
  std::vector<double> operator()(const Trajectory& traj) const;
  // Landscape node of each state.
  std::vector<std::int64_t> nodes(const Trajectory& traj) const;
  const std::vector<double>& node_energy() const { return energy_; }

 private:
  const codebook::CodebookModel* cb_;
  Tensor active_;  // n x 32
  std::vector<double> energy_;
};

// Rolls the learned dynamics forward: the next node is drawn from the
// predicted lag distribution and a state is sampled from the decoder.
class ModelSampler {
 public:
  ModelSampler(const codebook::CodebookModel& cb, landscape::FpeModel& fpe);

  // Output holds n_steps + 1 states at lag spacing, starting with state
  // `t0` of `start`.
  Trajectory unroll(const Trajectory& start, std::size_t t0, std::size_t n_steps, std::uint64_t seed) const;
  const Tensor& transitions() const { return transitions_; }

 private:
  const codebook::CodebookModel* cb_;
  ModelEnergy energy_;
  Tensor transitions_;  // n x n
  Tensor mean_, stddev_, log_probs_;
};

// --- denoising autoencoder baseline -------------------------------------

struct ApeConfig {
  std::size_t hidden = 32;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  // Small corruption leaves a near-identity map whose score rises away from
  // the data; 0.5 keeps the reconstruction contractive.
  double noise = 0.5;  // corruption std in standardised units
  std::size_t stride = 10;
};

// Tied-weight sigmoid autoencoder on standardised inputs.
struct ApeModel {
  codebook::InputSpec spec;
  std::vector<double> offset, scale;  // standardisation, continuous only
  Parameter W;    // D x H
  Parameter b_h;  // 1 x H
  Parameter b_r;  // 1 x D

  // The closed-form score sum_k softplus(W_k.x + b_h,k) - 0.5 ||x - b_r||^2
  // (up to a constant); it grows with data density.
  double score(std::span<const double> features) const;
  // Energy = -score, evaluated per state.
  std::vector<double> energy(const Trajectory& traj) const;
};

double ape_score(const Tensor& W, std::span<const double> b_h, std::span<const double> b_r,
                 std::span<const double> x);

ApeModel train_ape(const std::vector<Trajectory>& trajs, const ApeConfig& cfg, std::uint64_t seed);

}  // namespace elearn::evaluation
