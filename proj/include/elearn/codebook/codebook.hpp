#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "elearn/numerics/autodiff.hpp"
#include "elearn/numerics/layers.hpp"
#include "elearn/systems/trajectory.hpp"

namespace elearn::codebook {

constexpr std::size_t kCodeDim = 32;
constexpr std::size_t kHidden = 64;
constexpr double kMinStd = 1e-3;

// How observed states are turned into encoder inputs.
struct InputSpec {
  StateKind kind = StateKind::Continuous;
  // Continuous: observation dimension. Discrete: number of loci.
  std::size_t obs_dim = 2;
  // Discrete only; genotypes are fed as one one-hot block per locus.
  std::size_t alleles_per_locus = 64;

  std::size_t input_dim() const {
    return kind == StateKind::Continuous ? obs_dim : obs_dim * alleles_per_locus;
  }
  std::size_t n_states() const;  // discrete state-space size

  static InputSpec for_trajectory(const Trajectory& t);
};

// Flat pool of observed states that can be turned into feature rows.
class StatePool {
 public:
  explicit StatePool(InputSpec spec) : spec_(spec) {}

  void add(const Trajectory& traj, std::size_t stride = 1);
  void add_state(std::span<const double> x);
  void add_code(std::int64_t g);

  std::size_t size() const;
  const InputSpec& spec() const { return spec_; }
  // Encoder input rows for the listed samples.
  Tensor features(std::span<const std::size_t> rows) const;
  Tensor all_features() const;
  std::int64_t code(std::size_t i) const { return codes_[i]; }
  std::span<const double> state(std::size_t i) const { return {values_.data() + i * spec_.obs_dim, spec_.obs_dim}; }

 private:
  InputSpec spec_;
  std::vector<double> values_;
  std::vector<std::int64_t> codes_;
};

Tensor features_of(const Trajectory& traj, const InputSpec& spec);

// Distribution produced by the decoder for a batch of codewords.
struct Decoded {
  StateKind kind = StateKind::Continuous;
  ad::Var mean;       // continuous: B x D
  ad::Var stddev;     // continuous: B x D, in [kMinStd, 1]
  ad::Var log_probs;  // discrete: B x (loci * alleles), log-softmax per locus block
};

struct Encoder {
  Encoder() = default;
  Encoder(const InputSpec& spec, std::mt19937_64& rng);
  Mlp net;  // D -> 64 -> 32, tanh hidden
  ad::Var forward(ad::Tape& tape, const ad::Var& x) { return net.forward(tape, x); }
  Tensor apply(const Tensor& x) const;
  std::vector<Parameter*> parameters() { return net.parameters(); }
};

struct Decoder {
  Decoder() = default;
  Decoder(const InputSpec& spec, std::mt19937_64& rng);
  InputSpec spec;
  Mlp trunk;          // 32 -> 64 -> 64, tanh after every layer
  Linear mean_head;   // continuous: 64 -> D
  Linear std_head;    // continuous: 64 -> D, sigmoid scaled into [kMinStd, 1]
  Linear logit_head;  // discrete: 64 -> loci * alleles

  Decoded forward(ad::Tape& tape, const ad::Var& code) ;
  std::vector<Parameter*> parameters();
};

struct QuantizationResult {
  std::vector<double> latent;
  std::int64_t index = 0;
  double distance = 0.0;
  std::vector<double> codeword;
};

// Encoder, decoder and the learnable codebook with per-codeword occupancy.
struct CodebookModel {
  InputSpec spec;
  Encoder encoder;
  Decoder decoder;
  Parameter codewords;  // K x 32
  std::vector<std::size_t> occupancy;

  CodebookModel() = default;
  CodebookModel(const InputSpec& spec, std::size_t K, std::mt19937_64& rng);

  std::size_t K() const { return codewords.value.rows(); }
  Tensor encode(const Tensor& features) const;
  // Nearest codeword (lowest index on ties) for each latent row.
  std::vector<std::int64_t> assign(const Tensor& latents) const;
  QuantizationResult quantize(std::span<const double> latent) const;
  std::vector<std::int64_t> active() const;
  double activation_ratio() const;
  std::vector<Parameter*> parameters();
};

// --- losses ---------------------------------------------------------------

// Mean over rows of the Gaussian negative log-likelihood summed over dims.
ad::Var gaussian_nll(const ad::Var& x, const ad::Var& mean, const ad::Var& stddev);
// Mean over rows of -sum_locus log p(allele); `codes` are genotype indices.
ad::Var categorical_nll(const ad::Var& log_probs, std::span<const std::int64_t> codes,
                        std::size_t alleles_per_locus);
// Mean over rows of ||sg[s] - c||^2 + beta ||s - sg[c]||^2.
ad::Var vq_loss(const ad::Var& latent, const ad::Var& codeword, double beta_commit);

double gaussian_nll_value(std::span<const double> x, std::span<const double> mean,
                          std::span<const double> stddev);
double vq_loss_value(std::span<const double> latent, std::span<const double> codeword, double beta_commit);

// --- stage 1 ---------------------------------------------------------------

// Data: encodings of K random training states.
// Uniform: U(-1/K, 1/K) in latent space.
// Box: encodings of K states drawn uniformly over the observed bounding box
// (or uniformly over all genotypes for discrete systems).
enum class CodebookInit { Data, Uniform, Box };
CodebookInit parse_codebook_init(const std::string& s);
std::string to_string(CodebookInit init);

struct Stage1Config {
  std::size_t K = 100;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double learning_rate = 2e-3;
  double lr_decay = 0.99;
  double beta_commit = 0.25;
  // Use every `stride`-th observed state.
  std::size_t stride = 10;
  CodebookInit init = CodebookInit::Data;
};

struct Stage1EpochLog {
  std::size_t epoch = 0;
  double reconstruct = 0.0;
  double vq = 0.0;
  std::size_t active = 0;
};

struct Stage1Result {
  CodebookModel model;
  std::vector<Stage1EpochLog> log;
};

// Minimises L_reconstruct + L_vq with Adam. Occupancy in the result counts
// the training samples assigned to each codeword after training.
Stage1Result stage1_train(const std::vector<Trajectory>& trajs, const Stage1Config& cfg, std::uint64_t seed,
                          const std::function<void(const Stage1EpochLog&)>& on_epoch = {});

// Recomputes occupancy of `model` over the strided states of `trajs`.
void recount_occupancy(CodebookModel& model, const std::vector<Trajectory>& trajs, std::size_t stride);

}  // namespace elearn::codebook
