#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "elearn/numerics/autodiff.hpp"

namespace elearn {

// y = x W + b, W stored in x out.
struct Linear {
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out, std::mt19937_64& rng);

  Parameter weight;
  Parameter bias;

  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }

  ad::Var forward(ad::Tape& tape, const ad::Var& x);
  // Plain evaluation without recording.
  Tensor apply(const Tensor& x) const;
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

// Fully connected stack with tanh between layers and a linear last layer.
struct Mlp {
  Mlp() = default;
  Mlp(std::string name, const std::vector<std::size_t>& widths, std::mt19937_64& rng);

  std::vector<Linear> layers;

  std::size_t in_features() const { return layers.front().in_features(); }
  std::size_t out_features() const { return layers.back().out_features(); }

  ad::Var forward(ad::Tape& tape, const ad::Var& x);
  Tensor apply(const Tensor& x) const;
  std::vector<Parameter*> parameters();
};

// Uniform(-1/sqrt(in), 1/sqrt(in)) initialisation, as in common frameworks.
Tensor uniform_init(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng);
Tensor normal_init(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

// Elementwise tanh on a plain tensor.
Tensor tanh(Tensor t);

}  // namespace elearn
