#include "elearn/numerics/layers.hpp"

#include <cmath>

#include "elearn/numerics/kernels.hpp"

namespace elearn {

Tensor uniform_init(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor normal_init(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor tanh(Tensor t) {
  for (double& v : t.values()) v = std::tanh(v);
  return t;
}

Linear::Linear(std::string name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = Parameter(name + ".weight", uniform_init(in, out, bound, rng));
  bias = Parameter(name + ".bias", uniform_init(1, out, bound, rng));
}

ad::Var Linear::forward(ad::Tape& tape, const ad::Var& x) {
  return ad::add_row(ad::matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

Tensor Linear::apply(const Tensor& x) const {
  if (x.cols() != in_features()) {
    throw Error("Linear '" + weight.name + "': input " + x.shape_string() + " does not match " +
                weight.value.shape_string());
  }
  Tensor out(x.rows(), out_features());
  kernels::gemm(x.data(), weight.value.data(), out.data(), x.rows(), x.cols(), out.cols(), false,
                false, false);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias.value[c];
  }
  return out;
}

Mlp::Mlp(std::string name, const std::vector<std::size_t>& widths, std::mt19937_64& rng) {
  if (widths.size() < 2) throw Error("Mlp '" + name + "' needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(name + ".fc" + std::to_string(i + 1), widths[i], widths[i + 1], rng);
  }
}

ad::Var Mlp::forward(ad::Tape& tape, const ad::Var& x) {
  ad::Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(tape, h);
    if (i + 1 < layers.size()) h = ad::tanh(h);
  }
  return h;
}

Tensor Mlp::apply(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].apply(h);
    if (i + 1 < layers.size()) h = tanh(std::move(h));
  }
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

}  // namespace elearn
