#pragma once

#include <cstddef>
#include <vector>

#include "elearn/numerics/autodiff.hpp"

namespace elearn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Multiplies the learning rate once per completed epoch.
  double decay_factor = 0.99;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions options);

  // One bias-corrected Adam update using the gradients currently stored in
  // the parameters. Throws naming the first parameter that received no
  // gradient since the last zero_grad().
  void step();
  void zero_grad();
  // Applies the per-epoch exponential decay.
  void end_epoch();

  double effective_learning_rate() const;
  std::size_t step_count() const { return step_count_; }
  std::size_t epoch() const { return epoch_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Parameter*>& parameters() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions options_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  std::size_t step_count_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace elearn
