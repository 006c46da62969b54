#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "elearn/numerics/autodiff.hpp"

namespace elearn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients of `loss` against central differences with
// step h. Relative error is |a - n| / max(|a|, |n|, abs_floor). At most
// `entries_per_parameter` randomly chosen entries of each parameter are
// perturbed (all of them when the parameter is smaller).
GradCheckResult gradient_check(const std::function<ad::Var(ad::Tape&)>& loss,
                               const std::vector<Parameter*>& params, std::mt19937_64& rng,
                               double h = 1e-5, std::size_t entries_per_parameter = 8,
                               double abs_floor = 1e-6);

}  // namespace elearn
