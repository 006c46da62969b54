#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elearn/numerics/tensor.hpp"

namespace elearn {

enum class StateKind { Continuous, Discrete };

// Time-ordered observations of one run of a system.
//
// Continuous states are stored row-major in `values` (length x dim).
// Discrete states are integer indices in [0, state_space_size) kept in
// `codes`; for them `dim` is 1.
struct Trajectory {
  StateKind kind = StateKind::Continuous;
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<std::int64_t> codes;
  std::size_t state_space_size = 0;
  // Lag between modelled transitions, in raw steps.
  std::size_t lag_time = 1;
  std::string system_id;

  std::size_t length() const { return kind == StateKind::Continuous ? (dim ? values.size() / dim : 0) : codes.size(); }
  std::span<const double> state(std::size_t t) const { return {values.data() + t * dim, dim}; }
  std::int64_t code(std::size_t t) const { return codes[t]; }

  // Throws if the invariants (length >= 2, consistent dimension, finite
  // values, codes inside the state space) do not hold.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrajectorySplit {
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
};

// Splits whole trajectories: the first round(train_fraction * n) go to train.
TrajectorySplit split_trajectories(std::vector<Trajectory> trajs, double train_fraction = 0.7);

// Every `stride`-th state of each trajectory (starting at 0).
Trajectory subsample(const Trajectory& traj, std::size_t stride);

// Total number of states across trajectories.
std::size_t total_states(const std::vector<Trajectory>& trajs);

}  // namespace elearn
