#pragma once

#include <cstdint>
#include <vector>

#include "elearn/systems/trajectory.hpp"

namespace elearn {

// Adds Gaussian noise whose per-dimension standard deviation is `strength`
// times the pooled standard deviation of that dimension across `trajs`.
// Continuous trajectories only.
std::vector<Trajectory> add_observation_noise(const std::vector<Trajectory>& trajs, double strength,
                                              std::uint64_t seed);

// State t becomes the concatenation of observations t-lookback+1 .. t.
// Output length is length - lookback + 1.
Trajectory delay_embed(const Trajectory& traj, std::size_t lookback);

// Lossy 2-D -> 1-D observation: cos(pi/4) x + sin(pi/4) y.
Trajectory project_diagonal(const Trajectory& traj);

// Pooled per-dimension standard deviation.
std::vector<double> per_dimension_std(const std::vector<Trajectory>& trajs);

}  // namespace elearn
