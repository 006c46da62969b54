#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "elearn/systems/trajectory.hpp"

namespace elearn::prinz {

// Separable four-well quartic:
//   V(x) = (x1^4 - x1^3/16 - 2 x1^2 + 3 x1/16) + (x2^4 - x2^3/8 - 2 x2^2 + 3 x2/8)
double potential(std::span<const double> x);
std::array<double, 2> gradient(std::span<const double> x);

// Minima of the two one-dimensional quartics; their products are the four wells.
std::array<double, 2> minima_x1();
std::array<double, 2> minima_x2();
std::vector<std::array<double, 2>> well_centers();

struct Config {
  std::size_t n_trajectories = 10;
  std::size_t n_steps = 100000;
  double dt = 0.01;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  // -1 integrates x <- x - grad V dt (downhill). +1 is the literal uphill form,
  // kept only for auditing.
  double drift_sign = -1.0;
  double init_low = -2.0;
  double init_high = 2.0;
  double escape_bound = 10.0;
  std::size_t lag_time = 100;

  void validate() const;
};

// Euler-Maruyama: x <- x + drift_sign * grad V(x) dt + sigma sqrt(dt) xi.
// Trajectory i uses its own stream derived from (seed, i), so the result does
// not depend on how trajectories are scheduled across threads.
std::vector<Trajectory> simulate(const Config& cfg);

// Same integrator from a given start, used for reference rollouts.
Trajectory simulate_from(const Config& cfg, std::array<double, 2> start, std::uint64_t stream);

}  // namespace elearn::prinz
