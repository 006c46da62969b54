#include "elearn/systems/observation.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "elearn/numerics/random.hpp"

namespace elearn {

std::vector<double> per_dimension_std(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw Error("per_dimension_std: no trajectories");
  const std::size_t dim = trajs.front().dim;
  std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
  double n = 0.0;
  for (const auto& tr : trajs) {
    for (std::size_t t = 0; t < tr.length(); ++t) {
      n += 1.0;
      const auto s = tr.state(t);
      for (std::size_t d = 0; d < dim; ++d) {
        const double delta = s[d] - mean[d];
        mean[d] += delta / n;
        m2[d] += delta * (s[d] - mean[d]);
      }
    }
  }
  std::vector<double> out(dim);
  for (std::size_t d = 0; d < dim; ++d) out[d] = std::sqrt(m2[d] / n);
  return out;
}

std::vector<Trajectory> add_observation_noise(const std::vector<Trajectory>& trajs, double strength,
                                              std::uint64_t seed) {
  if (!(strength >= 0.0)) throw Error("add_observation_noise: strength must be non-negative");
  for (const auto& tr : trajs) {
    if (tr.kind != StateKind::Continuous) {
      throw Error("add_observation_noise: discrete trajectories cannot take additive noise");
    }
  }
  std::vector<Trajectory> out = trajs;
  if (strength == 0.0 || trajs.empty()) return out;
  const auto sd = per_dimension_std(trajs);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto rng = stream_rng(seed, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto& tr = out[i];
    for (std::size_t t = 0; t < tr.length(); ++t) {
      for (std::size_t d = 0; d < tr.dim; ++d) tr.values[t * tr.dim + d] += strength * sd[d] * normal(rng);
    }
  }
  return out;
}

Trajectory delay_embed(const Trajectory& traj, std::size_t lookback) {
  if (lookback < 1) throw Error("delay_embed: lookback must be at least 1");
  if (traj.kind != StateKind::Continuous) throw Error("delay_embed: continuous trajectories only");
  if (lookback > traj.length()) {
    throw Error("delay_embed: lookback " + std::to_string(lookback) + " exceeds trajectory length " +
                std::to_string(traj.length()));
  }
  Trajectory out = traj;
  out.dim = traj.dim * lookback;
  out.values.clear();
  out.values.reserve((traj.length() - lookback + 1) * out.dim);
  for (std::size_t t = lookback - 1; t < traj.length(); ++t) {
    for (std::size_t k = t + 1 - lookback; k <= t; ++k) {
      const auto s = traj.state(k);
      out.values.insert(out.values.end(), s.begin(), s.end());
    }
  }
  return out;
}

Trajectory project_diagonal(const Trajectory& traj) {
  if (traj.kind != StateKind::Continuous || traj.dim != 2) {
    throw Error("project_diagonal: expects 2-D continuous states");
  }
  const double c = std::cos(std::numbers::pi / 4.0), s = std::sin(std::numbers::pi / 4.0);
  Trajectory out = traj;
  out.dim = 1;
  out.values.clear();
  for (std::size_t t = 0; t < traj.length(); ++t) {
    const auto x = traj.state(t);
    out.values.push_back(c * x[0] + s * x[1]);
  }
  return out;
}

}  // namespace elearn
