#include "elearn/systems/trajectory.hpp"

#include <cmath>

namespace elearn {

void Trajectory::validate() const {
  if (lag_time == 0) throw Error("trajectory '" + system_id + "': lag time must be positive");
  if (kind == StateKind::Continuous) {
    if (dim == 0) throw Error("trajectory '" + system_id + "': zero state dimension");
    if (values.size() % dim != 0) {
      throw Error("trajectory '" + system_id + "': " + std::to_string(values.size()) +
                  " values do not form states of dimension " + std::to_string(dim));
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw Error("trajectory '" + system_id + "': non-finite state value");
    }
  } else {
    for (auto c : codes) {
      if (c < 0 || static_cast<std::size_t>(c) >= state_space_size) {
        throw Error("trajectory '" + system_id + "': state " + std::to_string(c) +
                    " outside [0, " + std::to_string(state_space_size) + ")");
      }
    }
  }
  if (length() < 2) throw Error("trajectory '" + system_id + "': needs at least 2 states");
}

TrajectorySplit split_trajectories(std::vector<Trajectory> trajs, double train_fraction) {
  TrajectorySplit out;
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(trajs.size())));
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    (i < n_train ? out.train : out.test).push_back(std::move(trajs[i]));
  }
  return out;
}

Trajectory subsample(const Trajectory& traj, std::size_t stride) {
  if (stride == 0) throw Error("subsample: stride must be positive");
  Trajectory out = traj;
  out.values.clear();
  out.codes.clear();
  for (std::size_t t = 0; t < traj.length(); t += stride) {
    if (traj.kind == StateKind::Continuous) {
      const auto s = traj.state(t);
      out.values.insert(out.values.end(), s.begin(), s.end());
    } else {
      out.codes.push_back(traj.codes[t]);
    }
  }
  return out;
}

std::size_t total_states(const std::vector<Trajectory>& trajs) {
  std::size_t n = 0;
  for (const auto& t : trajs) n += t.length();
  return n;
}

}  // namespace elearn
