#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "elearn/systems/trajectory.hpp"

namespace elearn {

// What the reader should expect; CSV files do not carry lag time or state
// space size.
struct CsvSchema {
  StateKind kind = StateKind::Continuous;
  std::size_t lag_time = 1;
  std::string system_id = "csv";
  // Required for discrete files.
  std::size_t state_space_size = 0;
};

// Header `traj_id,t,x0,...,x{D-1}` (continuous) or `traj_id,t,genotype`
// (discrete); rows sorted by (traj_id, t); floats written with 17 significant
// digits so values round-trip exactly.
void write_trajectories_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);
std::string trajectories_csv(const std::vector<Trajectory>& trajs);

std::vector<Trajectory> load_trajectories_csv(const std::filesystem::path& path, const CsvSchema& schema);
std::vector<Trajectory> parse_trajectories_csv(const std::string& text, const CsvSchema& schema);

}  // namespace elearn
