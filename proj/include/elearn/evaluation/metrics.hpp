#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "elearn/systems/trajectory.hpp"

namespace elearn::evaluation {

double pearson(std::span<const double> a, std::span<const double> b);

// Uniform grid with `bins` cells per dimension. Discrete genotypes are placed
// on the grid by their allele coordinates (one dimension per locus).
struct GridSpec {
  std::size_t bins = 5;
  std::vector<double> lower;
  std::vector<double> upper;

  static GridSpec square(std::size_t bins, double lo, double hi, std::size_t dims);
  void validate() const;
  std::size_t dims() const { return lower.size(); }
  std::size_t n_cells() const;
  // Points outside the bounds land in the nearest border cell.
  std::int64_t cell(std::span<const double> x) const;
  std::vector<double> center(std::int64_t cell) const;
  std::vector<std::size_t> coords(std::int64_t cell) const;
};

// Grid coordinates of state t: the observation itself, or the allele indices
// of a genotype.
std::vector<double> grid_point(const Trajectory& traj, std::size_t t);
std::vector<std::int64_t> discretize(const Trajectory& traj, const GridSpec& grid);

// Energy assigned to every state of a trajectory.
using EnergyFn = std::function<std::vector<double>(const Trajectory&)>;

// Pearson between predicted and true energies over every state of `trajs`.
double rho_T(const EnergyFn& predicted, const EnergyFn& truth, const std::vector<Trajectory>& trajs);
// Same over a set of probe states covering the state space.
double rho_F(const EnergyFn& predicted, const EnergyFn& truth, const Trajectory& probes);

// Probe states at the centres of a grid (continuous) or every genotype.
Trajectory grid_probes(const GridSpec& grid, std::size_t obs_dim);
Trajectory genotype_probes(std::size_t n_genotypes, std::size_t state_space_size);

// Natural-log Jensen-Shannon divergence; entries absent from both are skipped.
double js_divergence(std::span<const double> p, std::span<const double> q);

struct DivergencePair {
  double mjs = 0.0;
  double tjs = 0.0;
};

// Marginal and lag-`lag` transition divergences on a shared grid. Transition
// rows are weighted by the mean of the two marginals; a row observed in only
// one set contributes ln 2.
DivergencePair mjs_tjs(const std::vector<Trajectory>& reference, const std::vector<Trajectory>& predicted,
                       const GridSpec& grid, std::size_t lag = 1);

// -log frequency per grid cell; empty cells copy their nearest non-empty
// cell (grid-index distance, lowest index on ties).
std::vector<double> msm_energy(const std::vector<Trajectory>& trajs, const GridSpec& grid);

struct RansacResult {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<bool> inliers;
  std::size_t n_inliers = 0;
  double threshold = 0.0;
};

// Robust fit pred = slope * truth + intercept. Residual threshold is the
// median absolute deviation of `pred`.
RansacResult ransac_align(std::span<const double> pred, std::span<const double> truth, std::uint64_t seed = 0,
                          std::size_t iterations = 1000);

}  // namespace elearn::evaluation
