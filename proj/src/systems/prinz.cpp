#include "elearn/systems/prinz.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "elearn/numerics/random.hpp"

namespace elearn::prinz {

namespace {

double quartic(double x, double a) { return x * x * x * x - x * x * x * a - 2.0 * x * x + 3.0 * x * a; }
double quartic_d(double x, double a) { return 4.0 * x * x * x - 3.0 * x * x * a - 4.0 * x + 3.0 * a; }
double quartic_dd(double x, double a) { return 12.0 * x * x - 6.0 * x * a - 4.0; }

// Newton iteration for the minimum near `x0`.
double quartic_min(double a, double x0) {
  double x = x0;
  for (int i = 0; i < 50; ++i) x -= quartic_d(x, a) / quartic_dd(x, a);
  return x;
}

constexpr double kA1 = 1.0 / 16.0;
constexpr double kA2 = 1.0 / 8.0;

}  // namespace

double potential(std::span<const double> x) { return quartic(x[0], kA1) + quartic(x[1], kA2); }

std::array<double, 2> gradient(std::span<const double> x) {
  return {quartic_d(x[0], kA1), quartic_d(x[1], kA2)};
}

std::array<double, 2> minima_x1() { return {quartic_min(kA1, -1.0), quartic_min(kA1, 1.0)}; }
std::array<double, 2> minima_x2() { return {quartic_min(kA2, -1.0), quartic_min(kA2, 1.0)}; }

std::vector<std::array<double, 2>> well_centers() {
  std::vector<std::array<double, 2>> out;
  for (double a : minima_x1()) {
    for (double b : minima_x2()) out.push_back({a, b});
  }
  return out;
}

void Config::validate() const {
  if (n_trajectories < 1) throw Error("prinz: n_trajectories must be at least 1");
  if (n_steps < 2) throw Error("prinz: n_steps must be at least 2");
  if (!(dt > 0.0)) throw Error("prinz: dt must be positive");
  if (!(noise_sigma >= 0.0)) throw Error("prinz: noise_sigma must be non-negative");
  if (!(init_low < init_high)) throw Error("prinz: init_low must be below init_high");
  if (lag_time == 0) throw Error("prinz: lag_time must be positive");
}

Trajectory simulate_from(const Config& cfg, std::array<double, 2> start, std::uint64_t stream) {
  auto rng = stream_rng(cfg.seed, stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory traj;
  traj.kind = StateKind::Continuous;
  traj.dim = 2;
  traj.lag_time = cfg.lag_time;
  traj.system_id = "prinz";
  traj.values.reserve(cfg.n_steps * 2);
  std::array<double, 2> x = start;
  const double noise = cfg.noise_sigma * std::sqrt(cfg.dt);
  for (std::size_t t = 0; t < cfg.n_steps; ++t) {
    traj.values.push_back(x[0]);
    traj.values.push_back(x[1]);
    const auto g = gradient(x);
    const double n0 = normal(rng);
    const double n1 = normal(rng);
    x[0] += cfg.drift_sign * g[0] * cfg.dt + noise * n0;
    x[1] += cfg.drift_sign * g[1] * cfg.dt + noise * n1;
    if (!(std::abs(x[0]) <= cfg.escape_bound && std::abs(x[1]) <= cfg.escape_bound)) {
      std::ostringstream msg;
      msg << "prinz: trajectory " << stream << " escaped [-" << cfg.escape_bound << ", "
          << cfg.escape_bound << "]^2 at step " << t + 1 << "; use a smaller dt or noise_sigma";
      throw Error(msg.str());
    }
  }
  return traj;
}

std::vector<Trajectory> simulate(const Config& cfg) {
  cfg.validate();
  std::vector<Trajectory> out(cfg.n_trajectories);
  std::vector<std::array<double, 2>> starts(cfg.n_trajectories);
  {
    // Initial states come from a dedicated stream so they do not shift when
    // n_steps changes.
    auto rng = stream_rng(cfg.seed, 0xffffffffULL);
    std::uniform_real_distribution<double> u(cfg.init_low, cfg.init_high);
    for (auto& s : starts) s = {u(rng), u(rng)};
  }
  std::string error;
  const auto n = static_cast<std::ptrdiff_t>(cfg.n_trajectories);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          simulate_from(cfg, starts[static_cast<std::size_t>(i)], static_cast<std::uint64_t>(i));
    } catch (const Error& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw Error(error);
  return out;
}

}  // namespace elearn::prinz
