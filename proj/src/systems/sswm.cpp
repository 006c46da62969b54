#include "elearn/systems/sswm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "elearn/numerics/random.hpp"

namespace elearn::sswm {

SignConvention parse_sign_convention(const std::string& s) {
  if (s == "as_written") return SignConvention::AsWritten;
  if (s == "standard") return SignConvention::Standard;
  throw Error("unknown kimura_sign_convention '" + s + "' (expected as_written or standard)");
}

std::string to_string(SignConvention c) {
  return c == SignConvention::AsWritten ? "as_written" : "standard";
}

double fixation_probability(double s, std::int64_t N, SignConvention convention) {
  if (N < 2) throw Error("fixation_probability: population size must be at least 2");
  const double n = static_cast<double>(N);
  // Both conventions reduce to expm1(x) / expm1(N x) with x = +-2s.
  const double x = convention == SignConvention::AsWritten ? 2.0 * s : -2.0 * s;
  if (x == 0.0) return 1.0 / n;
  double p;
  if (x > 0.0) {
    // e^{x - Nx} * expm1(-x) / expm1(-Nx) avoids overflow for large N x.
    p = std::exp(x - n * x) * std::expm1(-x) / std::expm1(-n * x);
  } else {
    p = std::expm1(x) / std::expm1(n * x);
  }
  return std::clamp(p, 0.0, 1.0);
}

std::size_t FitnessLandscape::allele(std::int64_t genotype, std::size_t locus) const {
  const auto g = static_cast<std::size_t>(genotype);
  return locus == 0 ? g / alleles_per_locus : g % alleles_per_locus;
}

std::int64_t FitnessLandscape::genotype(std::size_t a0, std::size_t a1) const {
  return static_cast<std::int64_t>(a0 * alleles_per_locus + a1);
}

void FitnessLandscape::validate() const {
  if (n_loci != 2) throw Error("fitness landscape: only two loci are supported");
  if (fitness.size() != alleles_per_locus * alleles_per_locus) {
    throw Error("fitness landscape: table size does not match alleles^2");
  }
  for (double f : fitness) {
    if (!(f > 0.0) || !std::isfinite(f)) throw Error("fitness landscape: fitness must be positive");
  }
}

FitnessLandscape generate_fitness_landscape(std::uint64_t seed, const LandscapeOptions& opts) {
  if (opts.n_bumps < 1) throw Error("fitness landscape: n_bumps must be at least 1");
  auto rng = stream_rng(seed, 0);
  const std::size_t A = opts.alleles_per_locus;
  std::uniform_real_distribution<double> pos(0.0, static_cast<double>(A - 1));
  std::uniform_real_distribution<double> amp(opts.amplitude_min, opts.amplitude_max);
  std::uniform_real_distribution<double> width(opts.width_min, opts.width_max);
  struct Bump {
    double c0, c1, a, w;
  };
  std::vector<Bump> bumps;
  for (std::size_t b = 0; b < opts.n_bumps; ++b) {
    const double c0 = pos(rng), c1 = pos(rng), a = amp(rng), w = width(rng);
    bumps.push_back({c0, c1, a, w});
  }
  FitnessLandscape land;
  land.alleles_per_locus = A;
  land.seed = seed;
  land.log_fitness.assign(A * A, 0.0);
  land.fitness.assign(A * A, 0.0);
  for (std::size_t i = 0; i < A; ++i) {
    for (std::size_t j = 0; j < A; ++j) {
      double lf = 0.0;
      for (const auto& b : bumps) {
        const double d0 = static_cast<double>(i) - b.c0;
        const double d1 = static_cast<double>(j) - b.c1;
        lf += b.a * std::exp(-(d0 * d0 + d1 * d1) / (2.0 * b.w * b.w));
      }
      land.log_fitness[i * A + j] = lf;
      land.fitness[i * A + j] = std::exp(lf);
    }
  }
  return land;
}

std::vector<std::int64_t> neighbors(const FitnessLandscape& land, std::int64_t g) {
  const std::size_t A = land.alleles_per_locus;
  const std::size_t a0 = land.allele(g, 0), a1 = land.allele(g, 1);
  std::vector<std::int64_t> out;
  out.reserve(2 * (A - 1));
  for (std::size_t a = 0; a < A; ++a) {
    if (a != a0) out.push_back(land.genotype(a, a1));
  }
  for (std::size_t a = 0; a < A; ++a) {
    if (a != a1) out.push_back(land.genotype(a0, a));
  }
  return out;
}

std::size_t hamming(const FitnessLandscape& land, std::int64_t a, std::int64_t b) {
  return static_cast<std::size_t>(land.allele(a, 0) != land.allele(b, 0)) +
         static_cast<std::size_t>(land.allele(a, 1) != land.allele(b, 1));
}

void Config::validate() const {
  if (population_size < 2) throw Error("sswm: population size must be at least 2");
  if (n_trajectories < 1) throw Error("sswm: n_trajectories must be at least 1");
  if (n_steps < 2) throw Error("sswm: n_steps must be at least 2");
  if (lag_time == 0) throw Error("sswm: lag_time must be positive");
}

Trajectory simulate_from(const Config& cfg, const FitnessLandscape& land, std::int64_t start,
                         std::uint64_t stream) {
  auto rng = stream_rng(cfg.seed, stream);
  const std::size_t A = land.alleles_per_locus;
  std::uniform_int_distribution<std::size_t> pick_locus(0, 1);
  std::uniform_int_distribution<std::size_t> pick_allele(0, A - 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Trajectory traj;
  traj.kind = StateKind::Discrete;
  traj.dim = 1;
  traj.state_space_size = land.n_genotypes();
  traj.lag_time = cfg.lag_time;
  traj.system_id = "sswm";
  traj.codes.reserve(cfg.n_steps);
  std::int64_t g = start;
  for (std::size_t t = 0; t < cfg.n_steps; ++t) {
    traj.codes.push_back(g);
    const std::size_t locus = pick_locus(rng);
    const std::size_t current = land.allele(g, locus);
    std::size_t next = pick_allele(rng);
    if (next >= current) ++next;  // uniform over the 63 other alleles
    const std::int64_t j =
        locus == 0 ? land.genotype(next, land.allele(g, 1)) : land.genotype(land.allele(g, 0), next);
    const double s = land.fitness[static_cast<std::size_t>(j)] / land.fitness[static_cast<std::size_t>(g)] - 1.0;
    if (u(rng) < fixation_probability(s, cfg.population_size, cfg.convention)) g = j;
  }
  return traj;
}

std::vector<Trajectory> simulate(const Config& cfg, const FitnessLandscape& land) {
  cfg.validate();
  land.validate();
  std::vector<std::int64_t> starts(cfg.n_trajectories);
  {
    auto rng = stream_rng(cfg.seed, 0xffffffffULL);
    std::uniform_int_distribution<std::int64_t> u(0, static_cast<std::int64_t>(land.n_genotypes()) - 1);
    for (auto& s : starts) s = u(rng);
  }
  std::vector<Trajectory> out(cfg.n_trajectories);
  const auto n = static_cast<std::ptrdiff_t>(cfg.n_trajectories);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        simulate_from(cfg, land, starts[static_cast<std::size_t>(i)], static_cast<std::uint64_t>(i));
  }
  return out;
}

}  // namespace elearn::sswm
