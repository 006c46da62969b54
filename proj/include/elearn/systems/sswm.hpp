#pragma once

#include <cstdint>
#include <vector>

#include "elearn/systems/trajectory.hpp"

namespace elearn::sswm {

// Which exponent sign the fixation probability uses.
//   AsWritten: (1 - e^{2s}) / (1 - e^{2Ns})
//   Standard:  (1 - e^{-2s}) / (1 - e^{-2Ns})   (beneficial mutants fix more often)
enum class SignConvention { AsWritten, Standard };

SignConvention parse_sign_convention(const std::string& s);
std::string to_string(SignConvention c);

// Kimura fixation probability of a mutant with selection coefficient s in a
// population of size N. Evaluated through expm1 so the s -> 0 limit 1/N is
// reached smoothly; result clamped to [0, 1].
double fixation_probability(double s, std::int64_t N,
                            SignConvention convention = SignConvention::AsWritten);

// Genotype g = allele(locus 0) * alleles + allele(locus 1).
struct FitnessLandscape {
  std::size_t n_loci = 2;
  std::size_t alleles_per_locus = 64;
  std::vector<double> log_fitness;
  std::vector<double> fitness;
  std::uint64_t seed = 0;

  std::size_t n_genotypes() const { return fitness.size(); }
  std::size_t allele(std::int64_t genotype, std::size_t locus) const;
  std::int64_t genotype(std::size_t a0, std::size_t a1) const;
  void validate() const;
};

struct LandscapeOptions {
  std::size_t n_bumps = 5;
  double amplitude_min = 0.1;
  double amplitude_max = 0.3;
  double width_min = 6.0;
  double width_max = 12.0;
  std::size_t alleles_per_locus = 64;
};

// log-fitness is a sum of Gaussian bumps with random centres, amplitudes and
// widths on the allele grid; fitness = exp(log-fitness).
FitnessLandscape generate_fitness_landscape(std::uint64_t seed, const LandscapeOptions& opts);

// Single-locus mutants of g (Hamming distance 1), in a fixed order.
std::vector<std::int64_t> neighbors(const FitnessLandscape& land, std::int64_t g);

struct Config {
  std::int64_t population_size = 100;
  std::size_t n_trajectories = 1000;
  std::size_t n_steps = 100;
  std::uint64_t seed = 0;
  SignConvention convention = SignConvention::Standard;
  std::size_t lag_time = 10;

  void validate() const;
};

// Each step proposes one uniformly random single-locus mutant j of the current
// genotype i and accepts it with the fixation probability of
// s = f_j / f_i - 1. Initial genotypes are uniform.
std::vector<Trajectory> simulate(const Config& cfg, const FitnessLandscape& land);

Trajectory simulate_from(const Config& cfg, const FitnessLandscape& land, std::int64_t start,
                         std::uint64_t stream);

// Hamming distance between two genotypes.
std::size_t hamming(const FitnessLandscape& land, std::int64_t a, std::int64_t b);

}  // namespace elearn::sswm
