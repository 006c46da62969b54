#pragma once

#include <functional>
#include <span>
#include <vector>

#include "elearn/landscape/graph.hpp"

namespace elearn::landscape {

constexpr double kProbabilityFloor = 1e-10;

// Probability flow between graph neighbours driven by energy differences and
// the entropic term beta * log(p_j / p_i). Requires p > 0.
std::vector<double> exact_fpe_rhs(const Graph& g, std::span<const double> energy, std::span<const double> p,
                                  double beta);

// F(p) = sum p_i E_i + beta sum p_i log p_i.
double free_energy(std::span<const double> energy, std::span<const double> p, double beta);

struct ExactFpeStep {
  std::size_t step = 0;
  double time = 0.0;
  std::span<const double> p;
};

// Explicit Euler. Entries are clamped to kProbabilityFloor and renormalised
// after each step. `on_step` (optional) sees the state after every step.
std::vector<double> integrate_exact_fpe(const Graph& g, std::span<const double> energy,
                                        std::span<const double> p0, double beta, double t_final,
                                        std::size_t n_steps,
                                        const std::function<void(const ExactFpeStep&)>& on_step = {});

std::vector<double> boltzmann_distribution(std::span<const double> energy, double kT);

double total_variation(std::span<const double> a, std::span<const double> b);

}  // namespace elearn::landscape
