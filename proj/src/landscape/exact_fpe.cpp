#include "elearn/landscape/exact_fpe.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace elearn::landscape {

std::vector<double> exact_fpe_rhs(const Graph& g, std::span<const double> energy, std::span<const double> p,
                                  double beta) {
  if (energy.size() != g.n || p.size() != g.n) throw Error("exact_fpe_rhs: energy and p must have one entry per node");
  if (!(beta > 0.0)) throw Error("exact_fpe_rhs: beta must be positive");
  for (std::size_t i = 0; i < g.n; ++i) {
    if (!(p[i] > 0.0)) {
      throw Error("exact_fpe_rhs: p[" + std::to_string(i) + "] = " + std::to_string(p[i]) +
                  " is not positive; clamp before calling");
    }
  }
  std::vector<double> out(g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    double acc = 0.0;
    for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const auto j = static_cast<std::size_t>(g.neighbors[e]);
      const double dE = energy[j] - energy[i];
      if (dE > 0.0) {
        acc += (dE + beta * std::log(p[j] / p[i])) * p[j];
      } else if (dE < 0.0) {
        acc += (dE + beta * std::log(p[j] / p[i])) * p[i];
      } else {
        acc += beta * (p[j] - p[i]);
      }
    }
    out[i] = acc;
  }
  return out;
}

double free_energy(std::span<const double> energy, std::span<const double> p, double beta) {
  double f = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    f += p[i] * energy[i];
    if (p[i] > 0.0) f += beta * p[i] * std::log(p[i]);
  }
  return f;
}

std::vector<double> integrate_exact_fpe(const Graph& g, std::span<const double> energy,
                                        std::span<const double> p0, double beta, double t_final,
                                        std::size_t n_steps,
                                        const std::function<void(const ExactFpeStep&)>& on_step) {
  if (p0.size() != g.n) throw Error("integrate_exact_fpe: p0 must have one entry per node");
  if (n_steps == 0 || !(t_final >= 0.0)) throw Error("integrate_exact_fpe: need n_steps > 0 and t_final >= 0");
  double mass = 0.0;
  for (double v : p0) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("integrate_exact_fpe: p0 is not a distribution");
    mass += v;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw Error("integrate_exact_fpe: p0 does not sum to 1");

  const double dt = t_final / static_cast<double>(n_steps);
  std::vector<double> p(p0.begin(), p0.end());
  auto clamp_normalise = [&] {
    double s = 0.0;
    for (double& v : p) {
      v = std::max(v, kProbabilityFloor);
      s += v;
    }
    for (double& v : p) v /= s;
  };
  clamp_normalise();
  for (std::size_t step = 0; step < n_steps; ++step) {
    const auto d = exact_fpe_rhs(g, energy, p, beta);
    for (std::size_t i = 0; i < g.n; ++i) {
      p[i] += dt * d[i];
      // Overshooting far below the floor means the step is too coarse.
      if (p[i] < -1e-6) {
        throw Error("integrate_exact_fpe: negative mass " + std::to_string(p[i]) + " at node " +
                    std::to_string(i) + " in step " + std::to_string(step) + "; use more steps");
      }
    }
    clamp_normalise();
    if (on_step) on_step({step + 1, dt * static_cast<double>(step + 1), p});
  }
  return p;
}

std::vector<double> boltzmann_distribution(std::span<const double> energy, double kT) {
  if (!(kT > 0.0)) throw Error("boltzmann_distribution: kT must be positive");
  if (energy.empty()) return {};
  const double lo = *std::min_element(energy.begin(), energy.end());
  std::vector<double> q(energy.size());
  double z = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = std::exp(-(energy[i] - lo) / kT);
    z += q[i];
  }
  for (double& v : q) v /= z;
  return q;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("total_variation: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace elearn::landscape
