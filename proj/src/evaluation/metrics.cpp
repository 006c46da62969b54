#include "elearn/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "elearn/numerics/random.hpp"

namespace elearn::evaluation {

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("pearson: length mismatch");
  if (a.size() < 2) throw Error("pearson: need at least 2 values");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw Error("pearson: zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

GridSpec GridSpec::square(std::size_t bins, double lo, double hi, std::size_t dims) {
  GridSpec g;
  g.bins = bins;
  g.lower.assign(dims, lo);
  g.upper.assign(dims, hi);
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (bins < 2) throw Error("grid: bins must be at least 2");
  if (lower.empty() || lower.size() != upper.size()) throw Error("grid: bounds must have one entry per dimension");
  for (std::size_t d = 0; d < lower.size(); ++d) {
    if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]) || !(lower[d] < upper[d])) {
      throw Error("grid: bounds of dimension " + std::to_string(d) + " must be finite with lower < upper");
    }
  }
}

std::size_t GridSpec::n_cells() const {
  std::size_t n = 1;
  for (std::size_t d = 0; d < dims(); ++d) n *= bins;
  return n;
}

std::int64_t GridSpec::cell(std::span<const double> x) const {
  if (x.size() != dims()) throw Error("grid: point dimension does not match the grid");
  std::int64_t idx = 0;
  for (std::size_t d = 0; d < dims(); ++d) {
    const double u = (x[d] - lower[d]) / (upper[d] - lower[d]) * static_cast<double>(bins);
    const auto k = static_cast<std::int64_t>(std::clamp(std::floor(u), 0.0, static_cast<double>(bins - 1)));
    idx = idx * static_cast<std::int64_t>(bins) + k;
  }
  return idx;
}

std::vector<std::size_t> GridSpec::coords(std::int64_t cell) const {
  std::vector<std::size_t> c(dims());
  auto rest = static_cast<std::size_t>(cell);
  for (std::size_t d = dims(); d-- > 0;) {
    c[d] = rest % bins;
    rest /= bins;
  }
  return c;
}

std::vector<double> GridSpec::center(std::int64_t cell) const {
  const auto c = coords(cell);
  std::vector<double> x(dims());
  for (std::size_t d = 0; d < dims(); ++d) {
    x[d] = lower[d] + (static_cast<double>(c[d]) + 0.5) * (upper[d] - lower[d]) / static_cast<double>(bins);
  }
  return x;
}

std::vector<double> grid_point(const Trajectory& traj, std::size_t t) {
  if (traj.kind == StateKind::Continuous) {
    const auto s = traj.state(t);
    return {s.begin(), s.end()};
  }
  const auto a = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(traj.state_space_size))));
  const std::int64_t g = traj.code(t);
  return {static_cast<double>(g / a), static_cast<double>(g % a)};
}

std::vector<std::int64_t> discretize(const Trajectory& traj, const GridSpec& grid) {
  std::vector<std::int64_t> out(traj.length());
  for (std::size_t t = 0; t < traj.length(); ++t) out[t] = grid.cell(grid_point(traj, t));
  return out;
}

double rho_T(const EnergyFn& predicted, const EnergyFn& truth, const std::vector<Trajectory>& trajs) {
  std::vector<double> p, q;
  for (const auto& t : trajs) {
    const auto a = predicted(t);
    const auto b = truth(t);
    if (a.size() != t.length() || b.size() != t.length()) throw Error("rho_T: energy count does not match states");
    p.insert(p.end(), a.begin(), a.end());
    q.insert(q.end(), b.begin(), b.end());
  }
  return pearson(p, q);
}

double rho_F(const EnergyFn& predicted, const EnergyFn& truth, const Trajectory& probes) {
  return pearson(predicted(probes), truth(probes));
}

Trajectory grid_probes(const GridSpec& grid, std::size_t obs_dim) {
  if (obs_dim != grid.dims()) throw Error("grid probes: grid dimension does not match observations");
  Trajectory t;
  t.kind = StateKind::Continuous;
  t.dim = obs_dim;
  for (std::size_t c = 0; c < grid.n_cells(); ++c) {
    const auto x = grid.center(static_cast<std::int64_t>(c));
    t.values.insert(t.values.end(), x.begin(), x.end());
  }
  return t;
}

Trajectory genotype_probes(std::size_t n_genotypes, std::size_t state_space_size) {
  Trajectory t;
  t.kind = StateKind::Discrete;
  t.dim = 1;
  t.state_space_size = state_space_size;
  for (std::size_t g = 0; g < n_genotypes; ++g) t.codes.push_back(static_cast<std::int64_t>(g));
  return t;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("js_divergence: length mismatch");
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::clamp(js, 0.0, std::numbers::ln2);
}

namespace {

struct Histograms {
  std::vector<double> marginal;
  std::map<std::int64_t, std::map<std::int64_t, double>> transitions;
  double n_transitions = 0.0;
};

Histograms histograms(const std::vector<Trajectory>& trajs, const GridSpec& grid, std::size_t lag) {
  Histograms h;
  h.marginal.assign(grid.n_cells(), 0.0);
  double total = 0.0;
  for (const auto& t : trajs) {
    const auto cells = discretize(t, grid);
    for (auto c : cells) {
      h.marginal[static_cast<std::size_t>(c)] += 1.0;
      total += 1.0;
    }
    for (std::size_t i = 0; i + lag < cells.size(); ++i) {
      h.transitions[cells[i]][cells[i + lag]] += 1.0;
      h.n_transitions += 1.0;
    }
  }
  if (total == 0.0) throw Error("mjs_tjs: empty trajectory set");
  for (double& v : h.marginal) v /= total;
  return h;
}

}  // namespace

DivergencePair mjs_tjs(const std::vector<Trajectory>& reference, const std::vector<Trajectory>& predicted,
                       const GridSpec& grid, std::size_t lag) {
  if (reference.empty() || predicted.empty()) throw Error("mjs_tjs: both trajectory sets must be non-empty");
  if (lag == 0) throw Error("mjs_tjs: lag must be positive");
  const Histograms a = histograms(reference, grid, lag);
  const Histograms b = histograms(predicted, grid, lag);
  DivergencePair out;
  out.mjs = js_divergence(a.marginal, b.marginal);

  std::map<std::int64_t, double> row_a, row_b;
  for (const auto& [r, row] : a.transitions) {
    for (const auto& [c, v] : row) row_a[r] += v;
  }
  for (const auto& [r, row] : b.transitions) {
    for (const auto& [c, v] : row) row_b[r] += v;
  }
  std::vector<std::int64_t> rows;
  for (const auto& [r, v] : row_a) rows.push_back(r);
  for (const auto& [r, v] : row_b) rows.push_back(r);
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

  double tjs = 0.0, wsum = 0.0;
  std::vector<double> p(grid.n_cells()), q(grid.n_cells());
  for (auto r : rows) {
    const double na = row_a.count(r) ? row_a[r] : 0.0;
    const double nb = row_b.count(r) ? row_b[r] : 0.0;
    const double w = 0.5 * (na / std::max(a.n_transitions, 1.0) + nb / std::max(b.n_transitions, 1.0));
    double js = std::numbers::ln2;
    if (na > 0.0 && nb > 0.0) {
      std::fill(p.begin(), p.end(), 0.0);
      std::fill(q.begin(), q.end(), 0.0);
      for (const auto& [c, v] : a.transitions.at(r)) p[static_cast<std::size_t>(c)] = v / na;
      for (const auto& [c, v] : b.transitions.at(r)) q[static_cast<std::size_t>(c)] = v / nb;
      js = js_divergence(p, q);
    }
    tjs += w * js;
    wsum += w;
  }
  out.tjs = wsum > 0.0 ? std::clamp(tjs / wsum, 0.0, std::numbers::ln2) : 0.0;
  return out;
}

std::vector<double> msm_energy(const std::vector<Trajectory>& trajs, const GridSpec& grid) {
  std::vector<double> counts(grid.n_cells(), 0.0);
  double total = 0.0;
  for (const auto& t : trajs) {
    for (auto c : discretize(t, grid)) {
      counts[static_cast<std::size_t>(c)] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw Error("msm_energy: all counts are zero");
  std::vector<double> e(counts.size());
  std::vector<std::size_t> filled;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0.0) {
      e[c] = -std::log(counts[c] / total);
      filled.push_back(c);
    }
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0.0) continue;
    const auto cc = grid.coords(static_cast<std::int64_t>(c));
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = filled.front();
    for (auto f : filled) {
      const auto fc = grid.coords(static_cast<std::int64_t>(f));
      double d2 = 0.0;
      for (std::size_t d = 0; d < cc.size(); ++d) {
        const double diff = static_cast<double>(cc[d]) - static_cast<double>(fc[d]);
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        arg = f;
      }
    }
    e[c] = e[arg];
  }
  return e;
}

RansacResult ransac_align(std::span<const double> pred, std::span<const double> truth, std::uint64_t seed,
                          std::size_t iterations) {
  if (pred.size() != truth.size()) throw Error("ransac_align: length mismatch");
  const std::size_t n = pred.size();
  if (n < 10) throw Error("ransac_align: need at least 10 points");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(pred) || constant(truth)) throw Error("ransac_align: degenerate (constant) input");

  std::vector<double> tmp(pred.begin(), pred.end());
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(n / 2), tmp.end());
  const double med = tmp[n / 2];
  for (std::size_t i = 0; i < n; ++i) tmp[i] = std::abs(pred[i] - med);
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(n / 2), tmp.end());
  const double threshold = tmp[n / 2];

  auto count_inliers = [&](double a, double b) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) k += std::abs(pred[i] - (a * truth[i] + b)) <= threshold;
    return k;
  };
  auto rng = stream_rng(seed, 0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  double best_a = 0.0, best_b = 0.0;
  std::size_t best = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (truth[i] == truth[j]) continue;
    const double a = (pred[j] - pred[i]) / (truth[j] - truth[i]);
    const double b = pred[i] - a * truth[i];
    const std::size_t k = count_inliers(a, b);
    if (k > best) {
      best = k;
      best_a = a;
      best_b = b;
    }
  }
  if (best == 0) throw Error("ransac_align: no consensus found");

  RansacResult r;
  r.threshold = threshold;
  // Least-squares refit on the consensus set.
  double st = 0.0, sp = 0.0, stt = 0.0, stp = 0.0, m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(pred[i] - (best_a * truth[i] + best_b)) > threshold) continue;
    st += truth[i];
    sp += pred[i];
    stt += truth[i] * truth[i];
    stp += truth[i] * pred[i];
    m += 1.0;
  }
  const double den = m * stt - st * st;
  if (m >= 2.0 && std::abs(den) > 0.0) {
    r.slope = (m * stp - st * sp) / den;
    r.intercept = (sp - r.slope * st) / m;
  } else {
    r.slope = best_a;
    r.intercept = best_b;
  }
  r.inliers.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.inliers[i] = std::abs(pred[i] - (r.slope * truth[i] + r.intercept)) <= threshold;
    r.n_inliers += r.inliers[i];
  }
  return r;
}

}  // namespace elearn::evaluation
