#include "elearn/landscape/fpe_kernels.hpp"

#include <cmath>
#include <vector>

namespace elearn::landscape::kernels {

namespace {

inline double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::vector<double> logs_of(const double* G, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::log(G[i]);
  return out;
}

// Below this many multiply-adds the OpenMP team costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

}  // namespace

void propagate(const Graph& g, const double* x, std::size_t width, double* out) {
  const auto n = static_cast<std::ptrdiff_t>(g.n);
#pragma omp parallel for schedule(static) if (g.n * width > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* o = out + i * width;
    const double* xi = x + i * width;
    const double ws = g.self_weight[i];
    for (std::size_t c = 0; c < width; ++c) o[c] = ws * xi[c];
    for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const double* xj = x + static_cast<std::size_t>(g.neighbors[e]) * width;
      const double w = g.edge_weight[e];
      for (std::size_t c = 0; c < width; ++c) o[c] += w * xj[c];
    }
  }
}

void fpe_rhs_forward(const Graph& g, const double* G, const double* E, const double* W, const double* beta,
                     std::size_t B, std::size_t C, double k, double* out) {
  const std::size_t block = B * C;
  const auto logG = logs_of(G, g.n * block);
  const auto n = static_cast<std::ptrdiff_t>(g.n);
#pragma omp parallel for schedule(dynamic, 4) if (g.nnz() * block > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* o = out + i * block;
    for (std::size_t x = 0; x < block; ++x) o[x] = 0.0;
    const double* gi = G + i * block;
    const double* li = logG.data() + i * block;
    for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const auto j = static_cast<std::size_t>(g.neighbors[e]);
      const double dE = E[j] - E[i];
      const double s = sigmoid(k * dE);
      const double w = W[e];
      const double* gj = G + j * block;
      const double* lj = logG.data() + j * block;
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t x = b * C + c;
          const double a = dE + beta[c] * (lj[x] - li[x]);
          const double m = s * gj[x] + (1.0 - s) * gi[x];
          o[x] += w * a * m;
        }
      }
    }
  }
}

void fpe_rhs_backward(const Graph& g, const double* G, const double* E, const double* W, const double* beta,
                      std::size_t B, std::size_t C, double k, const double* gout, double* dG, double* dE,
                      double* dW, double* dbeta) {
  const std::size_t block = B * C;
  const auto logG = logs_of(G, g.n * block);
  const auto n = static_cast<std::ptrdiff_t>(g.n);
  // Per-slot derivative w.r.t. (E_j - E_i) and per-node beta partials, reduced
  // afterwards in a fixed order.
  std::vector<double> d_dE(g.nnz(), 0.0);
  std::vector<double> beta_part(dbeta ? g.n * C : 0, 0.0);
  const bool parallel = g.nnz() * block > kParallelWork;

  // Pass 1: everything owned by the target node i.
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* go = gout + i * block;
    const double* gi = G + i * block;
    const double* li = logG.data() + i * block;
    double* dgi = dG ? dG + i * block : nullptr;
    double* bp = dbeta ? beta_part.data() + i * C : nullptr;
    for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
      const auto j = static_cast<std::size_t>(g.neighbors[e]);
      const double diff = E[j] - E[i];
      const double s = sigmoid(k * diff);
      const double ds = k * s * (1.0 - s);
      const double w = W[e];
      const double* gj = G + j * block;
      const double* lj = logG.data() + j * block;
      double acc_w = 0.0, acc_e = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t x = b * C + c;
          const double dl = lj[x] - li[x];
          const double a = diff + beta[c] * dl;
          const double m = s * gj[x] + (1.0 - s) * gi[x];
          const double o = go[x];
          acc_w += o * a * m;
          acc_e += o * w * (m + a * (gj[x] - gi[x]) * ds);
          if (dgi) dgi[x] += o * w * (-beta[c] / gi[x] * m + a * (1.0 - s));
          if (bp) bp[c] += o * w * dl * m;
        }
      }
      if (dW) dW[e] += acc_w;
      d_dE[e] = acc_e;
    }
  }

  // Pass 2: contributions to the source node j, walking j's own row and
  // mapping each slot to its mirror in the target's row.
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (std::ptrdiff_t jj = 0; jj < n; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    const double* gj = G + j * block;
    const double* lj = logG.data() + j * block;
    double* dgj = dG ? dG + j * block : nullptr;
    double de = 0.0;
    for (std::size_t ej = g.offsets[j]; ej < g.offsets[j + 1]; ++ej) {
      const std::size_t e = g.reverse[ej];
      const auto i = static_cast<std::size_t>(g.owner[e]);
      // (E_j - E_i) enters node i's row with + for j and - for i.
      de += d_dE[e] - d_dE[ej];
      if (!dgj) continue;
      const double diff = E[j] - E[i];
      const double s = sigmoid(k * diff);
      const double w = W[e];
      const double* go = gout + i * block;
      const double* gi = G + i * block;
      const double* li = logG.data() + i * block;
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t x = b * C + c;
          const double a = diff + beta[c] * (lj[x] - li[x]);
          const double m = s * gj[x] + (1.0 - s) * gi[x];
          dgj[x] += go[x] * w * (beta[c] / gj[x] * m + a * s);
        }
      }
    }
    if (dE) dE[j] += de;
  }

  if (dbeta) {
    for (std::size_t i = 0; i < g.n; ++i) {
      for (std::size_t c = 0; c < C; ++c) dbeta[c] += beta_part[i * C + c];
    }
  }
}

namespace serial {

void propagate(const Graph& g, const double* x, std::size_t width, double* out) {
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t c = 0; c < width; ++c) out[i * width + c] = g.self_weight[i] * x[i * width + c];
  }
  for (std::size_t e = 0; e < g.nnz(); ++e) {
    const auto i = static_cast<std::size_t>(g.owner[e]);
    const auto j = static_cast<std::size_t>(g.neighbors[e]);
    for (std::size_t c = 0; c < width; ++c) out[i * width + c] += g.edge_weight[e] * x[j * width + c];
  }
}

void fpe_rhs_forward(const Graph& g, const double* G, const double* E, const double* W, const double* beta,
                     std::size_t B, std::size_t C, double k, double* out) {
  const std::size_t block = B * C;
  for (std::size_t x = 0; x < g.n * block; ++x) out[x] = 0.0;
  for (std::size_t e = 0; e < g.nnz(); ++e) {
    const auto i = static_cast<std::size_t>(g.owner[e]);
    const auto j = static_cast<std::size_t>(g.neighbors[e]);
    const double dE = E[j] - E[i];
    const double s = sigmoid(k * dE);
    for (std::size_t x = 0; x < block; ++x) {
      const double gi = G[i * block + x], gj = G[j * block + x];
      const double a = dE + beta[x % C] * (std::log(gj) - std::log(gi));
      out[i * block + x] += W[e] * a * (s * gj + (1.0 - s) * gi);
    }
  }
}

void fpe_rhs_backward(const Graph& g, const double* G, const double* E, const double* W, const double* beta,
                      std::size_t B, std::size_t C, double k, const double* gout, double* dG, double* dE,
                      double* dW, double* dbeta) {
  const std::size_t block = B * C;
  for (std::size_t e = 0; e < g.nnz(); ++e) {
    const auto i = static_cast<std::size_t>(g.owner[e]);
    const auto j = static_cast<std::size_t>(g.neighbors[e]);
    const double diff = E[j] - E[i];
    const double s = sigmoid(k * diff);
    const double ds = k * s * (1.0 - s);
    const double w = W[e];
    for (std::size_t x = 0; x < block; ++x) {
      const std::size_t c = x % C;
      const double gi = G[i * block + x], gj = G[j * block + x];
      const double dl = std::log(gj) - std::log(gi);
      const double a = diff + beta[c] * dl;
      const double m = s * gj + (1.0 - s) * gi;
      const double o = gout[i * block + x];
      if (dW) dW[e] += o * a * m;
      if (dE) {
        const double d = o * w * (m + a * (gj - gi) * ds);
        dE[j] += d;
        dE[i] -= d;
      }
      if (dG) {
        dG[i * block + x] += o * w * (-beta[c] / gi * m + a * (1.0 - s));
        dG[j * block + x] += o * w * (beta[c] / gj * m + a * s);
      }
      if (dbeta) dbeta[c] += o * w * dl * m;
    }
  }
}

}  // namespace serial

}  // namespace elearn::landscape::kernels
