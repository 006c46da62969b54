#include "elearn/numerics/kernels.hpp"

#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace elearn::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1u << 15;

inline void gemm_row(const double* a, const double* b, double* c, std::size_t i, std::size_t m,
                     std::size_t k, std::size_t n, bool a_trans, bool b_trans, bool accumulate) {
  double* ci = c + i * n;
  if (!accumulate) {
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
  }
  if (!b_trans) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a_trans ? a[p * m + i] : a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      if (a_trans) {
        for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * bj[p];
      } else {
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      }
      ci[j] += s;
    }
  }
}

inline void nearest_row(const double* x, std::size_t i, const double* codes, std::size_t m,
                        std::size_t d, std::int64_t* index, double* dist2) {
  const double* xi = x + i * d;
  double best = std::numeric_limits<double>::infinity();
  std::int64_t best_j = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double* cj = codes + j * d;
    double s = 0.0;
    for (std::size_t q = 0; q < d; ++q) {
      const double diff = xi[q] - cj[q];
      s += diff * diff;
    }
    if (s < best) {
      best = s;
      best_j = static_cast<std::int64_t>(j);
    }
  }
  index[i] = best_j;
  if (dist2 != nullptr) dist2[i] = best;
}

}  // namespace

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
          bool a_trans, bool b_trans, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    gemm_row(a, b, c, static_cast<std::size_t>(i), m, k, n, a_trans, b_trans, accumulate);
  }
}

void nearest_rows(const double* x, std::size_t n, const double* codes, std::size_t m, std::size_t d,
                  std::int64_t* index, double* dist2) {
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * m * d > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    nearest_row(x, static_cast<std::size_t>(i), codes, m, d, index, dist2);
  }
}

void transpose(const double* a, double* out, std::size_t rows, std::size_t cols) {
  const auto n = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < rows; ++i) {
      out[static_cast<std::size_t>(j) * rows + i] = a[i * cols + static_cast<std::size_t>(j)];
    }
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
          bool a_trans, bool b_trans, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(a, b, c, i, m, k, n, a_trans, b_trans, accumulate);
}

void nearest_rows(const double* x, std::size_t n, const double* codes, std::size_t m, std::size_t d,
                  std::int64_t* index, double* dist2) {
  for (std::size_t i = 0; i < n; ++i) nearest_row(x, i, codes, m, d, index, dist2);
}

void transpose(const double* a, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
  }
}

}  // namespace serial

}  // namespace elearn::kernels
