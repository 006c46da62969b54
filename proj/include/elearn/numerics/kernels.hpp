#pragma once

// Dense inner loops shared by the autodiff primitives and the inference paths.
//
// Every kernel exists twice: an OpenMP version in `elearn::kernels` and a plain
// loop in `elearn::kernels::serial` that the tests and the benchmark compare
// against. Parallel versions split work by output row only and keep the serial
// accumulation order inside each row, so both produce bit-identical results
// for any thread count.

#include <cstddef>
#include <cstdint>

namespace elearn::kernels {

// C (m x n) = op(A) * op(B), where op(A) is m x k and op(B) is k x n.
// `a_trans` means A is stored k x m; `b_trans` means B is stored n x k.
// With `accumulate` the product is added to C instead of overwriting it.
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
          bool a_trans, bool b_trans, bool accumulate);

// For each of the n query rows in x (n x d), the index of the nearest of the
// m rows in codes (m x d) under squared Euclidean distance. Ties go to the
// lowest index. `dist2` may be null.
void nearest_rows(const double* x, std::size_t n, const double* codes, std::size_t m, std::size_t d,
                  std::int64_t* index, double* dist2);

// out = a (rows x cols) transposed.
void transpose(const double* a, double* out, std::size_t rows, std::size_t cols);

// Number of threads the parallel kernels will use.
int max_threads();

namespace serial {

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
          bool a_trans, bool b_trans, bool accumulate);
void nearest_rows(const double* x, std::size_t n, const double* codes, std::size_t m, std::size_t d,
                  std::int64_t* index, double* dist2);
void transpose(const double* a, double* out, std::size_t rows, std::size_t cols);

}  // namespace serial

}  // namespace elearn::kernels
