#pragma once

// Sparse kernels behind the neural Fokker-Planck step. Node-major layout: a
// state tensor holds n blocks of B x C values, block i belonging to node i.
//
// The default versions parallelise over nodes with OpenMP and never scatter,
// so results do not depend on the thread count. `serial::` keeps a plain
// scatter formulation used as the test reference.

#include <cstddef>

#include "elearn/landscape/graph.hpp"

namespace elearn::landscape::kernels {

// out = A_hat x, x and out are n x width.
void propagate(const Graph& g, const double* x, std::size_t width, double* out);

// out[i,b,c] = sum_{e=(i<-j)} W[e] * (E_j - E_i + beta[c] (log G[j,b,c] - log G[i,b,c]))
//              * (s_e G[j,b,c] + (1 - s_e) G[i,b,c]),  s_e = sigmoid(k (E_j - E_i)).
void fpe_rhs_forward(const Graph& g, const double* G, const double* E, const double* W, const double* beta,
                     std::size_t B, std::size_t C, double k, double* out);

// Adds the vector-Jacobian product of fpe_rhs_forward for output gradient
// `gout` into dG (n*B*C), dE (n), dW (nnz) and dbeta (C). Any output pointer
// may be null.
void fpe_rhs_backward(const Graph& g, const double* G, const double* E, const double* W, const double* beta,
                      std::size_t B, std::size_t C, double k, const double* gout, double* dG, double* dE,
                      double* dW, double* dbeta);

namespace serial {
void propagate(const Graph& g, const double* x, std::size_t width, double* out);
void fpe_rhs_forward(const Graph& g, const double* G, const double* E, const double* W, const double* beta,
                     std::size_t B, std::size_t C, double k, double* out);
void fpe_rhs_backward(const Graph& g, const double* G, const double* E, const double* W, const double* beta,
                      std::size_t B, std::size_t C, double k, const double* gout, double* dG, double* dE,
                      double* dW, double* dbeta);
}  // namespace serial

}  // namespace elearn::landscape::kernels
