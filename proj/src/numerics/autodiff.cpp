#include "elearn/numerics/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "elearn/numerics/kernels.hpp"

namespace elearn {

void Parameter::zero_grad() {
  if (!grad.same_shape(value)) grad = Tensor(value.rows(), value.cols());
  grad.fill(0.0);
  has_grad = false;
}

namespace ad {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  return record("constant", std::move(value), std::span<const Var>{}, nullptr);
}

Var Tape::parameter(Parameter& p) {
  Var v = record("parameter:" + p.name, p.value, std::span<const Var>{}, nullptr);
  nodes_[v.id()].param = &p;
  nodes_[v.id()].needs_grad = p.trainable;
  return v;
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> parents,
                 BackwardFn backward) {
  const std::size_t id = nodes_.size();
  if (!value.all_finite()) {
    throw Error("non-finite value produced by '" + std::string(op) + "' at node " +
                std::to_string(id));
  }
  Node n;
  n.op = std::string(op);
  n.value = std::move(value);
  n.parents.reserve(parents.size());
  for (const auto& p : parents) {
    if (&p.tape() != this) throw Error("'" + n.op + "' mixes nodes from different tapes");
    n.parents.push_back(p.id());
    n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, id);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw Error("backward: loss belongs to a different tape");
  if (nodes_.empty()) throw Error("backward: tape is empty");
  if (loss.value().size() != 1) {
    throw Error("backward: loss must be scalar, got shape " + loss.value().shape_string());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad(loss.id()).fill(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.grad.same_shape(n.value)) continue;
    if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.rows(), p.value.cols());
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += n.grad[i];
      p.has_grad = true;
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

void check_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw Error("shape mismatch in '" + std::string(op) + "': " + a.shape_string() + " vs " +
                b.shape_string());
  }
}

namespace {

// Applies f elementwise; df(x, y) gives dy/dx from the input and output value.
template <class F, class DF>
Var unary(std::string_view name, const Var& a, F f, DF df) {
  Tensor out(a.rows(), a.cols());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(name, std::move(out), {a}, [ia, df](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

void accumulate(Tensor& dst, const Tensor& src, double s = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

std::vector<std::int64_t> copy_index(std::span<const std::int64_t> index) {
  return {index.begin(), index.end()};
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) {
    throw Error("shape mismatch in 'matmul': " + A.shape_string() + " x " + B.shape_string());
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out(m, n);
  kernels::gemm(A.data(), B.data(), out.data(), m, k, n, false, false, false);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      // dA = G * B^T
      kernels::gemm(g.data(), t.value(ib).data(), t.grad(ia).data(), m, n, k, false, true, true);
    }
    if (t.needs_grad(ib)) {
      // dB = A^T * G
      kernels::gemm(t.value(ia).data(), g.data(), t.grad(ib).data(), k, m, n, true, false, true);
    }
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  accumulate(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) accumulate(t.grad(ia), g);
    if (t.needs_grad(ib)) accumulate(t.grad(ib), g);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  accumulate(out, b.value(), -1.0);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) accumulate(t.grad(ia), g);
    if (t.needs_grad(ib)) accumulate(t.grad(ib), g, -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      const Tensor& vb = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const Tensor& va = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  check_same_shape("div", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("div", std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& vb = t.value(ib);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / vb[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const Tensor& y = t.value(self);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * y[i] / vb[i];
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw Error("shape mismatch in 'add_row': " + A.shape_string() + " + " + R.shape_string());
  }
  Tensor out = A;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) += R[c];
  }
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape().record("add_row", std::move(out), {a, row}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) accumulate(t.grad(ia), g);
    if (t.needs_grad(ir)) {
      Tensor& gr = t.grad(ir);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
      }
    }
  });
}

Var add_col(const Var& a, const Var& col) {
  const Tensor& A = a.value();
  const Tensor& C = col.value();
  if (C.cols() != 1 || C.rows() != A.rows()) {
    throw Error("shape mismatch in 'add_col': " + A.shape_string() + " + " + C.shape_string());
  }
  Tensor out = A;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) += C[r];
  }
  const std::size_t ia = a.id(), ic = col.id();
  return a.tape().record("add_col", std::move(out), {a, col}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) accumulate(t.grad(ia), g);
    if (t.needs_grad(ic)) {
      Tensor& gc = t.grad(ic);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c);
        gc[r] += s;
      }
    }
  });
}

Var mul_row(const Var& a, const Var& row) {
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw Error("shape mismatch in 'mul_row': " + A.shape_string() + " * " + R.shape_string());
  }
  Tensor out = A;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) *= R[c];
  }
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape().record("mul_row", std::move(out), {a, row}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& va = t.value(ia);
    const Tensor& vr = t.value(ir);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) * vr[c];
      }
    }
    if (t.needs_grad(ir)) {
      Tensor& gr = t.grad(ir);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c) * va(r, c);
      }
    }
  });
}

Var mul_col(const Var& a, const Var& col) {
  const Tensor& A = a.value();
  const Tensor& C = col.value();
  if (C.cols() != 1 || C.rows() != A.rows()) {
    throw Error("shape mismatch in 'mul_col': " + A.shape_string() + " * " + C.shape_string());
  }
  Tensor out = A;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) *= C[r];
  }
  const std::size_t ia = a.id(), ic = col.id();
  return a.tape().record("mul_col", std::move(out), {a, col}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& va = t.value(ia);
    const Tensor& vc = t.value(ic);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) * vc[r];
      }
    }
    if (t.needs_grad(ic)) {
      Tensor& gc = t.grad(ic);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c) * va(r, c);
        gc[r] += s;
      }
    }
  });
}

Var scale(const Var& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var exp(const Var& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw Error("'log' of non-positive value at input node " + std::to_string(a.id()));
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return unary(
      "softplus", a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Var square(const Var& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var maximum(const Var& a, double floor) {
  return unary("maximum", a, [floor](double x) { return std::max(x, floor); },
               [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Var maximum(const Var& a, const Var& b) {
  check_same_shape("maximum", a.value(), b.value());
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = std::max(A[i], B[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("maximum", std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& va = t.value(ia);
    const Tensor& vb = t.value(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool to_a = va[i] >= vb[i];
      if (to_a && t.needs_grad(ia)) t.grad(ia)[i] += g[i];
      if (!to_a && t.needs_grad(ib)) t.grad(ib)[i] += g[i];
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor::scalar(s), {a}, [=](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const double g = t.grad(self)[0];
    for (double& v : t.grad(ia).values()) v += g;
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record("mean", Tensor::scalar(s / n), {a}, [=](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const double g = t.grad(self)[0] / n;
    for (double& v : t.grad(ia).values()) v += g;
  });
}

Var row_sums(const Var& a) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double s = 0.0;
    for (double v : A.row(r)) s += v;
    out[r] = s;
  }
  const std::size_t ia = a.id();
  return a.tape().record("row_sums", std::move(out), {a}, [=](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[r];
    }
  });
}

Var col_sums(const Var& a) {
  const Tensor& A = a.value();
  Tensor out(1, A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) out[c] += A(r, c);
  }
  const std::size_t ia = a.id();
  return a.tape().record("col_sums", std::move(out), {a}, [=](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c];
    }
  });
}

namespace {

void log_softmax_span(std::span<const double> x, std::span<double> y) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - lse;
}

}  // namespace

Var softmax_rows(const Var& a) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    log_softmax_span(A.row(r), out.row(r));
    for (double& v : out.row(r)) v = std::exp(v);
  }
  const std::size_t ia = a.id();
  return a.tape().record("softmax_rows", std::move(out), {a}, [=](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax_rows(const Var& a) { return log_softmax_blocks(a, a.cols()); }

Var log_softmax_blocks(const Var& a, std::size_t block) {
  const Tensor& A = a.value();
  if (block == 0 || A.cols() % block != 0) {
    throw Error("shape mismatch in 'log_softmax_blocks': " + A.shape_string() + " with block " +
                std::to_string(block));
  }
  Tensor out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t b0 = 0; b0 < A.cols(); b0 += block) {
      log_softmax_span(A.row(r).subspan(b0, block), out.row(r).subspan(b0, block));
    }
  }
  const std::size_t ia = a.id();
  return a.tape().record("log_softmax", std::move(out), {a}, [=](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      for (std::size_t b0 = 0; b0 < y.cols(); b0 += block) {
        double gs = 0.0;
        for (std::size_t c = b0; c < b0 + block; ++c) gs += g(r, c);
        for (std::size_t c = b0; c < b0 + block; ++c) ga(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
      }
    }
  });
}

Var segment_softmax(const Var& a, std::span<const std::int64_t> group, std::size_t n_groups) {
  const Tensor& A = a.value();
  if (A.cols() != 1 || group.size() != A.rows()) {
    throw Error("shape mismatch in 'segment_softmax': " + A.shape_string() + " with " +
                std::to_string(group.size()) + " group ids");
  }
  std::vector<double> mx(n_groups, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto gi = static_cast<std::size_t>(group[i]);
    if (gi >= n_groups) throw Error("segment_softmax: group id out of range");
    mx[gi] = std::max(mx[gi], A[i]);
  }
  std::vector<double> den(n_groups, 0.0);
  Tensor out(A.rows(), 1);
  for (std::size_t i = 0; i < group.size(); ++i) {
    out[i] = std::exp(A[i] - mx[group[i]]);
    den[group[i]] += out[i];
  }
  for (std::size_t i = 0; i < group.size(); ++i) out[i] /= den[group[i]];
  const std::size_t ia = a.id();
  auto gid = copy_index(group);
  return a.tape().record("segment_softmax", std::move(out), {a},
                         [ia, gid = std::move(gid), n_groups](Tape& t, std::size_t self) {
                           if (!t.needs_grad(ia)) return;
                           const Tensor& g = t.grad(self);
                           const Tensor& y = t.value(self);
                           std::vector<double> dot(n_groups, 0.0);
                           for (std::size_t i = 0; i < gid.size(); ++i) dot[gid[i]] += g[i] * y[i];
                           Tensor& ga = t.grad(ia);
                           for (std::size_t i = 0; i < gid.size(); ++i) {
                             ga[i] += y[i] * (g[i] - dot[gid[i]]);
                           }
                         });
}

Var gather_rows(const Var& a, std::span<const std::int64_t> index) {
  const Tensor& A = a.value();
  Tensor out(index.size(), A.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= A.rows()) {
      throw Error("gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                  A.shape_string());
    }
    const auto src = A.row(static_cast<std::size_t>(index[r]));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  const std::size_t ia = a.id();
  return a.tape().record("gather_rows", std::move(out), {a},
                         [ia, idx = copy_index(index)](Tape& t, std::size_t self) {
                           if (!t.needs_grad(ia)) return;
                           const Tensor& g = t.grad(self);
                           Tensor& ga = t.grad(ia);
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                             auto dst = ga.row(static_cast<std::size_t>(idx[r]));
                             const auto src = g.row(r);
                             for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                           }
                         });
}

Var scatter_add_rows(const Var& a, std::span<const std::int64_t> index, std::size_t n_out) {
  const Tensor& A = a.value();
  if (index.size() != A.rows()) {
    throw Error("shape mismatch in 'scatter_add_rows': " + A.shape_string() + " with " +
                std::to_string(index.size()) + " indices");
  }
  Tensor out(n_out, A.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= n_out) {
      throw Error("scatter_add_rows: index " + std::to_string(index[r]) + " out of range");
    }
    auto dst = out.row(static_cast<std::size_t>(index[r]));
    const auto src = A.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
  }
  const std::size_t ia = a.id();
  return a.tape().record("scatter_add_rows", std::move(out), {a},
                         [ia, idx = copy_index(index)](Tape& t, std::size_t self) {
                           if (!t.needs_grad(ia)) return;
                           const Tensor& g = t.grad(self);
                           Tensor& ga = t.grad(ia);
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                             const auto src = g.row(static_cast<std::size_t>(idx[r]));
                             auto dst = ga.row(r);
                             for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                           }
                         });
}

Var pick(const Var& a, std::span<const std::int64_t> index) {
  const Tensor& A = a.value();
  if (index.size() != A.rows()) {
    throw Error("shape mismatch in 'pick': " + A.shape_string() + " with " +
                std::to_string(index.size()) + " indices");
  }
  Tensor out(A.rows(), 1);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= A.cols()) {
      throw Error("pick: column " + std::to_string(index[r]) + " out of range");
    }
    out[r] = A(r, static_cast<std::size_t>(index[r]));
  }
  const std::size_t ia = a.id();
  return a.tape().record("pick", std::move(out), {a},
                         [ia, idx = copy_index(index)](Tape& t, std::size_t self) {
                           if (!t.needs_grad(ia)) return;
                           const Tensor& g = t.grad(self);
                           Tensor& ga = t.grad(ia);
                           for (std::size_t r = 0; r < idx.size(); ++r) {
                             ga(r, static_cast<std::size_t>(idx[r])) += g[r];
                           }
                         });
}

Var transpose(const Var& a) {
  const Tensor& A = a.value();
  Tensor out(A.cols(), A.rows());
  kernels::transpose(A.data(), out.data(), A.rows(), A.cols());
  const std::size_t ia = a.id();
  return a.tape().record("transpose", std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
    }
  });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  Tensor out = a.value();
  out.reshape(rows, cols);
  const std::size_t ia = a.id();
  return a.tape().record("reshape", std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw Error("shape mismatch in 'concat_cols': " + parts[0].value().shape_string() + " vs " +
                  p.value().shape_string());
    }
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p.value()(r, c);
    }
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return parts[0].tape().record("concat_cols", std::move(out), parts,
                                [ids, offsets](Tape& t, std::size_t self) {
                                  const Tensor& g = t.grad(self);
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (!t.needs_grad(ids[k])) continue;
                                    Tensor& gp = t.grad(ids[k]);
                                    for (std::size_t r = 0; r < gp.rows(); ++r) {
                                      for (std::size_t c = 0; c < gp.cols(); ++c) {
                                        gp(r, c) += g(r, offsets[k] + c);
                                      }
                                    }
                                  }
                                });
}

Var straight_through(const Var& value_from, const Var& grad_to) {
  check_same_shape("straight_through", value_from.value(), grad_to.value());
  const std::size_t ig = grad_to.id();
  return grad_to.tape().record("straight_through", value_from.value(), {grad_to},
                               [ig](Tape& t, std::size_t self) {
                                 if (t.needs_grad(ig)) accumulate(t.grad(ig), t.grad(self));
                               });
}

Var stop_gradient(const Var& a) { return a.tape().constant(a.value()); }

}  // namespace ad
}  // namespace elearn
