#include <doctest.h>

#include <cmath>
#include <numeric>

#include "elearn/numerics/adam.hpp"
#include "elearn/numerics/autodiff.hpp"
#include "elearn/numerics/gradcheck.hpp"
#include "elearn/numerics/kernels.hpp"
#include "elearn/numerics/layers.hpp"
#include "elearn/numerics/random.hpp"

using namespace elearn;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (double& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  Tensor t(2, 3, 1.5);
  CHECK(t.size() == 6);
  CHECK(t(1, 2) == 1.5);
  CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("primitive examples") {
  ad::Tape tape;
  Tensor I(3, 3);
  for (int i = 0; i < 3; ++i) I(i, i) = 1.0;
  const Tensor v(3, 1, std::vector<double>{0.3, -2.0, 7.0});
  const auto r = ad::matmul(tape.constant(I), tape.constant(v));
  CHECK(r.value().values() == v.values());
  CHECK(ad::sigmoid(tape.constant(Tensor::scalar(0.0))).item() == doctest::Approx(0.5));
  const auto sm = ad::softmax_rows(tape.constant(Tensor(1, 3, 1.0)));
  for (double x : sm.value().values()) CHECK(x == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("shape mismatch names the primitive and both shapes") {
  ad::Tape tape;
  try {
    ad::add(tape.constant(Tensor(2, 3)), tape.constant(Tensor(3, 2)));
    FAIL("expected a throw");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[3, 2]") != std::string::npos);
  }
}

TEST_CASE("non-finite intermediate is rejected with a node index") {
  ad::Tape tape;
  const auto x = tape.constant(Tensor::scalar(0.0));
  try {
    ad::log(x);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("node") != std::string::npos);
  }
}

TEST_CASE("backward basics") {
  Parameter x("x", Tensor(2, 3, 0.7));
  {
    ad::Tape tape;
    tape.backward(ad::sum(tape.parameter(x)));
  }
  for (double g : x.grad.values()) CHECK(g == 1.0);

  Parameter y("y", Tensor(1, 2, std::vector<double>{1.0, 2.0}));
  ad::Tape tape;
  const auto py = tape.parameter(y);
  tape.backward(ad::sum(ad::mul(py, py)));
  CHECK(y.grad(0, 0) == doctest::Approx(2.0));
  CHECK(y.grad(0, 1) == doctest::Approx(4.0));

  // Repeated backward calls accumulate.
  ad::Tape tape2;
  const auto py2 = tape2.parameter(y);
  tape2.backward(ad::sum(ad::mul(py2, py2)));
  CHECK(y.grad(0, 1) == doctest::Approx(8.0));

  ad::Tape tape3;
  CHECK_THROWS_AS(tape3.backward(tape3.parameter(y)), Error);
}

TEST_CASE("straight-through passes the gradient to the designated input") {
  Parameter s("s", Tensor(1, 2, std::vector<double>{0.1, 0.2}));
  ad::Tape tape;
  const auto c = tape.constant(Tensor(1, 2, std::vector<double>{3.0, -1.0}));
  const auto st = ad::straight_through(c, tape.parameter(s));
  CHECK(st.value().values() == c.value().values());
  tape.backward(ad::sum(ad::mul(st, tape.constant(Tensor(1, 2, std::vector<double>{5.0, 7.0})))));
  CHECK(s.grad(0, 0) == 5.0);
  CHECK(s.grad(0, 1) == 7.0);
}

TEST_CASE("every primitive matches central differences") {
  auto rng = stream_rng(11, 0);
  Parameter a("a", random_tensor(3, 4, rng, 0.5, 1.5));
  Parameter b("b", random_tensor(4, 2, rng));
  Parameter c("c", random_tensor(3, 4, rng, 0.5, 1.5));
  Parameter row("row", random_tensor(1, 4, rng));
  const std::vector<std::int64_t> idx{2, 0, 2, 1};
  const std::vector<std::int64_t> group{0, 0, 1, 1, 1, 2, 2, 0, 1, 2, 0, 1};
  auto loss = [&](ad::Tape& t) {
    const auto A = t.parameter(a), B = t.parameter(b), C = t.parameter(c), R = t.parameter(row);
    std::vector<ad::Var> terms;
    terms.push_back(ad::sum(ad::matmul(A, B)));
    terms.push_back(ad::sum(ad::div(ad::mul(A, C), ad::add(C, A))));
    terms.push_back(ad::mean(ad::log(ad::exp(ad::tanh(A)))));
    terms.push_back(ad::sum(ad::sigmoid(ad::add_row(A, R))));
    terms.push_back(ad::sum(ad::mul(ad::softmax_rows(A), C)));
    terms.push_back(ad::sum(ad::mul(ad::log_softmax_blocks(C, 2), A)));
    terms.push_back(ad::sum(ad::mul(ad::maximum(A, C), C)));
    terms.push_back(ad::sum(ad::softplus(ad::sub(A, C))));
    terms.push_back(ad::sum(ad::square(ad::gather_rows(B, idx))));
    terms.push_back(ad::sum(ad::square(ad::scatter_add_rows(A, std::vector<std::int64_t>{1, 0, 1}, 2))));
    const auto flat = ad::reshape(A, 12, 1);
    terms.push_back(ad::sum(ad::mul(ad::segment_softmax(flat, group, 3), ad::reshape(C, 12, 1))));
    terms.push_back(ad::sum(ad::square(ad::transpose(ad::mul_col(A, ad::row_sums(C))))));
    terms.push_back(ad::sum(ad::square(ad::pick(A, std::vector<std::int64_t>{1, 3, 0}))));
    const std::vector<ad::Var> parts{A, C};
    terms.push_back(ad::sum(ad::square(ad::concat_cols(parts))));
    terms.push_back(ad::sum(ad::mul(ad::col_sums(A), R)));
    ad::Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
    return total;
  };
  const auto r = gradient_check(loss, {&a, &b, &c, &row}, rng, 1e-5, 100);
  INFO("worst " << r.worst_parameter << " a=" << r.analytic << " n=" << r.numeric);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("adam follows the hand-computed first step and the decay schedule") {
  Parameter p("p", Tensor::scalar(0.0));
  AdamOptions o;
  o.learning_rate = 0.1;
  o.decay_factor = 0.99;
  Adam adam({&p}, o);
  adam.zero_grad();
  p.grad = Tensor::scalar(1.0);
  p.has_grad = true;
  adam.step();
  // m_hat = 1, v_hat = 1 after bias correction, so the move is lr / (1 + eps).
  CHECK(p.value.item() == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
  for (int e = 0; e < 10; ++e) adam.end_epoch();
  CHECK(adam.effective_learning_rate() == doctest::Approx(0.1 * std::pow(0.99, 10)));

  Parameter q("q", Tensor(2, 2, 3.0));
  Adam zero({&q}, o);
  for (int s = 0; s < 5; ++s) {
    zero.zero_grad();
    q.grad = Tensor(2, 2, 0.0);
    q.has_grad = true;
    zero.step();
  }
  for (double v : q.value.values()) CHECK(v == 3.0);

  Adam missing({&q}, o);
  missing.zero_grad();
  CHECK_THROWS_WITH_AS(missing.step(), doctest::Contains("q"), Error);
}

TEST_CASE("parallel dense kernels agree bit-for-bit with the serial references") {
  auto rng = stream_rng(5, 0);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, std::tuple{7, 13, 5}, std::tuple{300, 64, 200}}) {
    for (int ta = 0; ta < 2; ++ta) {
      for (int tb = 0; tb < 2; ++tb) {
        const Tensor a = random_tensor(m, k, rng), b = random_tensor(k, n, rng);
        const Tensor c0 = random_tensor(m, n, rng);
        Tensor c1 = c0, c2 = c0;
        kernels::gemm(a.data(), b.data(), c1.data(), m, k, n, ta, tb, true);
        kernels::serial::gemm(a.data(), b.data(), c2.data(), m, k, n, ta, tb, true);
        CHECK(c1.values() == c2.values());
      }
    }
  }
  const Tensor x = random_tensor(5000, 32, rng), codes = random_tensor(300, 32, rng);
  std::vector<std::int64_t> i1(5000), i2(5000);
  kernels::nearest_rows(x.data(), 5000, codes.data(), 300, 32, i1.data(), nullptr);
  kernels::serial::nearest_rows(x.data(), 5000, codes.data(), 300, 32, i2.data(), nullptr);
  CHECK(i1 == i2);
}

TEST_CASE("gemm matches a naive triple loop") {
  auto rng = stream_rng(6, 0);
  const Tensor a = random_tensor(9, 4, rng), b = random_tensor(4, 6, rng);
  Tensor c(9, 6);
  kernels::gemm(a.data(), b.data(), c.data(), 9, 4, 6, false, false, false);
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 6; ++j) {
      double s = 0.0;
      for (int l = 0; l < 4; ++l) s += a(i, l) * b(l, j);
      CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-13));
    }
  }
}

TEST_CASE("layers: zero weights give zero output and determinism") {
  auto rng = stream_rng(1, 0);
  Mlp net("net", {3, 64, 32}, rng);
  for (Parameter* p : net.parameters()) p->value.fill(0.0);
  const Tensor y = net.apply(Tensor(4, 3, 2.5));
  for (double v : y.values()) CHECK(v == 0.0);
}
