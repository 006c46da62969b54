#include <doctest.h>

#include <cmath>
#include <numbers>

#include "elearn/codebook/codebook.hpp"
#include "elearn/numerics/gradcheck.hpp"
#include "elearn/numerics/random.hpp"

using namespace elearn;
using namespace elearn::codebook;

namespace {

Trajectory blob(std::size_t n, double mx, double my, double sd, std::uint64_t seed) {
  auto rng = stream_rng(seed, 0);
  std::normal_distribution<double> z(0.0, sd);
  Trajectory t;
  t.kind = StateKind::Continuous;
  t.dim = 2;
  t.lag_time = 1;
  for (std::size_t i = 0; i < n; ++i) {
    t.values.push_back(mx + z(rng));
    t.values.push_back(my + z(rng));
  }
  return t;
}

}  // namespace

TEST_CASE("encoder examples") {
  auto rng = stream_rng(0, 0);
  InputSpec spec;
  CodebookModel m(spec, 10, rng);
  const Tensor x(3, 2, std::vector<double>{0.1, 0.2, 0.1, 0.2, -1.0, 4.0});
  const Tensor z = m.encode(x);
  CHECK(z.cols() == kCodeDim);
  for (std::size_t c = 0; c < kCodeDim; ++c) CHECK(z(0, c) == z(1, c));
  for (Parameter* p : m.encoder.parameters()) p->value.fill(0.0);
  const Tensor zero = m.encode(x);
  for (double v : zero.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(m.encode(Tensor(1, 3)), Error);
}

TEST_CASE("discrete input layout is two one-hot blocks") {
  Trajectory t;
  t.kind = StateKind::Discrete;
  t.dim = 1;
  t.state_space_size = 4096;
  t.codes = {64 * 3 + 5, 0};
  const InputSpec spec = InputSpec::for_trajectory(t);
  CHECK(spec.input_dim() == 128);
  const Tensor f = features_of(t, spec);
  CHECK(f(0, 3) == 1.0);
  CHECK(f(0, 64 + 5) == 1.0);
  double s = 0.0;
  for (double v : f.row(0)) s += v;
  CHECK(s == 2.0);
}

TEST_CASE("quantize: exact hits, ties and a brute-force scan") {
  auto rng = stream_rng(1, 0);
  InputSpec spec;
  CodebookModel m(spec, 8, rng);
  const auto cw3 = m.codewords.value.row(3);
  const auto q = m.quantize(std::vector<double>(cw3.begin(), cw3.end()));
  CHECK(q.index == 3);
  CHECK(q.distance == 0.0);

  // Codewords 2 and 5 equidistant from the origin.
  m.codewords.value.fill(10.0);
  for (std::size_t c = 0; c < kCodeDim; ++c) {
    m.codewords.value(2, c) = 0.5;
    m.codewords.value(5, c) = -0.5;
  }
  CHECK(m.quantize(std::vector<double>(kCodeDim, 0.0)).index == 2);

  std::normal_distribution<double> z(0.0, 1.0);
  for (double& v : m.codewords.value.values()) v = z(rng);
  Tensor s(1000, kCodeDim);
  for (double& v : s.values()) v = z(rng);
  const auto idx = m.assign(s);
  for (std::size_t r = 0; r < 1000; ++r) {
    std::int64_t best = 0;
    double bd = 1e300;
    for (std::size_t k = 0; k < m.K(); ++k) {
      double d = 0.0;
      for (std::size_t c = 0; c < kCodeDim; ++c) d += (s(r, c) - m.codewords.value(k, c)) * (s(r, c) - m.codewords.value(k, c));
      if (d < bd) {
        bd = d;
        best = static_cast<std::int64_t>(k);
      }
    }
    CHECK(idx[r] == best);
  }
}

TEST_CASE("reconstruction and vq loss examples") {
  ad::Tape tape;
  const Tensor x(1, 3, std::vector<double>{0.3, -1.0, 2.0});
  const auto nll = gaussian_nll(tape.constant(x), tape.constant(x), tape.constant(Tensor(1, 3, 1.0)));
  CHECK(nll.item() == doctest::Approx(3 * 0.5 * std::log(2 * std::numbers::pi)));
  // Closer mean at fixed std lowers the loss.
  const Tensor far(1, 3, std::vector<double>{1.0, 0.0, 0.0});
  const Tensor near(1, 3, std::vector<double>{0.5, -0.5, 1.0});
  const Tensor sd(1, 3, 0.7);
  CHECK(gaussian_nll_value(x.values(), near.values(), sd.values()) <
        gaussian_nll_value(x.values(), far.values(), sd.values()));

  const std::vector<std::int64_t> codes{17, 4095};
  const auto ce = categorical_nll(tape.constant(Tensor(2, 128, std::log(1.0 / 64))), codes, 64);
  CHECK(ce.item() == doctest::Approx(std::log(4096.0)));

  const std::vector<double> s0{1.0, 2.0}, c0{1.0, 2.0}, c1{1.0, 3.0};
  CHECK(vq_loss_value(s0, c0, 0.25) == 0.0);
  CHECK(vq_loss_value(s0, c1, 0.25) == doctest::Approx(1.25));

  Parameter c("c", Tensor(1, 2, std::vector<double>{0.5, -1.5}));
  Parameter s("s", Tensor(1, 2, std::vector<double>{2.0, 1.0}));
  ad::Tape t2;
  t2.backward(vq_loss(t2.parameter(s), t2.parameter(c), 0.25));
  CHECK(c.grad(0, 0) == doctest::Approx(2 * (0.5 - 2.0)));
  CHECK(c.grad(0, 1) == doctest::Approx(2 * (-1.5 - 1.0)));
  CHECK(s.grad(0, 0) == doctest::Approx(0.25 * 2 * (2.0 - 0.5)));
}

TEST_CASE("encoder and decoder networks pass gradient checks") {
  auto rng = stream_rng(2, 0);
  for (StateKind kind : {StateKind::Continuous, StateKind::Discrete}) {
    InputSpec spec;
    spec.kind = kind;
    CodebookModel m(spec, 6, rng);
    Tensor x(5, spec.input_dim());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : x.values()) v = u(rng);
    const std::vector<std::int64_t> codes{1, 70, 4000, 64, 5};
    auto loss = [&](ad::Tape& t) {
      const auto z = m.encoder.forward(t, t.constant(x));
      const auto d = m.decoder.forward(t, z);
      if (kind == StateKind::Continuous) return gaussian_nll(t.constant(Tensor(5, 2, 0.3)), d.mean, d.stddev);
      return categorical_nll(d.log_probs, codes, 64);
    };
    const auto r = gradient_check(loss, m.parameters(), rng, 1e-5, 16);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("stage 1 on a single Gaussian blob") {
  const std::vector<Trajectory> data{blob(3000, 0.7, -0.4, 0.2, 5)};
  Stage1Config cfg;
  cfg.K = 10;
  cfg.epochs = 30;
  cfg.stride = 1;
  cfg.learning_rate = 3e-3;
  const auto r = stage1_train(data, cfg, 0);
  CHECK(r.log.size() == 30);
  CHECK(!r.model.active().empty());
  std::size_t total = 0;
  for (auto o : r.model.occupancy) total += o;
  CHECK(total == 3000);

  // Occupancy-weighted decoded mean reproduces the blob mean.
  auto& m = const_cast<CodebookModel&>(r.model);
  ad::Tape tape;
  const auto dec = m.decoder.forward(tape, tape.constant(m.codewords.value));
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < m.K(); ++k) {
    const double w = static_cast<double>(m.occupancy[k]) / 3000.0;
    mx += w * dec.mean.value()(k, 0);
    my += w * dec.mean.value()(k, 1);
  }
  CHECK(std::abs(mx - 0.7) < 0.1);
  CHECK(std::abs(my + 0.4) < 0.1);

  // Voronoi property of the final assignment.
  const Tensor z = m.encode(features_of(data[0], m.spec));
  const auto idx = m.assign(z);
  for (std::size_t r2 = 0; r2 < z.rows(); r2 += 37) {
    double own = 0.0;
    for (std::size_t c = 0; c < kCodeDim; ++c) own += std::pow(z(r2, c) - m.codewords.value(idx[r2], c), 2);
    for (std::size_t k = 0; k < m.K(); ++k) {
      double d = 0.0;
      for (std::size_t c = 0; c < kCodeDim; ++c) d += std::pow(z(r2, c) - m.codewords.value(k, c), 2);
      CHECK(own <= d);
    }
  }
}

TEST_CASE("stage 1 is deterministic and rejects empty input") {
  const std::vector<Trajectory> data{blob(500, 0.0, 0.0, 1.0, 1)};
  Stage1Config cfg;
  cfg.K = 5;
  cfg.epochs = 2;
  cfg.stride = 1;
  const auto a = stage1_train(data, cfg, 9);
  const auto b = stage1_train(data, cfg, 9);
  CHECK(a.model.codewords.value.values() == b.model.codewords.value.values());
  CHECK_THROWS_AS(stage1_train({}, cfg, 0), Error);
  CHECK(parse_codebook_init("box") == CodebookInit::Box);
  CHECK_THROWS_AS(parse_codebook_init("zeros"), Error);
}
