#include "elearn/evaluation/model_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "elearn/numerics/adam.hpp"
#include "elearn/numerics/kernels.hpp"
#include "elearn/numerics/random.hpp"

namespace elearn::evaluation {

namespace {

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

ModelEnergy::ModelEnergy(const codebook::CodebookModel& cb, landscape::FpeModel& fpe) : cb_(&cb) {
  active_ = fpe.codewords;
  energy_ = fpe.energy_values();
}

std::vector<std::int64_t> ModelEnergy::nodes(const Trajectory& traj) const {
  codebook::StatePool pool(cb_->spec);
  pool.add(traj);
  std::vector<std::int64_t> out(pool.size());
  constexpr std::size_t kChunk = 8192;
  std::vector<std::size_t> rows;
  for (std::size_t s = 0; s < pool.size(); s += kChunk) {
    rows.resize(std::min(kChunk, pool.size() - s));
    std::iota(rows.begin(), rows.end(), s);
    const Tensor z = cb_->encode(pool.features(rows));
    kernels::nearest_rows(z.data(), z.rows(), active_.data(), active_.rows(), active_.cols(), out.data() + s,
                          nullptr);
  }
  return out;
}

std::vector<double> ModelEnergy::operator()(const Trajectory& traj) const {
  const auto idx = nodes(traj);
  std::vector<double> e(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) e[i] = energy_[static_cast<std::size_t>(idx[i])];
  return e;
}

ModelSampler::ModelSampler(const codebook::CodebookModel& cb, landscape::FpeModel& fpe)
    : cb_(&cb), energy_(cb, fpe) {
  transitions_ = fpe.transition_matrix();
  const codebook::Decoder& dec = cb.decoder;
  const Tensor h = elearn::tanh(dec.trunk.apply(fpe.codewords));
  if (cb.spec.kind == StateKind::Continuous) {
    mean_ = dec.mean_head.apply(h);
    stddev_ = dec.std_head.apply(h);
    for (double& v : stddev_.values()) v = codebook::kMinStd + (1.0 - codebook::kMinStd) * sigmoid(v);
  } else {
    log_probs_ = dec.logit_head.apply(h);
    const std::size_t A = cb.spec.alleles_per_locus;
    for (std::size_t r = 0; r < log_probs_.rows(); ++r) {
      auto row = log_probs_.row(r);
      for (std::size_t b0 = 0; b0 < row.size(); b0 += A) {
        const double mx = *std::max_element(row.begin() + static_cast<std::ptrdiff_t>(b0),
                                            row.begin() + static_cast<std::ptrdiff_t>(b0 + A));
        double z = 0.0;
        for (std::size_t a = 0; a < A; ++a) z += std::exp(row[b0 + a] - mx);
        const double lz = mx + std::log(z);
        for (std::size_t a = 0; a < A; ++a) row[b0 + a] -= lz;
      }
    }
  }
}

Trajectory ModelSampler::unroll(const Trajectory& start, std::size_t t0, std::size_t n_steps,
                                std::uint64_t seed) const {
  if (t0 >= start.length()) throw Error("unroll: start index outside the trajectory");
  Trajectory first = start;
  first.values.clear();
  first.codes.clear();
  if (start.kind == StateKind::Continuous) {
    const auto s = start.state(t0);
    first.values.assign(s.begin(), s.end());
  } else {
    first.codes.push_back(start.code(t0));
  }
  Trajectory out = first;
  auto rng = stream_rng(seed, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto node = static_cast<std::size_t>(energy_.nodes(first).front());
  const std::size_t n = transitions_.rows();
  for (std::size_t step = 0; step < n_steps; ++step) {
    const auto row = transitions_.row(node);
    std::discrete_distribution<std::size_t> next(row.begin(), row.end());
    node = next(rng);
    if (node >= n) throw Error("unroll: sampled node out of range");
    if (start.kind == StateKind::Continuous) {
      for (std::size_t d = 0; d < start.dim; ++d) out.values.push_back(mean_(node, d) + stddev_(node, d) * normal(rng));
    } else {
      const std::size_t A = cb_->spec.alleles_per_locus;
      std::int64_t g = 0;
      for (std::size_t locus = 0; locus < cb_->spec.obs_dim; ++locus) {
        std::vector<double> w(A);
        for (std::size_t a = 0; a < A; ++a) w[a] = std::exp(log_probs_(node, locus * A + a));
        std::discrete_distribution<std::size_t> allele(w.begin(), w.end());
        g = g * static_cast<std::int64_t>(A) + static_cast<std::int64_t>(allele(rng));
      }
      out.codes.push_back(g);
    }
  }
  return out;
}

double ape_score(const Tensor& W, std::span<const double> b_h, std::span<const double> b_r,
                 std::span<const double> x) {
  const std::size_t D = W.rows(), H = W.cols();
  if (x.size() != D || b_r.size() != D || b_h.size() != H) throw Error("ape_score: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < H; ++k) {
    double a = b_h[k];
    for (std::size_t d = 0; d < D; ++d) a += W(d, k) * x[d];
    s += softplus(a);
  }
  for (std::size_t d = 0; d < D; ++d) s -= 0.5 * (x[d] - b_r[d]) * (x[d] - b_r[d]);
  return s;
}

double ApeModel::score(std::span<const double> features) const {
  std::vector<double> x(features.begin(), features.end());
  if (!offset.empty()) {
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = (x[d] - offset[d]) / scale[d];
  }
  return ape_score(W.value, b_h.value.values(), b_r.value.values(), x);
}

std::vector<double> ApeModel::energy(const Trajectory& traj) const {
  const Tensor f = codebook::features_of(traj, spec);
  std::vector<double> e(f.rows());
  for (std::size_t r = 0; r < f.rows(); ++r) e[r] = -score(f.row(r));
  return e;
}

ApeModel train_ape(const std::vector<Trajectory>& trajs, const ApeConfig& cfg, std::uint64_t seed) {
  if (trajs.empty()) throw Error("ape: no training trajectories");
  ApeModel m;
  m.spec = codebook::InputSpec::for_trajectory(trajs.front());
  codebook::StatePool pool(m.spec);
  for (const auto& t : trajs) pool.add(t, cfg.stride);
  Tensor X = pool.all_features();
  const std::size_t D = X.cols();
  if (m.spec.kind == StateKind::Continuous) {
    m.offset.assign(D, 0.0);
    m.scale.assign(D, 0.0);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      for (std::size_t d = 0; d < D; ++d) m.offset[d] += X(r, d);
    }
    for (double& v : m.offset) v /= static_cast<double>(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
      for (std::size_t d = 0; d < D; ++d) m.scale[d] += (X(r, d) - m.offset[d]) * (X(r, d) - m.offset[d]);
    }
    for (double& v : m.scale) v = std::max(std::sqrt(v / static_cast<double>(X.rows())), 1e-12);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      for (std::size_t d = 0; d < D; ++d) X(r, d) = (X(r, d) - m.offset[d]) / m.scale[d];
    }
  }
  auto rng = stream_rng(seed, 4);
  const double bound = 1.0 / std::sqrt(static_cast<double>(D));
  m.W = Parameter("ape.W", uniform_init(D, cfg.hidden, bound, rng));
  m.b_h = Parameter("ape.b_h", Tensor(1, cfg.hidden));
  m.b_r = Parameter("ape.b_r", Tensor(1, D));

  AdamOptions opts;
  opts.learning_rate = cfg.learning_rate;
  Adam adam({&m.W, &m.b_h, &m.b_r}, opts);
  std::normal_distribution<double> normal(0.0, cfg.noise);
  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
      const std::size_t B = std::min(cfg.batch_size, order.size() - s);
      Tensor clean(B, D), noisy(B, D);
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t d = 0; d < D; ++d) {
          clean(b, d) = X(order[s + b], d);
          noisy(b, d) = clean(b, d) + normal(rng);
        }
      }
      adam.zero_grad();
      ad::Tape tape;
      const ad::Var W = tape.parameter(m.W);
      const ad::Var h = ad::sigmoid(ad::add_row(ad::matmul(tape.constant(noisy), W), tape.parameter(m.b_h)));
      const ad::Var r = ad::add_row(ad::matmul(h, ad::transpose(W)), tape.parameter(m.b_r));
      const ad::Var loss = ad::scale(ad::sum(ad::square(ad::sub(r, tape.constant(clean)))), 1.0 / static_cast<double>(B));
      tape.backward(loss);
      adam.step();
    }
    adam.end_epoch();
  }
  return m;
}

}  // namespace elearn::evaluation
