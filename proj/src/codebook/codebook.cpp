#include "elearn/codebook/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "elearn/numerics/adam.hpp"
#include "elearn/numerics/kernels.hpp"
#include "elearn/numerics/random.hpp"

namespace elearn::codebook {

std::size_t InputSpec::n_states() const {
  if (kind != StateKind::Discrete) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i < obs_dim; ++i) n *= alleles_per_locus;
  return n;
}

InputSpec InputSpec::for_trajectory(const Trajectory& t) {
  InputSpec s;
  s.kind = t.kind;
  if (t.kind == StateKind::Continuous) {
    s.obs_dim = t.dim;
  } else {
    s.obs_dim = 2;
    s.alleles_per_locus = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(t.state_space_size))));
    if (s.alleles_per_locus * s.alleles_per_locus != t.state_space_size) {
      throw Error("discrete state space of size " + std::to_string(t.state_space_size) +
                  " is not a two-locus genotype grid");
    }
  }
  return s;
}

void StatePool::add(const Trajectory& traj, std::size_t stride) {
  if (traj.kind != spec_.kind) throw Error("state pool: trajectory kind does not match input spec");
  if (traj.kind == StateKind::Continuous && traj.dim != spec_.obs_dim) {
    throw Error("state pool: trajectory dimension " + std::to_string(traj.dim) + " does not match " +
                std::to_string(spec_.obs_dim));
  }
  for (std::size_t t = 0; t < traj.length(); t += stride) {
    if (traj.kind == StateKind::Continuous) {
      add_state(traj.state(t));
    } else {
      add_code(traj.code(t));
    }
  }
}

void StatePool::add_state(std::span<const double> x) { values_.insert(values_.end(), x.begin(), x.end()); }
void StatePool::add_code(std::int64_t g) { codes_.push_back(g); }

std::size_t StatePool::size() const {
  return spec_.kind == StateKind::Continuous ? values_.size() / spec_.obs_dim : codes_.size();
}

Tensor StatePool::features(std::span<const std::size_t> rows) const {
  Tensor out(rows.size(), spec_.input_dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (spec_.kind == StateKind::Continuous) {
      const auto s = state(rows[r]);
      std::copy(s.begin(), s.end(), out.row(r).begin());
    } else {
      const auto g = static_cast<std::size_t>(codes_[rows[r]]);
      const std::size_t A = spec_.alleles_per_locus;
      out(r, g / A) = 1.0;
      out(r, A + g % A) = 1.0;
    }
  }
  return out;
}

Tensor StatePool::all_features() const {
  std::vector<std::size_t> rows(size());
  std::iota(rows.begin(), rows.end(), 0);
  return features(rows);
}

Tensor features_of(const Trajectory& traj, const InputSpec& spec) {
  StatePool pool(spec);
  pool.add(traj);
  return pool.all_features();
}

Encoder::Encoder(const InputSpec& spec, std::mt19937_64& rng)
    : net("encoder", {spec.input_dim(), kHidden, kCodeDim}, rng) {}

Tensor Encoder::apply(const Tensor& x) const {
  if (x.cols() != net.in_features()) {
    throw Error("encoder: input dimension " + std::to_string(x.cols()) + " does not match " +
                std::to_string(net.in_features()));
  }
  return net.apply(x);
}

Decoder::Decoder(const InputSpec& s, std::mt19937_64& rng)
    : spec(s), trunk("decoder.trunk", {kCodeDim, kHidden, kHidden}, rng) {
  if (spec.kind == StateKind::Continuous) {
    mean_head = Linear("decoder.mean", kHidden, spec.obs_dim, rng);
    std_head = Linear("decoder.std", kHidden, spec.obs_dim, rng);
  } else {
    logit_head = Linear("decoder.logits", kHidden, spec.input_dim(), rng);
  }
}

Decoded Decoder::forward(ad::Tape& tape, const ad::Var& code) {
  const ad::Var h = ad::tanh(trunk.forward(tape, code));
  Decoded out;
  out.kind = spec.kind;
  if (spec.kind == StateKind::Continuous) {
    out.mean = mean_head.forward(tape, h);
    out.stddev = ad::add_scalar(ad::scale(ad::sigmoid(std_head.forward(tape, h)), 1.0 - kMinStd), kMinStd);
  } else {
    out.log_probs = ad::log_softmax_blocks(logit_head.forward(tape, h), spec.alleles_per_locus);
  }
  return out;
}

std::vector<Parameter*> Decoder::parameters() {
  auto out = trunk.parameters();
  auto add = [&](Linear& l) {
    if (!l.weight.value.empty()) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  };
  add(mean_head);
  add(std_head);
  add(logit_head);
  return out;
}

CodebookModel::CodebookModel(const InputSpec& s, std::size_t K, std::mt19937_64& rng)
    : spec(s), encoder(s, rng), decoder(s, rng) {
  if (K < 1) throw Error("codebook: K must be positive");
  const double bound = 1.0 / static_cast<double>(K);
  codewords = Parameter("codebook", uniform_init(K, kCodeDim, bound, rng));
  occupancy.assign(K, 0);
}

Tensor CodebookModel::encode(const Tensor& features) const { return encoder.apply(features); }

std::vector<std::int64_t> CodebookModel::assign(const Tensor& latents) const {
  if (latents.cols() != kCodeDim) throw Error("assign: latent width must be " + std::to_string(kCodeDim));
  std::vector<std::int64_t> idx(latents.rows());
  kernels::nearest_rows(latents.data(), latents.rows(), codewords.value.data(), K(), kCodeDim, idx.data(),
                        nullptr);
  return idx;
}

QuantizationResult CodebookModel::quantize(std::span<const double> latent) const {
  if (latent.size() != kCodeDim) throw Error("quantize: latent width must be " + std::to_string(kCodeDim));
  QuantizationResult r;
  r.latent.assign(latent.begin(), latent.end());
  double d2 = 0.0;
  kernels::nearest_rows(latent.data(), 1, codewords.value.data(), K(), kCodeDim, &r.index, &d2);
  r.distance = std::sqrt(d2);
  const auto row = codewords.value.row(static_cast<std::size_t>(r.index));
  r.codeword.assign(row.begin(), row.end());
  return r;
}

std::vector<std::int64_t> CodebookModel::active() const {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    if (occupancy[i] >= 1) out.push_back(static_cast<std::int64_t>(i));
  }
  return out;
}

double CodebookModel::activation_ratio() const {
  return static_cast<double>(active().size()) / static_cast<double>(K());
}

std::vector<Parameter*> CodebookModel::parameters() {
  auto out = encoder.parameters();
  for (Parameter* p : decoder.parameters()) out.push_back(p);
  out.push_back(&codewords);
  return out;
}

ad::Var gaussian_nll(const ad::Var& x, const ad::Var& mean, const ad::Var& stddev) {
  ad::check_same_shape("gaussian_nll", x.value(), mean.value());
  ad::check_same_shape("gaussian_nll", x.value(), stddev.value());
  const double rows = static_cast<double>(x.rows());
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const ad::Var z = ad::div(ad::sub(x, mean), stddev);
  const ad::Var per = ad::add(ad::log(stddev), ad::scale(ad::square(z), 0.5));
  const ad::Var total = ad::scale(ad::sum(per), 1.0 / rows);
  return ad::add_scalar(total, half_log_2pi * static_cast<double>(x.cols()));
}

ad::Var categorical_nll(const ad::Var& log_probs, std::span<const std::int64_t> codes,
                        std::size_t alleles_per_locus) {
  if (codes.size() != log_probs.rows()) throw Error("categorical_nll: one code per row expected");
  const std::size_t A = alleles_per_locus;
  std::vector<std::int64_t> first(codes.size()), second(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    first[i] = codes[i] / static_cast<std::int64_t>(A);
    second[i] = static_cast<std::int64_t>(A) + codes[i] % static_cast<std::int64_t>(A);
  }
  const ad::Var ll = ad::add(ad::pick(log_probs, first), ad::pick(log_probs, second));
  return ad::scale(ad::sum(ll), -1.0 / static_cast<double>(codes.size()));
}

ad::Var vq_loss(const ad::Var& latent, const ad::Var& codeword, double beta_commit) {
  ad::check_same_shape("vq_loss", latent.value(), codeword.value());
  const double rows = static_cast<double>(latent.rows());
  const ad::Var codebook_term = ad::sum(ad::square(ad::sub(ad::stop_gradient(latent), codeword)));
  const ad::Var commit_term = ad::sum(ad::square(ad::sub(latent, ad::stop_gradient(codeword))));
  return ad::scale(ad::add(codebook_term, ad::scale(commit_term, beta_commit)), 1.0 / rows);
}

double gaussian_nll_value(std::span<const double> x, std::span<const double> mean,
                          std::span<const double> stddev) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean[i]) / stddev[i];
    s += 0.5 * std::log(2.0 * std::numbers::pi) + std::log(stddev[i]) + 0.5 * z * z;
  }
  return s;
}

double vq_loss_value(std::span<const double> latent, std::span<const double> codeword, double beta_commit) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < latent.size(); ++i) d2 += (latent[i] - codeword[i]) * (latent[i] - codeword[i]);
  return (1.0 + beta_commit) * d2;
}

CodebookInit parse_codebook_init(const std::string& s) {
  if (s == "data") return CodebookInit::Data;
  if (s == "uniform") return CodebookInit::Uniform;
  if (s == "box") return CodebookInit::Box;
  throw Error("unknown codebook init '" + s + "' (expected data, uniform or box)");
}

std::string to_string(CodebookInit init) {
  switch (init) {
    case CodebookInit::Data: return "data";
    case CodebookInit::Uniform: return "uniform";
    case CodebookInit::Box: return "box";
  }
  return "data";
}

void recount_occupancy(CodebookModel& model, const std::vector<Trajectory>& trajs, std::size_t stride) {
  StatePool pool(model.spec);
  for (const auto& t : trajs) pool.add(t, stride);
  model.occupancy.assign(model.K(), 0);
  constexpr std::size_t kChunk = 4096;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < pool.size(); start += kChunk) {
    rows.clear();
    for (std::size_t i = start; i < std::min(pool.size(), start + kChunk); ++i) rows.push_back(i);
    for (auto idx : model.assign(model.encode(pool.features(rows)))) ++model.occupancy[static_cast<std::size_t>(idx)];
  }
}

Stage1Result stage1_train(const std::vector<Trajectory>& trajs, const Stage1Config& cfg, std::uint64_t seed,
                          const std::function<void(const Stage1EpochLog&)>& on_epoch) {
  if (trajs.empty()) throw Error("stage 1: no training trajectories");
  if (cfg.batch_size == 0 || cfg.epochs == 0 || cfg.stride == 0) {
    throw Error("stage 1: batch_size, epochs and stride must be positive");
  }
  const InputSpec spec = InputSpec::for_trajectory(trajs.front());
  StatePool pool(spec);
  for (const auto& t : trajs) pool.add(t, cfg.stride);
  if (pool.size() == 0) throw Error("stage 1: empty training set");

  auto rng = stream_rng(seed, 1);
  Stage1Result result{CodebookModel(spec, cfg.K, rng), {}};
  CodebookModel& model = result.model;

  if (cfg.init == CodebookInit::Data) {
    std::vector<std::size_t> rows(pool.size());
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::vector<std::size_t> pick(cfg.K);
    for (std::size_t i = 0; i < cfg.K; ++i) pick[i] = rows[i % rows.size()];
    const Tensor z = model.encode(pool.features(pick));
    std::normal_distribution<double> jitter(0.0, 1e-3);
    for (std::size_t i = 0; i < z.size(); ++i) {
      // Repeated picks (K larger than the pool) must not coincide exactly.
      model.codewords.value[i] = z[i] + (i / kCodeDim >= rows.size() ? jitter(rng) : 0.0);
    }
  } else if (cfg.init == CodebookInit::Box) {
    StatePool probes(spec);
    if (spec.kind == StateKind::Continuous) {
      std::vector<double> lo(spec.obs_dim, std::numeric_limits<double>::infinity());
      std::vector<double> hi(spec.obs_dim, -std::numeric_limits<double>::infinity());
      for (std::size_t r = 0; r < pool.size(); ++r) {
        const auto x = pool.state(r);
        for (std::size_t d = 0; d < spec.obs_dim; ++d) {
          lo[d] = std::min(lo[d], x[d]);
          hi[d] = std::max(hi[d], x[d]);
        }
      }
      std::vector<double> x(spec.obs_dim);
      for (std::size_t i = 0; i < cfg.K; ++i) {
        for (std::size_t d = 0; d < spec.obs_dim; ++d) x[d] = std::uniform_real_distribution<double>(lo[d], hi[d])(rng);
        probes.add_state(x);
      }
    } else {
      std::uniform_int_distribution<std::int64_t> g(0, static_cast<std::int64_t>(spec.n_states()) - 1);
      for (std::size_t i = 0; i < cfg.K; ++i) probes.add_code(g(rng));
    }
    const Tensor z = model.encode(probes.all_features());
    std::copy(z.values().begin(), z.values().end(), model.codewords.value.values().begin());
  }

  AdamOptions opts;
  opts.learning_rate = cfg.learning_rate;
  opts.decay_factor = cfg.lr_decay;
  Adam adam(model.parameters(), opts);

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::int64_t> codes;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double rec_sum = 0.0, vq_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      adam.zero_grad();
      ad::Tape tape;
      const Tensor x = pool.features(rows);
      const ad::Var xv = tape.constant(x);
      const ad::Var s = model.encoder.forward(tape, xv);
      const auto idx = model.assign(s.value());
      const ad::Var c = ad::gather_rows(tape.parameter(model.codewords), idx);
      const ad::Var z = ad::straight_through(c, s);
      Decoded dec = model.decoder.forward(tape, z);
      ad::Var rec;
      if (spec.kind == StateKind::Continuous) {
        rec = gaussian_nll(xv, dec.mean, dec.stddev);
      } else {
        codes.clear();
        for (auto r : rows) codes.push_back(pool.code(r));
        rec = categorical_nll(dec.log_probs, codes, spec.alleles_per_locus);
      }
      const ad::Var vq = vq_loss(s, c, cfg.beta_commit);
      const ad::Var loss = ad::add(rec, vq);
      if (!std::isfinite(loss.item())) {
        throw Error("stage 1 diverged at epoch " + std::to_string(epoch) + " (loss is not finite)");
      }
      tape.backward(loss);
      // Codewords that received no assignment this batch still take a
      // (zero-gradient) Adam step; the optimizer demands a gradient buffer.
      for (Parameter* p : adam.parameters()) {
        if (!p->has_grad) {
          p->zero_grad();
          p->has_grad = true;
        }
      }
      adam.step();
      const double w = static_cast<double>(rows.size());
      rec_sum += rec.item() * w;
      vq_sum += vq.item() * w;
      seen += rows.size();
    }
    adam.end_epoch();
    Stage1EpochLog log;
    log.epoch = epoch;
    log.reconstruct = rec_sum / static_cast<double>(seen);
    log.vq = vq_sum / static_cast<double>(seen);
    if (!std::isfinite(log.reconstruct) || !std::isfinite(log.vq)) {
      throw Error("stage 1 diverged at epoch " + std::to_string(epoch));
    }
    if (on_epoch || epoch + 1 == cfg.epochs) {
      recount_occupancy(model, trajs, cfg.stride);
      log.active = model.active().size();
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  recount_occupancy(model, trajs, cfg.stride);
  return result;
}

}  // namespace elearn::codebook
