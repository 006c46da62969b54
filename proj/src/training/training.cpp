#include "elearn/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "elearn/numerics/adam.hpp"
#include "elearn/numerics/random.hpp"

namespace elearn::training {

LagPairs collect_lag_pairs(const std::vector<std::vector<std::int64_t>>& seqs, std::size_t lag, std::size_t n) {
  if (lag == 0) throw Error("lag pairs: lag must be positive");
  Tensor counts(n, n);
  for (const auto& s : seqs) {
    for (std::size_t t = 0; t + lag < s.size(); ++t) {
      const auto a = s[t], b = s[t + lag];
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
        throw Error("lag pairs: node index outside the landscape graph");
      }
      counts(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) += 1.0;
    }
  }
  LagPairs out;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    double w = 0.0;
    for (double v : counts.row(i)) w += v;
    if (w > 0.0) {
      rows.push_back(i);
      out.starts.push_back(static_cast<std::int64_t>(i));
      out.weight.push_back(w);
      out.total += w;
    }
  }
  if (rows.empty()) throw Error("lag pairs: no trajectory is longer than the lag of " + std::to_string(lag));
  out.target_counts = Tensor(rows.size(), n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(counts.row(rows[r]).begin(), counts.row(rows[r]).end(), out.target_counts.row(r).begin());
  }
  return out;
}

std::vector<double> empirical_distribution(std::span<const std::size_t> occupancy, double alpha) {
  if (occupancy.empty()) throw Error("empirical distribution: no states");
  if (!(alpha >= 0.0)) throw Error("empirical distribution: alpha must be non-negative");
  double total = 0.0;
  for (auto c : occupancy) total += static_cast<double>(c) + alpha;
  if (!(total > 0.0)) throw Error("empirical distribution: all counts are zero");
  std::vector<double> p(occupancy.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (static_cast<double>(occupancy[i]) + alpha) / total;
  return p;
}

ad::Var loss_code(const ad::Var& log_q, const Tensor& weights) {
  ad::check_same_shape("loss_code", log_q.value(), weights);
  return ad::neg(ad::sum(ad::mul(log_q, log_q.tape().constant(weights))));
}

double loss_code_value(std::span<const double> q, std::size_t target) {
  if (target >= q.size()) throw Error("loss_code: target outside the distribution");
  return -std::log(q[target]);
}

ad::Var loss_phy(const ad::Var& energy, std::span<const double> p, double kT) {
  if (energy.cols() != 1 || energy.rows() != p.size()) {
    throw Error("loss_phy: energy " + energy.value().shape_string() + " does not match " +
                std::to_string(p.size()) + " probabilities");
  }
  double neg_entropy = 0.0;
  Tensor pt(1, p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    pt[i] = p[i];
    if (p[i] > 0.0) neg_entropy += p[i] * std::log(p[i]);
  }
  const ad::Var log_q = ad::log_softmax_rows(ad::scale(ad::transpose(energy), -1.0 / kT));
  const ad::Var cross = ad::sum(ad::mul(log_q, energy.tape().constant(pt)));
  return ad::add_scalar(ad::neg(cross), neg_entropy);
}

double loss_phy_value(std::span<const double> energy, std::span<const double> p, double kT) {
  const double lo = *std::min_element(energy.begin(), energy.end());
  double z = 0.0;
  for (double e : energy) z += std::exp(-(e - lo) / kT);
  const double log_z = std::log(z);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double log_q = -(energy[i] - lo) / kT - log_z;
    kl += p[i] * (std::log(p[i]) - log_q);
  }
  return kl;
}

ad::Var loss_latent(const ad::Var& H, const Tensor& target, std::span<const double> row_weight) {
  ad::check_same_shape("loss_latent", H.value(), target);
  if (row_weight.size() != target.rows()) throw Error("loss_latent: one weight per row expected");
  ad::Tape& tape = H.tape();
  const ad::Var d = ad::square(ad::sub(H, tape.constant(target)));
  const ad::Var w = tape.constant(Tensor(target.rows(), 1, std::vector<double>(row_weight.begin(), row_weight.end())));
  return ad::sum(ad::mul_col(d, w));
}

double loss_latent_value(const Tensor& H, const Tensor& target) {
  if (!H.same_shape(target)) throw Error("loss_latent: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < H.size(); ++i) s += (H[i] - target[i]) * (H[i] - target[i]);
  return s / static_cast<double>(H.size());
}

void freeze(codebook::CodebookModel& model) {
  for (Parameter* p : model.parameters()) p->trainable = false;
}

namespace {

// Phi of every node's one-hot, table(j, i*C + c) = H_j(i, c).
Tensor latent_targets(landscape::FpeModel& model, std::size_t chunk) {
  const std::size_t n = model.n(), C = model.width();
  Tensor table(n, n * C);
  std::vector<std::int64_t> nodes;
  for (std::size_t j0 = 0; j0 < n; j0 += chunk) {
    nodes.clear();
    for (std::size_t j = j0; j < std::min(n, j0 + chunk); ++j) nodes.push_back(static_cast<std::int64_t>(j));
    const std::size_t B = nodes.size();
    const Tensor h = model.encode_values(nodes);
    for (std::size_t b = 0; b < B; ++b) {
      auto dst = table.row(j0 + b);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < C; ++c) dst[i * C + c] = h[(i * B + b) * C + c];
      }
    }
  }
  return table;
}

}  // namespace

Stage2Result stage2_train(const codebook::CodebookModel& frozen, const std::vector<Trajectory>& trajs,
                          const Stage2Config& cfg, std::uint64_t seed,
                          const std::function<void(const Stage2EpochLog&)>& on_epoch) {
  if (trajs.empty()) throw Error("stage 2: no training trajectories");
  if (cfg.epochs == 0 || cfg.start_batch == 0) throw Error("stage 2: epochs and start_batch must be positive");

  Stage2Result result;
  for (const auto& t : trajs) result.sequences.push_back(landscape::assign_trajectory(frozen, t));
  landscape::LandscapeGraph lg = landscape::build_topology_from_sequences(result.sequences, frozen.K());
  const std::size_t n = lg.n();

  std::vector<std::vector<std::int64_t>> node_seqs;
  for (const auto& s : result.sequences) {
    std::vector<std::int64_t> ns(s.size());
    for (std::size_t t = 0; t < s.size(); ++t) ns[t] = lg.node_of[s[t]];
    node_seqs.push_back(std::move(ns));
  }
  const LagPairs pairs = collect_lag_pairs(node_seqs, cfg.lag, n);
  const std::vector<double> p_emp = empirical_distribution(lg.occupancy, cfg.laplace_alpha);

  Tensor cw(n, frozen.codewords.value.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = frozen.codewords.value.row(static_cast<std::size_t>(lg.codewords[i]));
    std::copy(src.begin(), src.end(), cw.row(i).begin());
  }

  landscape::FpeOptions fopts = cfg.fpe;
  fopts.bypass_phi_psi = cfg.ablation.bypass_phi_psi;
  auto rng = stream_rng(seed, 2);
  result.model = landscape::FpeModel(std::move(lg), std::move(cw), fopts, rng);
  landscape::FpeModel& model = result.model;
  const std::size_t C = model.width();

  AdamOptions opts;
  opts.learning_rate = cfg.learning_rate;
  opts.decay_factor = cfg.lr_decay;
  Adam adam(model.parameters(), opts);

  const bool use_latent = !cfg.ablation.disable_latent;
  const bool use_phy = !cfg.ablation.disable_phy;
  const std::size_t S = pairs.starts.size();
  const std::size_t n_batches = (S + cfg.start_batch - 1) / cfg.start_batch;
  // Each batch carries its share of the full-data mean.
  const double batch_scale = static_cast<double>(n_batches) / pairs.total;

  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tensor targets;
    if (use_latent) targets = latent_targets(model, 32);
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    for (std::size_t b0 = 0; b0 < S; b0 += cfg.start_batch) {
      const std::size_t B = std::min(cfg.start_batch, S - b0);
      std::vector<std::int64_t> starts(B);
      Tensor code_w(B, n);
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t r = order[b0 + b];
        starts[b] = pairs.starts[r];
        const double w = batch_scale;
        for (std::size_t j = 0; j < n; ++j) code_w(b, j) = w * pairs.target_counts(r, j);
      }

      adam.zero_grad();
      ad::Tape tape;
      LossBreakdown part;
      try {
        const auto f = model.forward(tape, starts);
        ad::Var total = ad::scale(loss_code(f.log_q, code_w), cfg.weights.code);
        part.code = total.item() / cfg.weights.code;
        if (use_latent) {
          Tensor target(n * B, C);
          std::vector<double> row_w(n * B);
          double variance_term = 0.0;
          std::vector<double> mean(n * C);
          for (std::size_t b = 0; b < B; ++b) {
            const std::size_t r = order[b0 + b];
            const double w = pairs.weight[r];
            std::fill(mean.begin(), mean.end(), 0.0);
            double second = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double pj = pairs.target_counts(r, j) / w;
              if (pj == 0.0) continue;
              const auto tj = targets.row(j);
              for (std::size_t x = 0; x < n * C; ++x) {
                mean[x] += pj * tj[x];
                second += pj * tj[x] * tj[x];
              }
            }
            double mean_sq = 0.0;
            for (double v : mean) mean_sq += v * v;
            const double rw = batch_scale * w / static_cast<double>(n * C);
            variance_term += rw * (second - mean_sq);
            for (std::size_t i = 0; i < n; ++i) {
              row_w[i * B + b] = rw;
              for (std::size_t c = 0; c < C; ++c) target(i * B + b, c) = mean[i * C + c];
            }
          }
          // The spread of the targets around their mean is constant in the
          // parameters; it is added so the reported value is the exact
          // pair-averaged error.
          const ad::Var lat = ad::add_scalar(loss_latent(f.H1, target, row_w), std::max(variance_term, 0.0));
          part.latent = lat.item();
          total = ad::add(total, ad::scale(lat, cfg.weights.latent));
        }
        if (use_phy) {
          const ad::Var phy = loss_phy(f.energy, p_emp, cfg.kT);
          part.phy = phy.item();
          total = ad::add(total, ad::scale(phy, cfg.weights.phy));
        }
        part.total = total.item();
        const std::pair<const char*, double> terms[] = {
            {"latent", part.latent}, {"code", part.code}, {"phy", part.phy}, {"total", part.total}};
        for (const auto& [name, v] : terms) {
          if (!std::isfinite(v)) {
            throw Error(std::string("loss term '") + name + "' is not finite");
          }
        }
        tape.backward(total);
      } catch (const Error& e) {
        throw Error("stage 2 epoch " + std::to_string(epoch) + ": " + e.what());
      }
      for (Parameter* p : adam.parameters()) {
        if (!p->has_grad) {
          p->zero_grad();
          p->has_grad = true;
        }
      }
      adam.step();
      sum.latent += part.latent;
      sum.code += part.code;
      sum.phy += part.phy;
      sum.total += part.total;
    }
    adam.end_epoch();
    const double nb = static_cast<double>(n_batches);
    Stage2EpochLog log;
    log.epoch = epoch;
    log.loss.latent = sum.latent / nb;
    log.loss.code = sum.code / nb;
    log.loss.phy = sum.phy / nb;
    log.loss.total = sum.total / nb;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

}  // namespace elearn::training
