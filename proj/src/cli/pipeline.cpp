#include "elearn/cli/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "elearn/evaluation/model_eval.hpp"
#include "elearn/systems/observation.hpp"
#include "elearn/systems/trajectory_io.hpp"

namespace elearn::cli {

namespace {

std::vector<Trajectory> with_lag(std::vector<Trajectory> trajs, std::size_t lag) {
  for (auto& t : trajs) t.lag_time = lag;
  return trajs;
}

Trajectory truncate(const Trajectory& t, double fraction) {
  const std::size_t keep = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(fraction * t.length())));
  if (keep >= t.length()) return t;
  Trajectory out = t;
  if (t.kind == StateKind::Continuous) {
    out.values.resize(keep * t.dim);
  } else {
    out.codes.resize(keep);
  }
  return out;
}

std::filesystem::path seed_data_dir(const std::string& dir, std::uint64_t seed) {
  const std::filesystem::path nested = std::filesystem::path(dir) / ("seed_" + std::to_string(seed)) / "data";
  return std::filesystem::is_directory(nested) ? nested : std::filesystem::path(dir);
}

sswm::FitnessLandscape read_fitness(const std::filesystem::path& path, const sswm::LandscapeOptions& opts) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open fitness table " + path.string());
  sswm::FitnessLandscape land;
  land.alleles_per_locus = opts.alleles_per_locus;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string g, f;
    std::getline(ss, g, ',');
    std::getline(ss, f, ',');
    const double fit = std::stod(f);
    land.fitness.push_back(fit);
    land.log_fitness.push_back(std::log(fit));
  }
  land.validate();
  return land;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

Dataset simulate_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  Dataset d;
  d.system = cfg.systems.system;
  std::vector<Trajectory> all;
  if (d.system == SystemKind::Prinz) {
    prinz::Config pc = cfg.systems.prinz;
    pc.seed = seed;
    all = prinz::simulate(pc);
    d.prinz_truth = true;
  } else if (d.system == SystemKind::Sswm) {
    sswm::Config sc = cfg.systems.sswm;
    sc.seed = seed;
    d.fitness = sswm::generate_fitness_landscape(seed, cfg.systems.landscape);
    all = sswm::simulate(sc, *d.fitness);
  } else {
    throw Error("simulate: the csv system has no simulator");
  }
  auto split = split_trajectories(std::move(all), cfg.systems.train_fraction);
  d.train = std::move(split.train);
  d.test = std::move(split.test);
  d.test_clean = d.test;
  return d;
}

Dataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& sy = cfg.systems;
  Dataset d;
  d.system = sy.system;
  if (!sy.data_dir.empty() || sy.system == SystemKind::Csv) {
    CsvSchema schema;
    schema.lag_time = cfg.lag_time();
    schema.system_id = to_string(sy.system);
    if (sy.system == SystemKind::Prinz) {
      schema.kind = StateKind::Continuous;
    } else if (sy.system == SystemKind::Sswm) {
      schema.kind = StateKind::Discrete;
      schema.state_space_size = sy.landscape.alleles_per_locus * sy.landscape.alleles_per_locus;
    } else {
      schema.kind = sy.csv_kind;
      schema.state_space_size = sy.csv_state_space_size;
    }
    if (!sy.data_dir.empty()) {
      const auto dir = seed_data_dir(sy.data_dir, seed);
      d.train = load_trajectories_csv(dir / "train.csv", schema);
      d.test = load_trajectories_csv(dir / "test.csv", schema);
      if (sy.system == SystemKind::Sswm) d.fitness = read_fitness(dir / "fitness.csv", sy.landscape);
    } else {
      auto train = load_trajectories_csv(sy.train_csv, schema);
      if (sy.test_csv.empty()) {
        auto split = split_trajectories(std::move(train), sy.train_fraction);
        d.train = std::move(split.train);
        d.test = std::move(split.test);
      } else {
        d.train = std::move(train);
        d.test = load_trajectories_csv(sy.test_csv, schema);
      }
    }
    d.prinz_truth = sy.system == SystemKind::Prinz || (sy.system == SystemKind::Csv && sy.csv_truth == "prinz");
    if (d.train.empty() || d.test.empty()) throw Error("dataset: train and test sets must both be non-empty");
    d.test_clean = d.test;
  } else {
    d = simulate_dataset(cfg, seed);
  }
  if (d.prinz_truth && d.train.front().dim != 2) throw Error("dataset: the prinz potential needs 2-D observations");
  if (sy.data_fraction < 1.0) {
    for (auto& t : d.train) t = truncate(t, sy.data_fraction);
  }
  if (sy.observation_noise > 0.0) {
    if (d.train.front().kind != StateKind::Continuous) throw Error("dataset: observation noise needs continuous data");
    d.train = add_observation_noise(d.train, sy.observation_noise, seed * 2 + 1);
    d.test = add_observation_noise(d.test, sy.observation_noise, seed * 2 + 2);
  }
  d.train = with_lag(std::move(d.train), cfg.lag_time());
  d.test = with_lag(std::move(d.test), cfg.lag_time());
  d.test_clean = with_lag(std::move(d.test_clean), cfg.lag_time());
  return d;
}

evaluation::EnergyFn truth_fn(const Dataset& data) {
  if (data.prinz_truth) {
    return [](const Trajectory& t) {
      std::vector<double> v(t.length());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = prinz::potential(t.state(i));
      return v;
    };
  }
  if (data.fitness) {
    const sswm::FitnessLandscape* land = &*data.fitness;
    return [land](const Trajectory& t) {
      std::vector<double> v(t.length());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = land->fitness.at(static_cast<std::size_t>(t.code(i)));
      return v;
    };
  }
  return {};
}

evaluation::GridSpec divergence_grid(const ExperimentConfig& cfg, const Dataset& data) {
  const Trajectory& t = data.train.front();
  if (t.kind == StateKind::Discrete) {
    const auto A = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(t.state_space_size))));
    if (A * A != t.state_space_size) throw Error("grid: discrete data needs a square two-locus state space");
    const std::size_t bins = cfg.evaluation.grid_bins ? cfg.evaluation.grid_bins : 8;
    return evaluation::GridSpec::square(bins, 0.0, static_cast<double>(A), 2);
  }
  const std::size_t bins = cfg.evaluation.grid_bins ? cfg.evaluation.grid_bins : 5;
  return evaluation::GridSpec::square(bins, cfg.evaluation.grid_lower, cfg.evaluation.grid_upper, t.dim);
}

Trajectory rho_f_probes(const ExperimentConfig& cfg, const Dataset& data) {
  const Trajectory& t = data.train.front();
  if (t.kind == StateKind::Discrete) return evaluation::genotype_probes(t.state_space_size, t.state_space_size);
  const auto grid = evaluation::GridSpec::square(cfg.evaluation.rho_f_bins, cfg.evaluation.grid_lower,
                                                 cfg.evaluation.grid_upper, t.dim);
  return evaluation::grid_probes(grid, t.dim);
}

TrainOutcome train_model(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed) {
  TrainOutcome out;
  const std::string hash = config_hash(cfg);
  // Output location and seed list are not part of a single run.
  out.checkpoint.config = config_to_json(cfg);
  out.checkpoint.config.erase("cli");
  out.checkpoint.config_hash = hash;
  out.checkpoint.seed = seed;
  auto base = [&](int stage, std::size_t epoch) {
    return Json{{"stage", stage}, {"epoch", epoch}, {"seed", seed}, {"config_hash", hash}};
  };
  const auto spec = codebook::InputSpec::for_trajectory(data.train.front());
  if (!cfg.freeze_imports.empty()) {
    out.checkpoint.codebook = import_frozen(cfg.freeze_imports, spec);
    codebook::recount_occupancy(out.checkpoint.codebook, data.train, cfg.codebook.stride);
  } else {
    auto s1 = codebook::stage1_train(data.train, cfg.codebook, seed, [&](const codebook::Stage1EpochLog& l) {
      Json j = base(1, l.epoch);
      j["reconstruct"] = l.reconstruct;
      j["vq"] = l.vq;
      j["latent"] = nullptr;
      j["code"] = nullptr;
      j["phy"] = nullptr;
      j["total"] = l.reconstruct + l.vq;
      j["active_codewords"] = l.active;
      out.log.push_back(std::move(j));
    });
    out.checkpoint.codebook = std::move(s1.model);
    training::freeze(out.checkpoint.codebook);
  }
  // Lag pairs are taken at the system's modelled lag.
  training::Stage2Config s2cfg = cfg.training;
  s2cfg.lag = cfg.lag_time();
  auto s2 = training::stage2_train(out.checkpoint.codebook, data.train, s2cfg, seed,
                                   [&](const training::Stage2EpochLog& l) {
                                     Json j = base(2, l.epoch);
                                     j["reconstruct"] = nullptr;
                                     j["vq"] = nullptr;
                                     j["latent"] = cfg.training.ablation.disable_latent ? Json() : Json(l.loss.latent);
                                     j["code"] = l.loss.code;
                                     j["phy"] = cfg.training.ablation.disable_phy ? Json() : Json(l.loss.phy);
                                     j["total"] = l.loss.total;
                                     out.log.push_back(std::move(j));
                                   });
  out.checkpoint.fpe = std::move(s2.model);
  return out;
}

Metrics evaluate_model(const ExperimentConfig& cfg, const Dataset& data, CheckpointData& ckpt, std::uint64_t seed) {
  if (!ckpt.fpe) throw Error("evaluate: checkpoint has no trained landscape");
  Metrics m;
  auto& fpe = *ckpt.fpe;
  m.active_codewords = fpe.n();
  m.components = fpe.graph.n_components;
  evaluation::ModelEnergy energy(ckpt.codebook, fpe);
  if (data.has_truth()) {
    const auto truth = truth_fn(data);
    std::vector<double> pred, tv;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      const auto p = energy(data.test[i]);
      const auto t = truth(data.test_clean[i]);
      pred.insert(pred.end(), p.begin(), p.end());
      tv.insert(tv.end(), t.begin(), t.end());
    }
    m.rho_T = evaluation::pearson(pred, tv);
    m.rho_F = evaluation::rho_F(std::cref(energy), truth, rho_f_probes(cfg, data));
  }
  // Rollout m starts where test trajectory m mod n starts and runs as long as
  // that trajectory at lag spacing.
  evaluation::ModelSampler sampler(ckpt.codebook, fpe);
  const std::size_t lag = cfg.lag_time();
  std::vector<Trajectory> ref, pred;
  for (std::size_t r = 0; r < cfg.evaluation.rollouts; ++r) {
    const Trajectory& src = data.test[r % data.test.size()];
    ref.push_back(subsample(src, lag));
    pred.push_back(sampler.unroll(src, 0, ref.back().length() - 1, seed * 1000003ull + r));
  }
  const auto div = evaluation::mjs_tjs(ref, pred, divergence_grid(cfg, data), 1);
  m.mjs = div.mjs;
  m.tjs = div.tjs;
  return m;
}

BaselineKind parse_baseline(const std::string& s) {
  if (s == "msm") return BaselineKind::Msm;
  if (s == "ape") return BaselineKind::Ape;
  throw Error("unknown baseline '" + s + "' (valid kinds: msm, ape)");
}

std::string to_string(BaselineKind k) { return k == BaselineKind::Msm ? "msm" : "ape"; }

Metrics evaluate_baseline(BaselineKind kind, const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed) {
  if (!data.has_truth()) throw Error("baseline: no true energy available for this dataset");
  evaluation::EnergyFn predicted;
  std::vector<double> msm;
  evaluation::GridSpec grid;
  std::optional<evaluation::ApeModel> ape;
  if (kind == BaselineKind::Msm) {
    grid = divergence_grid(cfg, data);
    msm = evaluation::msm_energy(data.train, grid);
    predicted = [&](const Trajectory& t) {
      const auto cells = evaluation::discretize(t, grid);
      std::vector<double> v(cells.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = msm[static_cast<std::size_t>(cells[i])];
      return v;
    };
  } else {
    ape = evaluation::train_ape(data.train, cfg.evaluation.ape, seed);
    predicted = [&](const Trajectory& t) { return ape->energy(t); };
  }
  const auto truth = truth_fn(data);
  Metrics m;
  std::vector<double> pred, tv;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const auto p = predicted(data.test[i]);
    const auto t = truth(data.test_clean[i]);
    pred.insert(pred.end(), p.begin(), p.end());
    tv.insert(tv.end(), t.begin(), t.end());
  }
  m.rho_T = evaluation::pearson(pred, tv);
  m.rho_F = evaluation::rho_F(predicted, truth, rho_f_probes(cfg, data));
  return m;
}

Json metrics_json(const Metrics& m) {
  auto opt = [](const auto& v) { return v ? Json(*v) : Json(); };
  return {{"rho_T", opt(m.rho_T)},
          {"rho_F", opt(m.rho_F)},
          {"mjs", opt(m.mjs)},
          {"tjs", opt(m.tjs)},
          {"active_codewords", opt(m.active_codewords)},
          {"components", opt(m.components)}};
}

Json make_report(const std::string& kind, const ExperimentConfig& cfg,
                 const std::vector<std::pair<std::uint64_t, Metrics>>& runs, const std::vector<std::string>& notices) {
  Json r;
  r["schema_version"] = kReportSchemaVersion;
  r["kind"] = kind;
  r["system"] = to_string(cfg.systems.system);
  r["config_hash"] = config_hash(cfg);
  Json seeds = Json::array(), per_seed = Json::array();
  for (const auto& [seed, m] : runs) {
    seeds.push_back(seed);
    Json j = metrics_json(m);
    j["seed"] = seed;
    per_seed.push_back(j);
  }
  r["seeds"] = seeds;
  r["seed"] = runs.size() == 1 ? Json(runs.front().first) : Json();
  r["per_seed"] = per_seed;
  Json agg = Json::object();
  for (const char* key : {"rho_T", "rho_F", "mjs", "tjs", "active_codewords"}) {
    std::vector<double> v;
    for (const Json& j : per_seed) {
      if (!j[key].is_null()) v.push_back(j[key].get<double>());
    }
    if (v.empty()) {
      agg[key] = nullptr;
      continue;
    }
    const double mu = mean_of(v);
    double var = 0.0;
    for (double x : v) var += (x - mu) * (x - mu);
    var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    agg[key] = {{"mean", mu}, {"std", std::sqrt(var)}, {"median", median}, {"n", n}};
  }
  r["aggregate"] = agg;
  r["notices"] = notices;
  return r;
}

}  // namespace elearn::cli
