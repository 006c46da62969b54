#include "elearn/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "elearn/cli/checkpoint.hpp"
#include "elearn/cli/pipeline.hpp"
#include "elearn/systems/trajectory_io.hpp"

namespace elearn::cli {

namespace fs = std::filesystem;

namespace {

fs::path seed_dir(const fs::path& out, std::uint64_t seed) { return out / ("seed_" + std::to_string(seed)); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("output directory not writable: " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Json cmd_simulate(const ExperimentConfig& cfg, const fs::path& out) {
  cfg.validate();
  if (cfg.systems.system == SystemKind::Csv) throw Error("simulate: the csv system has no simulator");
  Json summary = Json::array();
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = seed_dir(out, seed) / "data";
    ensure_dir(dir);
    const Dataset d = simulate_dataset(cfg, seed);
    write_trajectories_csv(dir / "train.csv", d.train);
    write_trajectories_csv(dir / "test.csv", d.test);
    Json files = {"train.csv", "test.csv"};
    if (d.fitness) {
      std::string csv = "genotype,fitness\n";
      for (std::size_t g = 0; g < d.fitness->n_genotypes(); ++g) {
        csv += std::to_string(g) + "," + format_value(d.fitness->fitness[g]) + "\n";
      }
      write_text(dir / "fitness.csv", csv);
      files.push_back("fitness.csv");
    }
    Json meta = {{"seed", seed},
                 {"config_hash", config_hash(cfg)},
                 {"system", to_string(cfg.systems.system)},
                 {"generation", config_to_json(cfg)["systems"]},
                 {"n_train", d.train.size()},
                 {"n_test", d.test.size()},
                 {"train_states", total_states(d.train)},
                 {"test_states", total_states(d.test)},
                 {"files", files}};
    write_text(dir / "metadata.json", meta.dump(2) + "\n");
    summary.push_back(meta);
  }
  return summary;
}

Json cmd_train(const ExperimentConfig& cfg, const fs::path& out) {
  cfg.validate();
  Json summary = Json::array();
  for (std::uint64_t seed : cfg.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = seed_dir(out, seed);
    ensure_dir(dir);
    const Dataset data = make_dataset(cfg, seed);
    TrainOutcome run;
    try {
      run = train_model(cfg, data, seed);
    } catch (const Error& e) {
      throw Error("train (seed " + std::to_string(seed) + "): " + e.what());
    }
    std::string log;
    for (const Json& line : run.log) log += line.dump() + "\n";
    write_text(dir / "train_log.jsonl", log);
    save_checkpoint(dir / "checkpoint.elck", run.checkpoint);
    const double secs = seconds_since(t0);
    write_text(dir / "timing.json", Json{{"seed", seed}, {"train_seconds", secs}}.dump() + "\n");
    summary.push_back({{"seed", seed},
                       {"checkpoint", (dir / "checkpoint.elck").string()},
                       {"epochs_logged", run.log.size()},
                       {"active_codewords", run.checkpoint.fpe->n()}});
  }
  return summary;
}

Json cmd_evaluate(const ExperimentConfig& cfg, const fs::path& out, const std::optional<fs::path>& checkpoint) {
  cfg.validate();
  std::vector<std::pair<std::uint64_t, Metrics>> runs;
  std::vector<std::string> notices;
  const std::string hash = config_hash(cfg);
  std::vector<fs::path> paths;
  if (checkpoint) {
    paths.push_back(*checkpoint);
  } else {
    for (std::uint64_t seed : cfg.seeds) paths.push_back(seed_dir(out, seed) / "checkpoint.elck");
  }
  for (const fs::path& p : paths) {
    if (!fs::exists(p)) throw Error("evaluate: checkpoint not found: " + p.string());
    CheckpointData ckpt = load_checkpoint(p);
    if (ckpt.config_hash != hash) {
      notices.push_back("checkpoint " + p.string() + " was trained with config " + ckpt.config_hash +
                        ", evaluating with " + hash);
    }
    const Dataset data = make_dataset(cfg, ckpt.seed);
    if (!data.has_truth() && runs.empty()) {
      notices.push_back("no true-energy oracle for this system; rho_T and rho_F are null");
    }
    runs.emplace_back(ckpt.seed, evaluate_model(cfg, data, ckpt, ckpt.seed));
  }
  const Json report = make_report("model", cfg, runs, notices);
  ensure_dir(out);
  write_text(out / "report.json", report.dump(2) + "\n");
  return report;
}

Json cmd_baseline(const std::string& kind_name, const ExperimentConfig& cfg, const fs::path& out) {
  const BaselineKind kind = parse_baseline(kind_name);
  cfg.validate();
  std::vector<std::pair<std::uint64_t, Metrics>> runs;
  for (std::uint64_t seed : cfg.seeds) {
    const Dataset data = make_dataset(cfg, seed);
    runs.emplace_back(seed, evaluate_baseline(kind, cfg, data, seed));
  }
  const Json report = make_report(to_string(kind), cfg, runs, {"baselines estimate energy only; mjs and tjs are null"});
  ensure_dir(out);
  write_text(out / ("baseline_" + to_string(kind) + ".json"), report.dump(2) + "\n");
  return report;
}

ExperimentConfig apply_axis(ExperimentConfig cfg, const std::string& axis, double value) {
  if (axis == "K") {
    if (!(value >= 1.0) || value != std::floor(value)) throw Error("sweep: K values must be positive integers");
    cfg.codebook.K = static_cast<std::size_t>(value);
  } else if (axis == "data_size") {
    if (!(value > 0.0 && value <= 1.0)) throw Error("sweep: data_size values are fractions in (0, 1]");
    cfg.systems.data_fraction = value;
  } else if (axis == "noise") {
    if (!(value >= 0.0)) throw Error("sweep: noise values must be non-negative");
    cfg.systems.observation_noise = value;
  } else {
    throw Error("unknown sweep axis '" + axis + "' (valid axes: data_size, K, noise)");
  }
  return cfg;
}

Json cmd_sweep(const ExperimentConfig& base, const fs::path& out, const std::string& axis,
               const std::vector<double>& values) {
  if (values.empty()) throw Error("sweep: no axis values given");
  for (double v : values) (void)apply_axis(base, axis, v);
  base.validate();
  std::string csv = "axis,axis_value,seed,metric,value\n";
  Json jobs = Json::array();
  for (double v : values) {
    const ExperimentConfig cfg = apply_axis(base, axis, v);
    for (std::uint64_t seed : cfg.seeds) {
      const Dataset data = make_dataset(cfg, seed);
      TrainOutcome run = train_model(cfg, data, seed);
      Metrics m = evaluate_model(cfg, data, run.checkpoint, seed);
      Json row = metrics_json(m);
      if (data.has_truth()) {
        const Metrics msm = evaluate_baseline(BaselineKind::Msm, cfg, data, seed);
        row["msm_rho_T"] = *msm.rho_T;
        row["msm_rho_F"] = *msm.rho_F;
      }
      const fs::path dir = out / ("sweep_" + axis) / format_value(v) / ("seed_" + std::to_string(seed));
      ensure_dir(dir);
      Json job = {{"axis", axis}, {"axis_value", v}, {"seed", seed}, {"config_hash", config_hash(cfg)},
                  {"metrics", row}};
      write_text(dir / "metrics.json", job.dump(2) + "\n");
      for (const auto& [metric, value] : row.items()) {
        if (value.is_null()) continue;
        csv += axis + "," + format_value(v) + "," + std::to_string(seed) + "," + metric + "," +
               format_value(value.get<double>()) + "\n";
      }
      jobs.push_back(job);
    }
  }
  ensure_dir(out);
  write_text(out / ("sweep_" + axis + ".csv"), csv);
  return jobs;
}

}  // namespace elearn::cli
