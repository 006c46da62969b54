#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "elearn/cli/checkpoint.hpp"
#include "elearn/cli/config.hpp"
#include "elearn/evaluation/metrics.hpp"

namespace elearn::cli {

struct Dataset {
  SystemKind system = SystemKind::Prinz;
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
  // Test observations before observation noise; equals `test` without noise.
  std::vector<Trajectory> test_clean;
  std::optional<sswm::FitnessLandscape> fitness;
  bool prinz_truth = false;

  bool has_truth() const { return prinz_truth || fitness.has_value(); }
};

// Simulates (prinz, sswm) or loads (csv, data_dir) the data of one seed, then
// applies data_fraction and observation_noise.
Dataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed);
// Dataset exactly as simulated, before any truncation or noise.
Dataset simulate_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

// True energy of each state: the potential for prinz data, fitness for sswm.
evaluation::EnergyFn truth_fn(const Dataset& data);
// Grid shared by MSM and the MJS/TJS divergences.
evaluation::GridSpec divergence_grid(const ExperimentConfig& cfg, const Dataset& data);
// Dense probes for rho_F: grid centres or every genotype.
Trajectory rho_f_probes(const ExperimentConfig& cfg, const Dataset& data);

struct TrainOutcome {
  CheckpointData checkpoint;
  std::vector<Json> log;  // one line per epoch
};

TrainOutcome train_model(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed);

struct Metrics {
  std::optional<double> rho_T;
  std::optional<double> rho_F;
  std::optional<double> mjs;
  std::optional<double> tjs;
  std::optional<std::size_t> active_codewords;
  std::optional<std::size_t> components;
};

Metrics evaluate_model(const ExperimentConfig& cfg, const Dataset& data, CheckpointData& ckpt, std::uint64_t seed);

enum class BaselineKind { Msm, Ape };
BaselineKind parse_baseline(const std::string& s);
std::string to_string(BaselineKind k);
Metrics evaluate_baseline(BaselineKind kind, const ExperimentConfig& cfg, const Dataset& data, std::uint64_t seed);

inline constexpr int kReportSchemaVersion = 1;

// Report with per-seed values and mean/std over seeds for every metric.
Json make_report(const std::string& kind, const ExperimentConfig& cfg,
                 const std::vector<std::pair<std::uint64_t, Metrics>>& runs, const std::vector<std::string>& notices);
Json metrics_json(const Metrics& m);

}  // namespace elearn::cli
