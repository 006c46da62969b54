#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "elearn/codebook/codebook.hpp"
#include "elearn/evaluation/model_eval.hpp"
#include "elearn/systems/prinz.hpp"
#include "elearn/systems/sswm.hpp"
#include "elearn/training/training.hpp"

namespace elearn::cli {

using Json = nlohmann::json;

// Parses the TOML subset used by experiment files: [section] headers,
// `key = value` lines, # comments, strings, integers, floats, booleans and
// flat arrays. Returns {section: {key: value}}; keys before any header land
// in section "".
Json parse_toml(const std::string& text);
Json load_toml(const std::filesystem::path& path);

enum class SystemKind { Prinz, Sswm, Csv };
SystemKind parse_system(const std::string& s);
std::string to_string(SystemKind s);

struct SystemsSection {
  SystemKind system = SystemKind::Prinz;
  prinz::Config prinz;
  sswm::Config sswm;
  sswm::LandscapeOptions landscape;
  // csv only
  std::string train_csv;
  std::string test_csv;
  StateKind csv_kind = StateKind::Continuous;
  std::size_t csv_lag = 1;
  std::size_t csv_state_space_size = 0;
  // Known generating potential of a csv dataset: "none" or "prinz".
  std::string csv_truth = "none";
  // Directory written by `simulate`; when set, train/test data are read from it.
  std::string data_dir;
  double train_fraction = 0.7;
  // Observation noise strength (fraction of per-dimension std), continuous only.
  double observation_noise = 0.0;
  // Fraction of every training trajectory kept, from the start.
  double data_fraction = 1.0;
};

struct EvaluationSection {
  std::size_t grid_bins = 0;  // 0 picks 5 (continuous) or 8 (genotypes)
  double grid_lower = -2.0;
  double grid_upper = 2.0;
  std::size_t rho_f_bins = 40;
  std::size_t rollouts = 100;
  std::size_t ransac_iterations = 1000;
  evaluation::ApeConfig ape;
};

struct SweepSection {
  std::string axis = "K";
  std::vector<double> values;
};

struct ExperimentConfig {
  SystemsSection systems;
  codebook::Stage1Config codebook;
  training::Stage2Config training;
  // Checkpoint whose stage-1 parameters are reused and frozen.
  std::string freeze_imports;
  EvaluationSection evaluation;
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds{0};
  SweepSection sweep;

  // Observation steps between modelled transitions.
  std::size_t lag_time() const;
  void validate() const;
};

// Unknown sections or keys are errors, so typos do not pass silently.
ExperimentConfig config_from_json(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
// Full snapshot with every field, stable key order.
Json config_to_json(const ExperimentConfig& cfg);
// FNV-1a of the compact snapshot, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace elearn::cli
