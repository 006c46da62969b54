#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "elearn/cli/config.hpp"

namespace elearn::cli {

// Every command runs once per seed in cfg.seeds and writes below `out`.
// Per-seed artefacts go to out/seed_<s>/.

// train.csv, test.csv, fitness.csv (sswm) and metadata.json in
// out/seed_<s>/data/.
Json cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out);

// checkpoint.elck and train_log.jsonl in out/seed_<s>/; wall time goes to
// timing.json so the other files stay reproducible.
Json cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out);

// Evaluates out/seed_<s>/checkpoint.elck, or `checkpoint` for a single run,
// and writes out/report.json.
Json cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

// Writes out/baseline_<kind>.json.
Json cmd_baseline(const std::string& kind, const ExperimentConfig& cfg, const std::filesystem::path& out);

// Train and evaluate per axis value and seed; writes the tidy table
// out/sweep_<axis>.csv with columns axis,axis_value,seed,metric,value and
// each job's metrics under out/sweep_<axis>/<value>/seed_<s>/.
Json cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out, const std::string& axis,
               const std::vector<double>& values);

// Config with one sweep axis value applied.
ExperimentConfig apply_axis(ExperimentConfig cfg, const std::string& axis, double value);

}  // namespace elearn::cli
