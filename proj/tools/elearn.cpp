#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "elearn/cli/commands.hpp"

namespace {

using elearn::cli::Json;

int fail(const std::string& kind, const std::string& command, const std::string& message, int code) {
  Json err = {{"error", {{"kind", kind}, {"command", command}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy landscape estimation from trajectories"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "Experiment config (TOML subset)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Run this single seed instead of the configured list");
  app.add_option("--out", out_dir, "Output directory (overrides [cli] output_dir)");

  auto* simulate = app.add_subcommand("simulate", "Generate train/test trajectory CSVs");
  auto* train = app.add_subcommand("train", "Run stage 1 and stage 2 training");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate trained checkpoints");
  std::string checkpoint;
  evaluate->add_option("--checkpoint", checkpoint, "Evaluate this checkpoint only")->check(CLI::ExistingFile);
  auto* baseline = app.add_subcommand("baseline", "Evaluate the msm or ape baseline");
  std::string kind;
  baseline->add_option("kind", kind, "msm or ape")->required();
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate along one axis");
  std::string axis;
  std::vector<double> values;
  sweep->add_option("--axis", axis, "data_size, K or noise (default from [sweep])");
  sweep->add_option("--values", values, "Axis values, comma or space separated (default from [sweep])")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", "", e.what(), 2);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    elearn::cli::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = elearn::cli::load_config(config_path);
    if (seed) cfg.seeds = {*seed};
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const std::filesystem::path out = cfg.output_dir;

    Json result;
    if (*simulate) {
      result = elearn::cli::cmd_simulate(cfg, out);
    } else if (*train) {
      result = elearn::cli::cmd_train(cfg, out);
    } else if (*evaluate) {
      std::optional<std::filesystem::path> ck;
      if (!checkpoint.empty()) ck = checkpoint;
      result = elearn::cli::cmd_evaluate(cfg, out, ck);
    } else if (*baseline) {
      result = elearn::cli::cmd_baseline(kind, cfg, out);
    } else {
      result = elearn::cli::cmd_sweep(cfg, out, axis.empty() ? cfg.sweep.axis : axis,
                                      values.empty() ? cfg.sweep.values : values);
    }
    std::cout << result.dump(2) << std::endl;
    return 0;
  } catch (const elearn::Error& e) {
    return fail("error", command, e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", command, e.what(), 1);
  }
}
