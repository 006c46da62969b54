#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "elearn/cli/checkpoint.hpp"
#include "elearn/cli/commands.hpp"
#include "elearn/cli/config.hpp"

using namespace elearn;
using namespace elearn::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const fs::path p = fs::temp_directory_path() /
                     ("elearn_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.systems.prinz.n_trajectories = 3;
  c.systems.prinz.n_steps = 3000;
  c.systems.prinz.lag_time = 20;
  c.codebook.K = 10;
  c.codebook.epochs = 1;
  c.codebook.stride = 4;
  c.training.epochs = 2;
  c.training.fpe.n_int = 3;
  c.evaluation.rollouts = 3;
  c.evaluation.ape.epochs = 2;
  return c;
}

}  // namespace

TEST_CASE("toml subset parser") {
  const auto doc = parse_toml(R"(# comment
top = 1
[codebook]
K = 50          # trailing comment
learning_rate = 2.5e-3
init = "box # not a comment"
[cli]
seeds = [0, 1, 2]
flag = true
)");
  CHECK(doc[""]["top"] == 1);
  CHECK(doc["codebook"]["K"] == 50);
  CHECK(doc["codebook"]["learning_rate"].get<double>() == doctest::Approx(2.5e-3));
  CHECK(doc["codebook"]["init"] == "box # not a comment");
  CHECK(doc["cli"]["seeds"].size() == 3);
  CHECK(doc["cli"]["flag"] == true);
  CHECK_THROWS_WITH_AS(parse_toml("[a]\nx = \"open\n"), doctest::Contains("line 2"), Error);
  CHECK_THROWS_AS(parse_toml("[a\n"), Error);
  CHECK_THROWS_AS(parse_toml("no equals sign\n"), Error);
  CHECK_THROWS_AS(parse_toml("[a]\nx = 1\nx = 2\n"), Error);
}

TEST_CASE("config validation and hashing") {
  const auto c = config_from_json(parse_toml("[codebook]\nK = 77\ninit = \"box\"\n[cli]\nseeds = [3, 4]\n"));
  CHECK(c.codebook.K == 77);
  CHECK(c.codebook.init == codebook::CodebookInit::Box);
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK_THROWS_WITH_AS(config_from_json(parse_toml("[codebook]\nKK = 1\n")), doctest::Contains("unknown key 'KK'"),
                       Error);
  CHECK_THROWS_AS(config_from_json(parse_toml("[nonsense]\nx = 1\n")), Error);
  CHECK_THROWS_AS(config_from_json(parse_toml("[codebook]\nK = \"many\"\n")), Error);
  CHECK_THROWS_AS(config_from_json(parse_toml("[systems]\nsystem = \"lorenz\"\n")), Error);
  CHECK_THROWS_AS(config_from_json(parse_toml("[systems]\ndata_fraction = 0\n")).validate(), Error);

  ExperimentConfig a = tiny_config(), b = tiny_config();
  b.seeds = {5, 6};
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.codebook.K = 11;
  CHECK(config_hash(a) != config_hash(b));
  // Snapshot round trip keeps the hash.
  CHECK(config_hash(config_from_json(config_to_json(a))) == config_hash(a));
  // Published FNV-1a 64 test vectors.
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("train, checkpoint round trip and evaluate") {
  const auto out = scratch_dir("train");
  auto cfg = tiny_config();
  cfg.seeds = {0, 1};
  const Json r = cmd_train(cfg, out);
  for (const char* s : {"seed_0", "seed_1"}) {
    CHECK(fs::exists(out / s / "checkpoint.elck"));
    CHECK(fs::exists(out / s / "timing.json"));
    std::ifstream log(out / s / "train_log.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(log, line);) {
      const Json j = Json::parse(line);
      CHECK(j.contains("stage"));
      CHECK(j["config_hash"] == config_hash(cfg));
      ++lines;
    }
    CHECK(lines == cfg.codebook.epochs + cfg.training.epochs);
  }

  // A single-seed rerun reproduces the files byte for byte.
  const auto again = scratch_dir("train_again");
  auto one = tiny_config();
  one.seeds = {1};
  cmd_train(one, again);
  CHECK(slurp(again / "seed_1" / "checkpoint.elck") == slurp(out / "seed_1" / "checkpoint.elck"));
  CHECK(slurp(again / "seed_1" / "train_log.jsonl") == slurp(out / "seed_1" / "train_log.jsonl"));

  const std::string bytes = slurp(out / "seed_0" / "checkpoint.elck");
  CHECK(bytes.substr(0, 8) == "ELCKPT01");
  auto ck = parse_checkpoint(bytes);
  CHECK(ck.seed == 0);
  CHECK(ck.config_hash == config_hash(cfg));
  REQUIRE(ck.fpe.has_value());
  CHECK(checkpoint_bytes(ck) == bytes);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 8)), Error);
  CHECK_THROWS_AS(parse_checkpoint("NOTACKPT" + bytes.substr(8)), Error);

  const auto frozen = import_frozen(out / "seed_0" / "checkpoint.elck", codebook::InputSpec{});
  for (const auto* p : const_cast<codebook::CodebookModel&>(frozen).parameters()) CHECK(!p->trainable);
  codebook::InputSpec discrete;
  discrete.kind = StateKind::Discrete;
  CHECK_THROWS_WITH_AS(import_frozen(out / "seed_0" / "checkpoint.elck", discrete),
                       doctest::Contains("input layout mismatch"), Error);

  const Json report = cmd_evaluate(cfg, out);
  CHECK(fs::exists(out / "report.json"));
  CHECK(report["schema_version"] == 1);
  CHECK(report["config_hash"] == config_hash(cfg));
  CHECK(report["per_seed"].size() == 2);
  for (const char* m : {"rho_T", "rho_F", "mjs", "tjs"}) {
    CHECK(report["aggregate"][m]["n"] == 2);
    for (const auto& s : report["per_seed"]) CHECK(s[m].is_number());
  }
  for (const auto& s : report["per_seed"]) {
    CHECK(s["mjs"].get<double>() >= 0.0);
    CHECK(s["tjs"].get<double>() <= std::log(2.0) + 1e-12);
  }
  fs::remove_all(out);
  fs::remove_all(again);
}

TEST_CASE("csv input without a known potential reports null correlations") {
  const auto out = scratch_dir("csv");
  auto cfg = tiny_config();
  cmd_simulate(cfg, out);
  const fs::path data = out / "seed_0" / "data";
  REQUIRE(fs::exists(data / "train.csv"));
  REQUIRE(fs::exists(data / "test.csv"));

  auto csv = tiny_config();
  csv.systems.system = SystemKind::Csv;
  csv.systems.train_csv = (data / "train.csv").string();
  csv.systems.test_csv = (data / "test.csv").string();
  csv.systems.csv_lag = 20;
  cmd_train(csv, out / "csv_run");
  const Json report = cmd_evaluate(csv, out / "csv_run");
  const Json& s = report["per_seed"][0];
  CHECK(s["rho_T"].is_null());
  CHECK(s["rho_F"].is_null());
  CHECK(s["mjs"].is_number());

  csv.systems.csv_truth = "prinz";
  const Json with_truth = cmd_evaluate(csv, out / "csv_run");
  CHECK(with_truth["per_seed"][0]["rho_T"].is_number());

  const Json base = cmd_baseline("msm", cfg, out);
  CHECK(fs::exists(out / "baseline_msm.json"));
  CHECK(base["per_seed"][0]["rho_T"].is_number());
  CHECK_THROWS_WITH_AS(cmd_baseline("kmeans", cfg, out), doctest::Contains("msm, ape"), Error);
  fs::remove_all(out);
}

TEST_CASE("sweep axes") {
  const auto c = tiny_config();
  CHECK(apply_axis(c, "K", 30).codebook.K == 30);
  CHECK(apply_axis(c, "noise", 0.4).systems.observation_noise == 0.4);
  CHECK(apply_axis(c, "data_size", 0.5).systems.data_fraction == 0.5);
  CHECK_THROWS_WITH_AS(apply_axis(c, "depth", 1), doctest::Contains("data_size"), Error);
  CHECK_THROWS_AS(apply_axis(c, "K", 2.5), Error);

  const auto out = scratch_dir("sweep");
  cmd_sweep(c, out, "K", {8, 12});
  CHECK(fs::exists(out / "sweep_K.csv"));
  std::ifstream in(out / "sweep_K.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "axis,axis_value,seed,metric,value");
  fs::remove_all(out);
}

TEST_CASE("stage 2 pairs states at the system lag") {
  // SSWM trajectories (100 steps) are shorter than the Prinz lag of 100, so
  // this only trains when the sswm lag of 10 reaches stage 2.
  auto c = tiny_config();
  c.systems.system = SystemKind::Sswm;
  c.systems.sswm.n_trajectories = 40;
  c.codebook.stride = 1;
  const auto out = scratch_dir("sswm");
  const Json r = cmd_train(c, out);
  CHECK(fs::exists(out / "seed_0" / "checkpoint.elck"));
  const Json report = cmd_evaluate(c, out);
  CHECK(report["per_seed"][0]["rho_T"].is_number());
  fs::remove_all(out);
}
