#include <doctest.h>

#include <cmath>
#include <set>

#include "elearn/numerics/random.hpp"
#include "elearn/systems/observation.hpp"
#include "elearn/systems/prinz.hpp"
#include "elearn/systems/sswm.hpp"
#include "elearn/systems/trajectory_io.hpp"

using namespace elearn;

namespace {

double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (sab - sa * sb / n) / std::sqrt((saa - sa * sa / n) * (sbb - sb * sb / n));
}

}  // namespace

TEST_CASE("prinz potential examples") {
  // Both quartics vanish at the origin.
  const std::array<double, 2> zero{0.0, 0.0};
  CHECK(prinz::potential(zero) == 0.0);
  // Hand-evaluated at (1, 1): (1 - 1/16 - 2 + 3/16) + (1 - 1/8 - 2 + 3/8).
  const std::array<double, 2> one{1.0, 1.0};
  CHECK(prinz::potential(one) == doctest::Approx(-0.875 - 0.75));
}

TEST_CASE("prinz gradient matches central differences") {
  auto rng = stream_rng(3, 0);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double h = 1e-6;
  for (int t = 0; t < 200; ++t) {
    std::array<double, 2> x{u(rng), u(rng)};
    const auto g = prinz::gradient(x);
    for (int d = 0; d < 2; ++d) {
      auto xp = x, xm = x;
      xp[d] += h;
      xm[d] -= h;
      CHECK(std::abs(g[d] - (prinz::potential(xp) - prinz::potential(xm)) / (2 * h)) < 1e-6);
    }
  }
}

TEST_CASE("prinz wells are stationary points with the lowest energies") {
  const auto wells = prinz::well_centers();
  REQUIRE(wells.size() == 4);
  for (const auto& w : wells) {
    const auto g = prinz::gradient(w);
    CHECK(std::abs(g[0]) < 1e-9);
    CHECK(std::abs(g[1]) < 1e-9);
  }
}

TEST_CASE("prinz simulation is deterministic and visits all wells") {
  prinz::Config cfg;
  cfg.n_trajectories = 2;
  cfg.n_steps = 20000;
  cfg.seed = 4;
  const auto a = prinz::simulate(cfg);
  const auto b = prinz::simulate(cfg);
  REQUIRE(a.size() == 2);
  CHECK(a == b);
  CHECK(a[0].length() == 20000);
  cfg.seed = 5;
  CHECK(prinz::simulate(cfg) != a);
}

TEST_CASE("long prinz run is Boltzmann-consistent on a coarse grid") {
  prinz::Config cfg;
  cfg.n_trajectories = 4;
  cfg.n_steps = 100000;
  const auto trajs = prinz::simulate(cfg);
  const int bins = 8;
  std::vector<double> count(bins * bins, 0.0);
  for (const auto& t : trajs) {
    for (std::size_t i = 0; i < t.length(); ++i) {
      const auto s = t.state(i);
      const int a = std::clamp(static_cast<int>((s[0] + 2.0) / 4.0 * bins), 0, bins - 1);
      const int b = std::clamp(static_cast<int>((s[1] + 2.0) / 4.0 * bins), 0, bins - 1);
      count[a * bins + b] += 1.0;
    }
  }
  // Boltzmann weight per cell from the potential at the centre; for sigma = 1
  // the stationary density is exp(-2V/sigma^2), kT_eff = 0.5.
  std::vector<double> freq, boltz;
  for (int a = 0; a < bins; ++a) {
    for (int b = 0; b < bins; ++b) {
      const std::array<double, 2> c{-2.0 + (a + 0.5) * 4.0 / bins, -2.0 + (b + 0.5) * 4.0 / bins};
      freq.push_back(count[a * bins + b]);
      boltz.push_back(std::exp(-prinz::potential(c) / 0.5));
    }
  }
  CHECK(pearson_oracle(freq, boltz) > 0.8);
}

TEST_CASE("prinz config validation") {
  prinz::Config cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = prinz::Config{};
  cfg.n_trajectories = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("kimura fixation probability") {
  using sswm::SignConvention;
  for (auto conv : {SignConvention::AsWritten, SignConvention::Standard}) {
    CHECK(std::abs(sswm::fixation_probability(0.0, 100, conv) - 0.01) < 1e-12);
    // Series near zero: (1 - e^{-2s}) / (1 - e^{-2Ns}) = 1/N + (N-1)s/N + O(s^2).
    const double s = 1e-9;
    const double sign = conv == SignConvention::Standard ? 1.0 : -1.0;
    CHECK(std::abs(sswm::fixation_probability(s, 100, conv) - (0.01 + sign * 0.99 * s)) < 1e-12);
  }
  // Standard form: a direct evaluation oracle at moderate s.
  const double s = 0.05;
  const double direct = (1 - std::exp(-2 * s)) / (1 - std::exp(-2 * 100 * s));
  CHECK(sswm::fixation_probability(s, 100, SignConvention::Standard) == doctest::Approx(direct).epsilon(1e-12));
  double prev = -1.0;
  for (int i = 0; i <= 200; ++i) {
    const double x = -0.1 + 0.001 * i;
    const double p = sswm::fixation_probability(x, 100, SignConvention::Standard);
    CHECK(p >= prev);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    prev = p;
  }
  CHECK_THROWS_AS(sswm::fixation_probability(0.0, 1), Error);
}

TEST_CASE("sswm landscape and simulation") {
  const auto land = sswm::generate_fitness_landscape(2, {});
  CHECK(land.n_genotypes() == 4096);
  for (double f : land.fitness) CHECK(f > 0.0);
  const auto nb = sswm::neighbors(land, land.genotype(3, 7));
  CHECK(nb.size() == 126);
  for (auto g : nb) CHECK(sswm::hamming(land, g, land.genotype(3, 7)) == 1);

  sswm::Config cfg;
  cfg.n_trajectories = 50;
  cfg.seed = 2;
  const auto trajs = sswm::simulate(cfg, land);
  REQUIRE(trajs.size() == 50);
  for (const auto& t : trajs) {
    CHECK(t.length() == 100);
    for (std::size_t i = 1; i < t.length(); ++i) CHECK(sswm::hamming(land, t.code(i - 1), t.code(i)) <= 1);
  }
  CHECK(sswm::simulate(cfg, land) == trajs);
}

TEST_CASE("trajectory split and subsample") {
  prinz::Config cfg;
  cfg.n_steps = 1000;
  const auto split = split_trajectories(prinz::simulate(cfg));
  CHECK(split.train.size() == 7);
  CHECK(split.test.size() == 3);
  const auto sub = subsample(split.train[0], 100);
  CHECK(sub.length() == 10);
  CHECK(sub.state(3)[0] == split.train[0].state(300)[0]);
}

TEST_CASE("csv round trip is exact and validation catches bad input") {
  prinz::Config cfg;
  cfg.n_trajectories = 2;
  cfg.n_steps = 50;
  const auto trajs = prinz::simulate(cfg);
  const std::string text = trajectories_csv(trajs);
  CsvSchema schema;
  schema.lag_time = trajs[0].lag_time;
  schema.system_id = trajs[0].system_id;
  const auto back = parse_trajectories_csv(text, schema);
  REQUIRE(back.size() == 2);
  CHECK(back[0].values == trajs[0].values);
  CHECK(trajectories_csv(back) == text);
  CHECK_THROWS_AS(parse_trajectories_csv("traj_id,t,x0\n0,0,1.0\n0,1,nan\n", schema), Error);
  CHECK_THROWS_AS(parse_trajectories_csv("traj_id,t,x0,x1\n0,0,1.0\n0,1,2.0,3.0\n", schema), Error);

  CsvSchema disc;
  disc.kind = StateKind::Discrete;
  disc.state_space_size = 16;
  const auto d = parse_trajectories_csv("traj_id,t,genotype\n0,0,3\n0,1,4\n", disc);
  CHECK(d[0].codes == std::vector<std::int64_t>{3, 4});
  CHECK_THROWS_AS(parse_trajectories_csv("traj_id,t,genotype\n0,0,3\n0,1,16\n", disc), Error);
}

TEST_CASE("observation transforms") {
  prinz::Config cfg;
  cfg.n_trajectories = 1;
  cfg.n_steps = 500;
  const auto trajs = prinz::simulate(cfg);
  const auto emb = delay_embed(trajs[0], 4);
  CHECK(emb.length() == 497);
  CHECK(emb.dim == 8);
  CHECK(emb.state(0)[6] == trajs[0].state(3)[0]);
  const auto proj = project_diagonal(trajs[0]);
  CHECK(proj.dim == 1);
  CHECK(proj.state(5)[0] == doctest::Approx((trajs[0].state(5)[0] + trajs[0].state(5)[1]) / std::sqrt(2.0)));
  const auto noisy = add_observation_noise(trajs, 0.0, 1);
  CHECK(noisy[0].values == trajs[0].values);
  const auto noisy2 = add_observation_noise(trajs, 0.5, 1);
  CHECK(noisy2[0].values != trajs[0].values);
}
