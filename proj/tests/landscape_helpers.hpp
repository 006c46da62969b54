#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "elearn/landscape/gnfpe.hpp"
#include "elearn/landscape/graph.hpp"

namespace test_helpers {

// Random connected graph: a random spanning tree plus extra edges.
inline elearn::landscape::Graph random_connected_graph(std::size_t n, double extra, std::mt19937_64& rng) {
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    edges.emplace_back(order[i], order[pick(rng)]);
  }
  std::bernoulli_distribution coin(extra);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.emplace_back(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j));
    }
  }
  return elearn::landscape::Graph::from_edges(n, edges);
}

inline elearn::landscape::LandscapeGraph landscape_of(elearn::landscape::Graph g) {
  elearn::landscape::LandscapeGraph lg;
  const std::size_t n = g.n;
  lg.graph = std::move(g);
  lg.codewords.resize(n);
  std::iota(lg.codewords.begin(), lg.codewords.end(), 0);
  lg.node_of = lg.codewords;
  lg.occupancy.assign(n, 1);
  lg.n_components = lg.graph.n_components();
  return lg;
}

inline elearn::Tensor random_codewords(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  elearn::Tensor t(n, 32);
  for (double& v : t.values()) v = z(rng);
  return t;
}

}  // namespace test_helpers
