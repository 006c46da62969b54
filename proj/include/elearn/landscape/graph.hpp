#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "elearn/codebook/codebook.hpp"
#include "elearn/systems/trajectory.hpp"

namespace elearn::landscape {

// Undirected simple graph in CSR form. Row i lists the neighbours of i in
// increasing order; edge e of row i is the directed slot (i <- neighbors[e]).
struct Graph {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;     // n + 1
  std::vector<std::int64_t> neighbors;  // nnz
  std::vector<std::int64_t> owner;      // nnz, row of each slot
  std::vector<std::size_t> reverse;     // slot of the mirrored edge
  // Symmetric normalised adjacency with self loops, D^-1/2 (A + I) D^-1/2.
  std::vector<double> self_weight;  // n
  std::vector<double> edge_weight;  // nnz

  // Symmetrises, drops self loops and duplicates.
  static Graph from_edges(std::size_t n, const std::vector<std::pair<std::int64_t, std::int64_t>>& edges);

  std::size_t nnz() const { return neighbors.size(); }
  std::size_t degree(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  bool has_edge(std::size_t i, std::size_t j) const;
  // Connected-component label per node, labels dense from 0.
  std::vector<std::size_t> components() const;
  std::size_t n_components() const;
  bool connected() const { return n_components() <= 1; }
  std::vector<std::pair<std::int64_t, std::int64_t>> undirected_edges() const;
};

// Nodes are the active codewords of a trained codebook.
struct LandscapeGraph {
  Graph graph;
  std::vector<std::int64_t> codewords;  // node -> codeword index
  std::vector<std::int64_t> node_of;    // codeword index -> node, -1 if inactive
  std::vector<std::size_t> occupancy;   // per node
  std::size_t n_components = 0;

  std::size_t n() const { return graph.n; }
  std::int64_t node(std::int64_t codeword) const;
};

// Edge {i, j} whenever consecutive observations map to codewords i then j.
// Occupancy is recounted over every observation used.
LandscapeGraph build_topology(const codebook::CodebookModel& model, const std::vector<Trajectory>& trajs);
LandscapeGraph build_topology_from_sequences(const std::vector<std::vector<std::int64_t>>& code_sequences,
                                             std::size_t n_codewords);

// Codeword index of every observation of `traj`.
std::vector<std::int64_t> assign_trajectory(const codebook::CodebookModel& model, const Trajectory& traj,
                                            std::size_t stride = 1);

}  // namespace elearn::landscape
