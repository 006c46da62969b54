#include "elearn/landscape/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace elearn::landscape {

Graph Graph::from_edges(std::size_t n, const std::vector<std::pair<std::int64_t, std::int64_t>>& edges) {
  std::vector<std::vector<std::int64_t>> adj(n);
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
      throw Error("graph: edge (" + std::to_string(a) + ", " + std::to_string(b) + ") outside " +
                  std::to_string(n) + " nodes");
    }
    if (a == b) continue;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  Graph g;
  g.n = n;
  g.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = adj[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    g.offsets[i + 1] = g.offsets[i] + row.size();
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : adj[i]) {
      g.neighbors.push_back(j);
      g.owner.push_back(static_cast<std::int64_t>(i));
    }
  }
  g.reverse.resize(g.nnz());
  for (std::size_t e = 0; e < g.nnz(); ++e) {
    const auto j = static_cast<std::size_t>(g.neighbors[e]);
    const auto begin = g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[j]);
    const auto end = g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[j + 1]);
    g.reverse[e] = static_cast<std::size_t>(std::lower_bound(begin, end, g.owner[e]) - g.neighbors.begin());
  }
  g.self_weight.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.self_weight[i] = 1.0 / static_cast<double>(g.degree(i) + 1);
  g.edge_weight.resize(g.nnz());
  for (std::size_t e = 0; e < g.nnz(); ++e) {
    const double di = static_cast<double>(g.degree(static_cast<std::size_t>(g.owner[e])) + 1);
    const double dj = static_cast<double>(g.degree(static_cast<std::size_t>(g.neighbors[e])) + 1);
    g.edge_weight[e] = 1.0 / std::sqrt(di * dj);
  }
  return g;
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  const auto begin = neighbors.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
  const auto end = neighbors.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
  return std::binary_search(begin, end, static_cast<std::int64_t>(j));
}

std::vector<std::size_t> Graph::components() const {
  constexpr auto kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> label(n, kUnset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != kUnset) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) {
        const auto j = static_cast<std::size_t>(neighbors[e]);
        if (label[j] == kUnset) {
          label[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  return label;
}

std::size_t Graph::n_components() const {
  const auto l = components();
  return l.empty() ? 0 : *std::max_element(l.begin(), l.end()) + 1;
}

std::vector<std::pair<std::int64_t, std::int64_t>> Graph::undirected_edges() const {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::size_t e = 0; e < nnz(); ++e) {
    if (owner[e] < neighbors[e]) out.emplace_back(owner[e], neighbors[e]);
  }
  return out;
}

std::int64_t LandscapeGraph::node(std::int64_t codeword) const {
  if (codeword < 0 || static_cast<std::size_t>(codeword) >= node_of.size() || node_of[codeword] < 0) {
    throw Error("codeword " + std::to_string(codeword) + " is not active");
  }
  return node_of[codeword];
}

std::vector<std::int64_t> assign_trajectory(const codebook::CodebookModel& model, const Trajectory& traj,
                                            std::size_t stride) {
  codebook::StatePool pool(model.spec);
  pool.add(traj, stride);
  std::vector<std::int64_t> out;
  out.reserve(pool.size());
  constexpr std::size_t kChunk = 8192;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < pool.size(); start += kChunk) {
    rows.resize(std::min(kChunk, pool.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto idx = model.assign(model.encode(pool.features(rows)));
    out.insert(out.end(), idx.begin(), idx.end());
  }
  return out;
}

LandscapeGraph build_topology_from_sequences(const std::vector<std::vector<std::int64_t>>& seqs,
                                             std::size_t n_codewords) {
  std::vector<std::size_t> counts(n_codewords, 0);
  for (const auto& s : seqs) {
    for (auto c : s) {
      if (c < 0 || static_cast<std::size_t>(c) >= n_codewords) {
        throw Error("topology: codeword " + std::to_string(c) + " out of range");
      }
      ++counts[c];
    }
  }
  LandscapeGraph lg;
  lg.node_of.assign(n_codewords, -1);
  for (std::size_t c = 0; c < n_codewords; ++c) {
    if (counts[c] > 0) {
      lg.node_of[c] = static_cast<std::int64_t>(lg.codewords.size());
      lg.codewords.push_back(static_cast<std::int64_t>(c));
      lg.occupancy.push_back(counts[c]);
    }
  }
  if (lg.codewords.size() < 2) {
    throw Error("topology: " + std::to_string(lg.codewords.size()) +
                " active codeword(s); at least 2 are needed for a landscape graph");
  }
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  for (const auto& s : seqs) {
    for (std::size_t t = 1; t < s.size(); ++t) {
      if (s[t] != s[t - 1]) edges.emplace_back(lg.node_of[s[t - 1]], lg.node_of[s[t]]);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (edges.empty()) throw Error("topology: trajectories never change codeword, so the graph has no edges");
  lg.graph = Graph::from_edges(lg.codewords.size(), edges);
  lg.n_components = lg.graph.n_components();
  return lg;
}

LandscapeGraph build_topology(const codebook::CodebookModel& model, const std::vector<Trajectory>& trajs) {
  std::vector<std::vector<std::int64_t>> seqs;
  seqs.reserve(trajs.size());
  for (const auto& t : trajs) seqs.push_back(assign_trajectory(model, t));
  return build_topology_from_sequences(seqs, model.K());
}

}  // namespace elearn::landscape
