#pragma once

#include "funclingam/common.hpp"

#include <cstdint>
#include <vector>

namespace funclingam {

/// A causal ordering of p variables: order[k] is the (0-based) index of the
/// variable at position k, causes before effects.
struct CausalOrder {
  std::vector<int> order;

  int p() const { return static_cast<int>(order.size()); }

  bool operator==(const CausalOrder&) const = default;
};

inline bool is_valid_order(const CausalOrder& k, int p) {
  if (static_cast<int>(k.order.size()) != p) return false;
  std::vector<bool> seen(static_cast<std::size_t>(p), false);
  for (int v : k.order) {
    if (v < 0 || v >= p || seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = true;
  }
  return true;
}

inline CausalOrder identity_order(int p) {
  require_arg(p >= 1, "identity_order: p must be >= 1");
  CausalOrder k;
  k.order.resize(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) k.order[static_cast<std::size_t>(i)] = i;
  return k;
}

/// Directed graph on p variables without self-loops. Entry (i, j) set means an
/// edge j -> i (column index is the cause, row index the effect).
struct BinaryGraph {
  int p = 0;
  std::vector<std::uint8_t> adjacency;  // row-major p*p

  BinaryGraph() = default;

  explicit BinaryGraph(int p_) {
    require_arg(p_ >= 1, "BinaryGraph: p must be >= 1");
    p = p_;
    adjacency.assign(static_cast<std::size_t>(p) * static_cast<std::size_t>(p), 0);
  }

  std::size_t index(int i, int j) const {
    require_arg(i >= 0 && i < p && j >= 0 && j < p, "BinaryGraph: index out of range");
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(p) + static_cast<std::size_t>(j);
  }

  /// True iff the edge j -> i is present.
  bool edge(int i, int j) const { return adjacency[index(i, j)] != 0; }

  void set_edge(int i, int j, bool present) {
    require_arg(i != j || !present, "BinaryGraph: self-loops are not allowed");
    adjacency[index(i, j)] = present ? 1 : 0;
  }

  int edge_count() const {
    int c = 0;
    for (std::uint8_t v : adjacency) c += (v != 0);
    return c;
  }

  bool operator==(const BinaryGraph&) const = default;
};

/// Kahn topological sort; true iff the graph has no directed cycle.
inline bool is_acyclic(const BinaryGraph& g) {
  std::vector<int> indegree(static_cast<std::size_t>(g.p), 0);
  for (int i = 0; i < g.p; ++i)
    for (int j = 0; j < g.p; ++j)
      if (g.edge(i, j)) ++indegree[static_cast<std::size_t>(i)];
  std::vector<int> queue;
  for (int i = 0; i < g.p; ++i)
    if (indegree[static_cast<std::size_t>(i)] == 0) queue.push_back(i);
  int removed = 0;
  while (!queue.empty()) {
    int j = queue.back();
    queue.pop_back();
    ++removed;
    for (int i = 0; i < g.p; ++i) {
      if (g.edge(i, j) && --indegree[static_cast<std::size_t>(i)] == 0) queue.push_back(i);
    }
  }
  return removed == g.p;
}

/// The path graph f1 -> f2 -> ... -> fp.
inline BinaryGraph chain_graph(int p) {
  BinaryGraph g(p);
  for (int l = 1; l < p; ++l) g.set_edge(l, l - 1, true);
  return g;
}

}  // namespace funclingam
