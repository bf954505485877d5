#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <utility>
#include <vector>

namespace pushpull {

using AgentId = std::size_t;
/// Directed edge (parent, child): information flows parent -> child.
using Edge = std::pair<AgentId, AgentId>;

/// Directed interaction topology on agents 0..n-1.
///
/// Ids are zero-based in the API; the edge-list file format is one-based.
/// Self-loops are never stored: positive diagonal weights are added by the
/// mixing-matrix builders.
class Digraph {
public:
  Digraph() = default;
  /// Throws std::invalid_argument on out-of-range ids, self-loops or duplicates.
  Digraph(std::size_t n, std::vector<Edge> edges);

  std::size_t size() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  /// Edges sorted lexicographically.
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Agents that `i` pulls from (parents of i), sorted.
  const std::vector<AgentId>& in_neighbors(AgentId i) const { return in_.at(i); }
  /// Agents that receive from `i` (children of i), sorted.
  const std::vector<AgentId>& out_neighbors(AgentId i) const { return out_.at(i); }

  bool has_edge(AgentId parent, AgentId child) const;
  Digraph reversed() const;

  friend bool operator==(const Digraph& a, const Digraph& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<AgentId>> in_;
  std::vector<std::vector<AgentId>> out_;
};

/// Strongly connected components (Tarjan). comp[i] is the component index of
/// vertex i; components are numbered in reverse topological order.
std::vector<std::size_t> strongly_connected_components(const Digraph& g,
                                                       std::size_t* count = nullptr);

/// Roots of all spanning trees: the members of the unique source component
/// of the condensation when it reaches every vertex, otherwise empty.
std::vector<AgentId> root_set(const Digraph& g);

bool is_strongly_connected(const Digraph& g);

/// Vertices reachable from `start` along directed edges (including start).
std::vector<bool> reachable_from(const Digraph& g, AgentId start);

/// Hamiltonian cycle 0->1->...->n-1->0 plus m-n distinct extra edges drawn
/// uniformly at random. Throws std::invalid_argument if m < n or m > n(n-1).
Digraph random_strongly_connected(std::size_t n, std::size_t m, std::uint64_t seed);

Digraph ring_graph(std::size_t n);
/// Star with `center` linked in both directions to every other vertex.
Digraph bidirectional_star(std::size_t n, AgentId center = 0);
Digraph complete_graph(std::size_t n);

/// Result of wiring a leader-follower (semi-centralized) architecture.
struct LeaderFollowerSplit {
  Digraph augmented;            ///< base graph plus added leader-leader links
  Digraph pull_graph;           ///< G_R: inbound links of the leader subnet removed
  Digraph push_graph;           ///< G_C: outbound links of the leader subnet removed
  std::vector<Edge> leader_links;  ///< all edges inside the leader subnet
};

/// Adds random leader-leader links until the leaders are strongly connected,
/// then drops the leader subnet's inbound links from the pull graph and its
/// outbound links from the push graph. Throws std::invalid_argument if the
/// leader set is empty or out of range, or if the leaders do not end up in
/// both root sets.
LeaderFollowerSplit leader_follower_split(const Digraph& g, const std::vector<AgentId>& leaders,
                                          std::uint64_t seed);

/// Removes the leader subnet's inbound (pull side) or outbound (push side)
/// links from an arbitrary graph on the same vertex set.
Digraph drop_leader_inbound(const Digraph& g, const std::vector<bool>& is_leader);
Digraph drop_leader_outbound(const Digraph& g, const std::vector<bool>& is_leader);

/// Random link activation over a fixed base graph.
struct GraphSequence {
  Digraph base;
  double activation_probability = 1.0;
  std::uint64_t seed = 0;
  std::set<Edge> protected_edges;
};

/// Realized graph at iteration k: every unprotected base edge is present
/// independently with the activation probability. Pure in (seq, k).
Digraph realize(const GraphSequence& seq, std::uint64_t k);

/// Edge-list text: first line "n m", then "parent child" per line, 1-based.
Digraph read_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const Digraph& g);

}  // namespace pushpull
