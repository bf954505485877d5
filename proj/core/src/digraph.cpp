#include "pushpull/digraph.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pushpull/rng.hpp"

namespace pushpull {

Digraph::Digraph(std::size_t n, std::vector<Edge> edges)
    : n_(n), edges_(std::move(edges)), in_(n), out_(n) {
  std::sort(edges_.begin(), edges_.end());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto [parent, child] = edges_[e];
    if (parent >= n_ || child >= n_) {
      throw std::invalid_argument("edge (" + std::to_string(parent + 1) + "," +
                                  std::to_string(child + 1) + ") out of range for n=" +
                                  std::to_string(n_));
    }
    if (parent == child) {
      throw std::invalid_argument("self-loop at agent " + std::to_string(parent + 1));
    }
    if (e > 0 && edges_[e - 1] == edges_[e]) {
      throw std::invalid_argument("duplicate edge (" + std::to_string(parent + 1) + "," +
                                  std::to_string(child + 1) + ")");
    }
    out_[parent].push_back(child);
    in_[child].push_back(parent);
  }
  for (auto& list : in_) std::sort(list.begin(), list.end());
}

bool Digraph::has_edge(AgentId parent, AgentId child) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{parent, child});
}

Digraph Digraph::reversed() const {
  std::vector<Edge> flipped;
  flipped.reserve(edges_.size());
  for (const auto& [p, c] : edges_) flipped.emplace_back(c, p);
  return Digraph(n_, std::move(flipped));
}

std::vector<std::size_t> strongly_connected_components(const Digraph& g, std::size_t* count) {
  constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();
  const std::size_t n = g.size();
  std::vector<std::size_t> index(n, unvisited), low(n, 0), comp(n, unvisited);
  std::vector<bool> on_stack(n, false);
  std::vector<AgentId> stack;
  std::size_t next_index = 0, next_comp = 0;

  // Iterative Tarjan: frames hold (vertex, next out-neighbor position).
  std::vector<std::pair<AgentId, std::size_t>> frames;
  for (AgentId root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& [v, pos] = frames.back();
      const auto& out = g.out_neighbors(v);
      if (pos < out.size()) {
        const AgentId w = out[pos++];
        if (index[w] == unvisited) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const AgentId done = v;
      frames.pop_back();
      if (!frames.empty()) {
        const AgentId parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
      if (low[done] == index[done]) {
        AgentId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = next_comp;
        } while (w != done);
        ++next_comp;
      }
    }
  }
  if (count) *count = next_comp;
  return comp;
}

std::vector<AgentId> root_set(const Digraph& g) {
  const std::size_t n = g.size();
  if (n == 0) return {};
  std::size_t count = 0;
  const auto comp = strongly_connected_components(g, &count);
  std::vector<bool> has_external_parent(count, false);
  for (const auto& [p, c] : g.edges()) {
    if (comp[p] != comp[c]) has_external_parent[comp[c]] = true;
  }
  std::size_t sources = 0, source = 0;
  for (std::size_t c = 0; c < count; ++c) {
    if (!has_external_parent[c]) {
      ++sources;
      source = c;
    }
  }
  // In a DAG with a single source every vertex is reachable from it.
  if (sources != 1) return {};
  std::vector<AgentId> roots;
  for (AgentId i = 0; i < n; ++i) {
    if (comp[i] == source) roots.push_back(i);
  }
  return roots;
}

bool is_strongly_connected(const Digraph& g) {
  if (g.size() == 0) return true;
  std::size_t count = 0;
  strongly_connected_components(g, &count);
  return count == 1;
}

std::vector<bool> reachable_from(const Digraph& g, AgentId start) {
  std::vector<bool> seen(g.size(), false);
  std::vector<AgentId> frontier{start};
  seen.at(start) = true;
  while (!frontier.empty()) {
    const AgentId v = frontier.back();
    frontier.pop_back();
    for (AgentId w : g.out_neighbors(v)) {
      if (!seen[w]) {
        seen[w] = true;
        frontier.push_back(w);
      }
    }
  }
  return seen;
}

Digraph random_strongly_connected(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("random_strongly_connected: n must be positive");
  const std::size_t max_edges = n * (n - 1);
  if (n == 1 && m == 0) return Digraph(1, {});
  if (m < n) {
    throw std::invalid_argument("random_strongly_connected: need m >= n (got m=" +
                                std::to_string(m) + ", n=" + std::to_string(n) + ")");
  }
  if (m > max_edges) {
    throw std::invalid_argument("random_strongly_connected: m=" + std::to_string(m) +
                                " exceeds n(n-1)=" + std::to_string(max_edges));
  }
  std::vector<Edge> edges;
  edges.reserve(m);
  for (AgentId i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);

  std::vector<Edge> candidates;
  for (AgentId p = 0; p < n; ++p) {
    for (AgentId c = 0; c < n; ++c) {
      if (p != c && c != (p + 1) % n) candidates.emplace_back(p, c);
    }
  }
  CounterRng rng(seed, 0x6772617068ULL);
  rng.shuffle(candidates);
  edges.insert(edges.end(), candidates.begin(),
               candidates.begin() + static_cast<std::ptrdiff_t>(m - n));
  return Digraph(n, std::move(edges));
}

Digraph ring_graph(std::size_t n) {
  std::vector<Edge> edges;
  if (n > 1) {
    for (AgentId i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  }
  if (n == 2) edges.pop_back();
  return Digraph(n, std::move(edges));
}

Digraph bidirectional_star(std::size_t n, AgentId center) {
  std::vector<Edge> edges;
  for (AgentId i = 0; i < n; ++i) {
    if (i == center) continue;
    edges.emplace_back(center, i);
    edges.emplace_back(i, center);
  }
  return Digraph(n, std::move(edges));
}

Digraph complete_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (AgentId p = 0; p < n; ++p) {
    for (AgentId c = 0; c < n; ++c) {
      if (p != c) edges.emplace_back(p, c);
    }
  }
  return Digraph(n, std::move(edges));
}

Digraph drop_leader_inbound(const Digraph& g, const std::vector<bool>& is_leader) {
  std::vector<Edge> kept;
  for (const auto& [p, c] : g.edges()) {
    if (is_leader[c] && !is_leader[p]) continue;
    kept.emplace_back(p, c);
  }
  return Digraph(g.size(), std::move(kept));
}

Digraph drop_leader_outbound(const Digraph& g, const std::vector<bool>& is_leader) {
  std::vector<Edge> kept;
  for (const auto& [p, c] : g.edges()) {
    if (is_leader[p] && !is_leader[c]) continue;
    kept.emplace_back(p, c);
  }
  return Digraph(g.size(), std::move(kept));
}

namespace {

bool leaders_strongly_connected(const Digraph& g, const std::vector<AgentId>& leaders,
                                const std::vector<bool>& is_leader) {
  std::vector<Edge> inner;
  std::vector<std::size_t> local(g.size(), 0);
  for (std::size_t k = 0; k < leaders.size(); ++k) local[leaders[k]] = k;
  for (const auto& [p, c] : g.edges()) {
    if (is_leader[p] && is_leader[c]) inner.emplace_back(local[p], local[c]);
  }
  return is_strongly_connected(Digraph(leaders.size(), std::move(inner)));
}

bool contains_all(const std::vector<AgentId>& haystack, const std::vector<AgentId>& needles) {
  return std::all_of(needles.begin(), needles.end(), [&](AgentId id) {
    return std::binary_search(haystack.begin(), haystack.end(), id);
  });
}

}  // namespace

LeaderFollowerSplit leader_follower_split(const Digraph& g, const std::vector<AgentId>& leaders_in,
                                          std::uint64_t seed) {
  if (leaders_in.empty()) throw std::invalid_argument("leader_follower_split: no leaders");
  std::vector<AgentId> leaders = leaders_in;
  std::sort(leaders.begin(), leaders.end());
  leaders.erase(std::unique(leaders.begin(), leaders.end()), leaders.end());
  std::vector<bool> is_leader(g.size(), false);
  for (AgentId id : leaders) {
    if (id >= g.size()) {
      throw std::invalid_argument("leader_follower_split: leader " + std::to_string(id + 1) +
                                  " out of range");
    }
    is_leader[id] = true;
  }

  std::vector<Edge> edges = g.edges();
  std::vector<Edge> missing;
  for (AgentId p : leaders) {
    for (AgentId c : leaders) {
      if (p != c && !g.has_edge(p, c)) missing.emplace_back(p, c);
    }
  }
  CounterRng rng(seed, 0x6c6561646572ULL);
  rng.shuffle(missing);
  Digraph augmented = g;
  for (const Edge& e : missing) {
    if (leaders_strongly_connected(augmented, leaders, is_leader)) break;
    edges.push_back(e);
    augmented = Digraph(g.size(), edges);
  }

  LeaderFollowerSplit split;
  split.augmented = augmented;
  split.pull_graph = drop_leader_inbound(augmented, is_leader);
  split.push_graph = drop_leader_outbound(augmented, is_leader);
  for (const auto& [p, c] : augmented.edges()) {
    if (is_leader[p] && is_leader[c]) split.leader_links.emplace_back(p, c);
  }

  if (!contains_all(root_set(split.pull_graph), leaders) ||
      !contains_all(root_set(split.push_graph.reversed()), leaders)) {
    throw std::invalid_argument(
        "leader_follower_split: leaders do not reach every follower after pruning");
  }
  return split;
}

Digraph realize(const GraphSequence& seq, std::uint64_t k) {
  if (seq.activation_probability >= 1.0) return seq.base;
  std::vector<Edge> active;
  const auto& edges = seq.base.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (seq.protected_edges.count(edges[e]) ||
        to_unit(hash_words(seq.seed, k, e, 0x6c696e6bULL)) < seq.activation_probability) {
      active.push_back(edges[e]);
    }
  }
  return Digraph(seq.base.size(), std::move(active));
}

Digraph read_edge_list(std::istream& in) {
  std::string line;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      const auto first = out.find_first_not_of(" \t\r");
      if (first == std::string::npos || out[first] == '#') continue;
      return true;
    }
    return false;
  };
  if (!next_line(line)) throw std::invalid_argument("edge list: missing header line 'n m'");
  std::istringstream header(line);
  long long n = -1, m = -1;
  if (!(header >> n >> m) || n <= 0 || m < 0) {
    throw std::invalid_argument("edge list: malformed header '" + line + "'");
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long long e = 0; e < m; ++e) {
    if (!next_line(line)) {
      throw std::invalid_argument("edge list: expected " + std::to_string(m) + " edges, got " +
                                  std::to_string(e));
    }
    std::istringstream row(line);
    long long p = 0, c = 0;
    if (!(row >> p >> c) || p < 1 || c < 1 || p > n || c > n) {
      throw std::invalid_argument("edge list: malformed edge line '" + line + "'");
    }
    edges.emplace_back(static_cast<AgentId>(p - 1), static_cast<AgentId>(c - 1));
  }
  return Digraph(static_cast<std::size_t>(n), std::move(edges));
}

void write_edge_list(std::ostream& out, const Digraph& g) {
  out << g.size() << ' ' << g.edge_count() << '\n';
  for (const auto& [p, c] : g.edges()) out << p + 1 << ' ' << c + 1 << '\n';
}

}  // namespace pushpull
