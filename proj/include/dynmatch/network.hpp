#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dynmatch/errors.hpp"

namespace dynmatch {

/// Raw, unvalidated description of a two-way matching network: n agent
/// types, an edge list of unordered type pairs, per-type arrival
/// probabilities and per-edge rewards.
struct NetworkDescription {
  int n = 0;
  std::vector<std::pair<int, int>> matches;
  std::vector<double> lambda;
  std::vector<double> rewards;
};

enum class ValidationCode {
  BadShape,
  IsolatedType,
  SelfLoop,
  ParallelEdge,
  NonPositiveLambda,
  LambdaNotNormalized,
  NonPositiveReward,
  DisconnectedGraph,
};

inline const char* to_string(ValidationCode code) {
  switch (code) {
    case ValidationCode::BadShape: return "BadShape";
    case ValidationCode::IsolatedType: return "IsolatedType";
    case ValidationCode::SelfLoop: return "SelfLoop";
    case ValidationCode::ParallelEdge: return "ParallelEdge";
    case ValidationCode::NonPositiveLambda: return "NonPositiveLambda";
    case ValidationCode::LambdaNotNormalized: return "LambdaNotNormalized";
    case ValidationCode::NonPositiveReward: return "NonPositiveReward";
    case ValidationCode::DisconnectedGraph: return "DisconnectedGraph";
  }
  return "Unknown";
}

struct ValidationError {
  ValidationCode code;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationError> errors;
  bool acyclic = false;
  bool bipartite = false;

  bool ok() const { return errors.empty(); }

  std::string summary() const {
    std::ostringstream out;
    for (const auto& e : errors) {
      out << to_string(e.code) << ": " << e.detail << "\n";
    }
    return out.str();
  }
};

namespace detail {

// Normalizes (i, j) so i < j; match identity is the normalized pair.
inline std::pair<int, int> normalize_edge(std::pair<int, int> e) {
  if (e.first > e.second) std::swap(e.first, e.second);
  return e;
}

inline std::uint64_t edge_key(int i, int j) {
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
}

}  // namespace detail

/// Validated matching network (M, lambda, r). Immutable after construction;
/// safe to share across threads.
class MatchingNetwork {
 public:
  static constexpr double kLambdaTol = 1e-12;

  int num_types() const { return n_; }
  int num_matches() const { return static_cast<int>(matches_.size()); }

  const std::vector<std::pair<int, int>>& matches() const { return matches_; }
  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<double>& rewards() const { return rewards_; }

  /// Match index for the unordered pair (i, j), or -1 when absent.
  int match_index(int i, int j) const {
    auto [a, b] = detail::normalize_edge({i, j});
    auto it = edge_index_.find(detail::edge_key(a, b));
    return it == edge_index_.end() ? -1 : it->second;
  }

  /// Indices of matches incident to type i, ascending.
  const std::vector<int>& incident(int i) const { return incident_[i]; }

  /// Neighbor types of i, ascending.
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

  /// The type matched with i through match m.
  int other_end(int m, int i) const {
    const auto& e = matches_[m];
    return e.first == i ? e.second : e.first;
  }

  bool acyclic() const { return acyclic_; }
  bool bipartite() const { return bipartite_; }

  /// All-pairs unweighted distances via BFS from every node.
  std::vector<std::vector<int>> all_pairs_distances() const {
    std::vector<std::vector<int>> d(n_, std::vector<int>(n_, -1));
    for (int s = 0; s < n_; ++s) {
      d[s][s] = 0;
      std::queue<int> bfs;
      bfs.push(s);
      while (!bfs.empty()) {
        int u = bfs.front();
        bfs.pop();
        for (int v : neighbors_[u]) {
          if (d[s][v] < 0) {
            d[s][v] = d[s][u] + 1;
            bfs.push(v);
          }
        }
      }
    }
    return d;
  }

  friend struct NetworkFactory;

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> matches_;
  std::vector<double> lambda_;
  std::vector<double> rewards_;
  std::vector<std::vector<int>> incident_;
  std::vector<std::vector<int>> neighbors_;
  std::unordered_map<std::uint64_t, int> edge_index_;
  bool acyclic_ = false;
  bool bipartite_ = false;
};

struct Validated {
  std::optional<MatchingNetwork> network;
  ValidationReport report;
};

struct NetworkFactory {
  static Validated build(const NetworkDescription& raw) {
    Validated result;
    auto& errors = result.report.errors;

    if (raw.n <= 0) {
      errors.push_back({ValidationCode::BadShape, "n must be positive"});
      return result;
    }
    if (static_cast<int>(raw.lambda.size()) != raw.n) {
      errors.push_back({ValidationCode::BadShape, "lambda length != n"});
    }
    if (raw.rewards.size() != raw.matches.size()) {
      errors.push_back({ValidationCode::BadShape, "rewards length != match count"});
    }
    if (!errors.empty()) return result;

    MatchingNetwork net;
    net.n_ = raw.n;
    net.lambda_ = raw.lambda;
    net.incident_.resize(raw.n);
    net.neighbors_.resize(raw.n);

    for (std::size_t m = 0; m < raw.matches.size(); ++m) {
      auto [i, j] = detail::normalize_edge(raw.matches[m]);
      if (i < 0 || j >= raw.n) {
        errors.push_back({ValidationCode::BadShape,
                          "match " + std::to_string(m) + " references a type out of range"});
        continue;
      }
      if (i == j) {
        errors.push_back({ValidationCode::SelfLoop,
                          "match " + std::to_string(m) + " pairs type " +
                              std::to_string(i) + " with itself"});
        continue;
      }
      auto key = detail::edge_key(i, j);
      if (net.edge_index_.count(key)) {
        errors.push_back({ValidationCode::ParallelEdge,
                          "duplicate match between types " + std::to_string(i) +
                              " and " + std::to_string(j)});
        continue;
      }
      int idx = static_cast<int>(net.matches_.size());
      net.edge_index_.emplace(key, idx);
      net.matches_.emplace_back(i, j);
      net.rewards_.push_back(raw.rewards[m]);
      net.incident_[i].push_back(idx);
      net.incident_[j].push_back(idx);
      net.neighbors_[i].push_back(j);
      net.neighbors_[j].push_back(i);
    }
    for (int i = 0; i < raw.n; ++i) {
      std::sort(net.neighbors_[i].begin(), net.neighbors_[i].end());
    }

    double total = 0.0;
    for (int i = 0; i < raw.n; ++i) {
      if (!(raw.lambda[i] > 0.0)) {
        errors.push_back({ValidationCode::NonPositiveLambda,
                          "lambda[" + std::to_string(i) + "] = " +
                              std::to_string(raw.lambda[i])});
      }
      total += raw.lambda[i];
    }
    if (std::abs(total - 1.0) > MatchingNetwork::kLambdaTol) {
      errors.push_back({ValidationCode::LambdaNotNormalized,
                        "sum(lambda) = " + std::to_string(total)});
    }
    for (std::size_t m = 0; m < net.rewards_.size(); ++m) {
      if (!(net.rewards_[m] > 0.0)) {
        errors.push_back({ValidationCode::NonPositiveReward,
                          "reward[" + std::to_string(m) + "] = " +
                              std::to_string(net.rewards_[m])});
      }
    }
    for (int i = 0; i < raw.n; ++i) {
      if (net.neighbors_[i].empty()) {
        errors.push_back({ValidationCode::IsolatedType,
                          "type " + std::to_string(i) + " participates in no match"});
      }
    }

    // Connectivity and classification. A connected graph is acyclic iff it
    // has exactly n - 1 edges; bipartiteness via BFS 2-coloring.
    std::vector<int> color(raw.n, -1);
    int reached = 0;
    bool bipartite = true;
    std::queue<int> bfs;
    color[0] = 0;
    bfs.push(0);
    ++reached;
    while (!bfs.empty()) {
      int u = bfs.front();
      bfs.pop();
      for (int v : net.neighbors_[u]) {
        if (color[v] < 0) {
          color[v] = color[u] ^ 1;
          bfs.push(v);
          ++reached;
        } else if (color[v] == color[u]) {
          bipartite = false;
        }
      }
    }
    if (reached != raw.n) {
      errors.push_back({ValidationCode::DisconnectedGraph,
                        "graph has multiple components; split the instance with "
                        "connected_components() and solve each separately"});
    }
    result.report.acyclic = reached == raw.n &&
                            net.num_matches() == raw.n - 1;
    result.report.bipartite = bipartite;
    net.acyclic_ = result.report.acyclic;
    net.bipartite_ = result.report.bipartite;

    if (errors.empty()) {
      result.network = std::move(net);
    }
    return result;
  }
};

/// Validates a raw description. On success `network` is set; otherwise
/// `report.errors` lists every detected problem.
inline Validated validate(const NetworkDescription& raw) {
  return NetworkFactory::build(raw);
}

/// Validating constructor; throws with the full error list on bad input.
inline MatchingNetwork make_network(const NetworkDescription& raw) {
  Validated v = validate(raw);
  if (!v.network) {
    throw InvalidNetworkError("invalid matching network:\n" + v.report.summary());
  }
  return *std::move(v.network);
}

/// Splits a (possibly disconnected) description into per-component
/// descriptions. Lambda is not renormalized; callers decide how to treat
/// per-component arrival masses.
inline std::vector<NetworkDescription> connected_components(const NetworkDescription& raw) {
  std::vector<std::vector<int>> adj(raw.n);
  for (auto [i, j] : raw.matches) {
    if (i >= 0 && i < raw.n && j >= 0 && j < raw.n && i != j) {
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  std::vector<int> comp(raw.n, -1);
  int count = 0;
  for (int s = 0; s < raw.n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = count;
    std::queue<int> bfs;
    bfs.push(s);
    while (!bfs.empty()) {
      int u = bfs.front();
      bfs.pop();
      for (int v : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = count;
          bfs.push(v);
        }
      }
    }
    ++count;
  }
  std::vector<NetworkDescription> parts(count);
  std::vector<int> local(raw.n, -1);
  std::vector<int> sizes(count, 0);
  for (int i = 0; i < raw.n; ++i) {
    local[i] = sizes[comp[i]]++;
  }
  for (int c = 0; c < count; ++c) parts[c].n = sizes[c];
  for (int i = 0; i < raw.n; ++i) {
    parts[comp[i]].lambda.push_back(raw.lambda.empty() ? 0.0 : raw.lambda[i]);
  }
  for (std::size_t m = 0; m < raw.matches.size(); ++m) {
    auto [i, j] = raw.matches[m];
    auto& part = parts[comp[i]];
    part.matches.emplace_back(local[i], local[j]);
    part.rewards.push_back(raw.rewards.empty() ? 0.0 : raw.rewards[m]);
  }
  return parts;
}

/// Tree view of an acyclic network rooted at the (unique) under-demanded
/// node. Carries every derived set the tree policies and the Lyapunov
/// machinery need.
struct RootedTree {
  int root = -1;
  std::vector<int> parent;                 // -1 at the root
  std::vector<std::vector<int>> children;  // ascending type index
  std::vector<int> depth;                  // d(root, i)
  int max_depth = 0;                       // d_r

  // subtree[i] lists T(i) (including i); strict descendants are T(i) \ {i}.
  std::vector<std::vector<int>> subtree;

  // same_parity_ancestors[i] is P(i): proper ancestors j != root with
  // d(j, i) even, ascending.
  std::vector<std::vector<int>> same_parity_ancestors;

  int num_nodes() const { return static_cast<int>(parent.size()); }

  bool in_subtree(int i, int j) const { return in_subtree_[i][static_cast<std::size_t>(j)]; }

  bool is_leaf(int i) const { return children[i].empty(); }

  /// Distance between two tree nodes through their lowest common ancestor.
  int distance(int i, int j) const {
    int a = i, b = j;
    while (depth[a] > depth[b]) a = parent[a];
    while (depth[b] > depth[a]) b = parent[b];
    while (a != b) {
      a = parent[a];
      b = parent[b];
    }
    return depth[i] + depth[j] - 2 * depth[a];
  }

  std::vector<std::vector<bool>> in_subtree_;
};

/// Orients an acyclic edge set as a tree rooted at `root` and derives
/// depth, subtree and parity-ancestor structure.
inline RootedTree root_tree_from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                                       int root) {
  if (static_cast<int>(edges.size()) != n - 1) {
    throw NotAcyclicError("edge set of " + std::to_string(edges.size()) +
                          " edges on " + std::to_string(n) + " nodes is not a tree");
  }
  std::vector<std::vector<int>> adj(n);
  for (auto [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  RootedTree tree;
  tree.root = root;
  tree.parent.assign(n, -1);
  tree.children.assign(n, {});
  tree.depth.assign(n, -1);

  std::queue<int> bfs;
  tree.depth[root] = 0;
  bfs.push(root);
  int reached = 1;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    for (int v : adj[u]) {
      if (tree.depth[v] < 0) {
        tree.depth[v] = tree.depth[u] + 1;
        tree.parent[v] = u;
        tree.children[u].push_back(v);
        bfs.push(v);
        ++reached;
      }
    }
  }
  if (reached != n) {
    throw NotAcyclicError("edge set is disconnected (or cyclic)");
  }
  for (auto& c : tree.children) std::sort(c.begin(), c.end());
  tree.max_depth = *std::max_element(tree.depth.begin(), tree.depth.end());

  tree.subtree.assign(n, {});
  tree.in_subtree_.assign(n, std::vector<bool>(n, false));
  // Every node belongs to the subtree of each of its ancestors (and its own).
  for (int v = 0; v < n; ++v) {
    for (int a = v; a != -1; a = tree.parent[a]) {
      tree.subtree[a].push_back(v);
      tree.in_subtree_[a][v] = true;
    }
  }
  for (auto& s : tree.subtree) std::sort(s.begin(), s.end());

  tree.same_parity_ancestors.assign(n, {});
  for (int v = 0; v < n; ++v) {
    for (int a = tree.parent[v]; a != -1; a = tree.parent[a]) {
      if (a == root) continue;  // the root is under-demanded, not in A0
      if ((tree.depth[v] - tree.depth[a]) % 2 == 0) {
        tree.same_parity_ancestors[v].push_back(a);
      }
    }
    std::sort(tree.same_parity_ancestors[v].begin(), tree.same_parity_ancestors[v].end());
  }
  return tree;
}

/// Tree rooted at the planner-supplied under-demanded node. The network
/// must be acyclic.
inline RootedTree root_tree(const MatchingNetwork& net, int under_demanded) {
  if (!net.acyclic()) {
    throw NotAcyclicError("root_tree requires an acyclic network");
  }
  return root_tree_from_edges(net.num_types(), net.matches(), under_demanded);
}

}  // namespace dynmatch
