#pragma once

// Shared test utilities: random instance generators and independent oracles.
// Everything here stays independent of the implementation paths it checks:
// the LP oracle enumerates polytope vertices directly, the IP oracle
// enumerates integer points, and the planted-instance generator constructs
// optimal solutions from first principles (duals + per-type gaps).

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "dynmatch/network.hpp"

namespace testutil {

using dynmatch::MatchingNetwork;
using dynmatch::NetworkDescription;

// Uniform random tree on n nodes: attach node i to a uniform earlier node,
// then relabel by a random permutation.
inline std::vector<std::pair<int, int>> random_tree_edges(int n, std::mt19937_64& rng) {
  std::vector<int> label(n);
  for (int i = 0; i < n; ++i) label[i] = i;
  std::shuffle(label.begin(), label.end(), rng);
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) {
    int p = static_cast<int>(rng() % i);
    edges.emplace_back(label[p], label[i]);
  }
  return edges;
}

// GPG instance with a planted optimum on a random tree. Works backwards
// from per-type gaps eps_i > 0 and strictly positive duals:
//   lambda_i = eps_i + sum_{children j} eps_j   (then normalized),
//   r_{m(i,parent)} = y_i + y_parent with y_root = 0, y_i > 0 otherwise.
// The planted basic solution (all tree edges active, slack at the root) is
// then feasible, non-degenerate and uniquely optimal.
struct PlantedInstance {
  NetworkDescription raw;
  int root = 0;
  std::vector<double> eps;     // planted eps_i (normalized scale)
  std::vector<double> z;      // planted z* per match
  double slack_root = 0.0;    // planted s*_root
};

inline PlantedInstance planted_tree_instance(int n, std::mt19937_64& rng) {
  PlantedInstance out;
  out.raw.n = n;
  out.raw.matches = random_tree_edges(n, rng);
  out.root = static_cast<int>(rng() % n);

  // Orient: parent[] toward the planted root.
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : out.raw.matches) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> parent(n, -1), order;
  std::vector<bool> seen(n, false);
  order.push_back(out.root);
  seen[out.root] = true;
  for (std::size_t h = 0; h < order.size(); ++h) {
    for (int v : adj[order[h]]) {
      if (!seen[v]) {
        seen[v] = true;
        parent[v] = order[h];
        order.push_back(v);
      }
    }
  }

  std::uniform_real_distribution<double> unif(0.2, 1.0);
  std::vector<double> eps(n);
  for (int i = 0; i < n; ++i) eps[i] = unif(rng);

  std::vector<double> lambda(n);
  for (int i = 0; i < n; ++i) {
    lambda[i] = eps[i];
    for (int v : adj[i]) {
      if (parent[v] == i) lambda[i] += eps[v];
    }
  }
  double total = 0.0;
  for (double v : lambda) total += v;
  for (auto& v : lambda) v /= total;
  for (auto& v : eps) v /= total;
  out.raw.lambda = lambda;
  out.eps = eps;
  out.slack_root = eps[out.root];

  // Planted rates: z on the edge (i, parent(i)) equals eps-weighted flow
  // through that edge, i.e. the alternating partial sum, which the
  // recursion z_{(i,P(i))} = lambda_i - sum_{children} z_{(j,i)} produces
  // processing nodes leaves-first.
  std::vector<double> up(n, 0.0);  // flow on the parent edge of each node
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int i = *it;
    double v = lambda[i];
    for (int c : adj[i]) {
      if (parent[c] == i) v -= up[c];
    }
    up[i] = v;  // at the root this equals the slack
  }
  out.z.assign(out.raw.matches.size(), 0.0);
  for (std::size_t m = 0; m < out.raw.matches.size(); ++m) {
    auto [a, b] = out.raw.matches[m];
    int child = parent[a] == b ? a : b;
    out.z[m] = up[child];
  }

  // Strictly positive duals off the root make the planted basis optimal.
  std::vector<double> y(n, 0.0);
  for (int i : order) {
    if (i == out.root) continue;
    y[i] = unif(rng);
  }
  out.raw.rewards.assign(out.raw.matches.size(), 0.0);
  for (std::size_t m = 0; m < out.raw.matches.size(); ++m) {
    auto [a, b] = out.raw.matches[m];
    out.raw.rewards[m] = y[a] + y[b];
  }
  return out;
}

// Random connected network (tree plus a few extra edges), arbitrary
// positive lambda and rewards. Not necessarily GPG.
inline NetworkDescription random_connected_instance(int n, int extra_edges,
                                                    std::mt19937_64& rng) {
  NetworkDescription raw;
  raw.n = n;
  raw.matches = random_tree_edges(n, rng);
  std::uniform_int_distribution<int> pick(0, n - 1);
  int attempts = 0;
  while (extra_edges > 0 && attempts < 50) {
    int a = pick(rng), b = pick(rng);
    ++attempts;
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    bool dup = false;
    for (auto [x, y] : raw.matches) {
      auto [p, q] = std::minmax(x, y);
      if (p == a && q == b) dup = true;
    }
    if (dup) continue;
    raw.matches.emplace_back(a, b);
    --extra_edges;
  }
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  raw.lambda.resize(n);
  double total = 0.0;
  for (auto& v : raw.lambda) {
    v = unif(rng);
    total += v;
  }
  for (auto& v : raw.lambda) v /= total;
  raw.rewards.resize(raw.matches.size());
  for (auto& v : raw.rewards) v = unif(rng);
  return raw;
}

// LP oracle: enumerate all basis candidates (n-subsets of the columns of
// [A | I]) and return the best feasible vertex value for
//   max c^T x  s.t.  A x + s = b, x, s >= 0.
inline double lp_vertex_enumeration(const std::vector<std::vector<double>>& A,
                                    const std::vector<double>& b,
                                    const std::vector<double>& c) {
  const int m = static_cast<int>(A.size());
  const int k = static_cast<int>(c.size());
  const int cols = k + m;
  double best = -1e300;

  std::vector<int> subset(m);
  for (int i = 0; i < m; ++i) subset[i] = i;

  auto column = [&](int j, int row) { return j < k ? A[row][j] : (j - k == row ? 1.0 : 0.0); };

  while (true) {
    // Solve B x_B = b by Gaussian elimination with partial pivoting.
    std::vector<std::vector<double>> mat(m, std::vector<double>(m + 1, 0.0));
    for (int r = 0; r < m; ++r) {
      for (int cidx = 0; cidx < m; ++cidx) mat[r][cidx] = column(subset[cidx], r);
      mat[r][m] = b[r];
    }
    bool singular = false;
    for (int col = 0; col < m && !singular; ++col) {
      int piv = col;
      for (int r = col + 1; r < m; ++r) {
        if (std::abs(mat[r][col]) > std::abs(mat[piv][col])) piv = r;
      }
      if (std::abs(mat[piv][col]) < 1e-9) {
        singular = true;
        break;
      }
      std::swap(mat[piv], mat[col]);
      for (int r = 0; r < m; ++r) {
        if (r == col) continue;
        double f = mat[r][col] / mat[col][col];
        if (f == 0.0) continue;
        for (int j = col; j <= m; ++j) mat[r][j] -= f * mat[col][j];
      }
    }
    if (!singular) {
      bool feasible = true;
      double value = 0.0;
      for (int r = 0; r < m; ++r) {
        double x = mat[r][m] / mat[r][r];
        if (x < -1e-9) {
          feasible = false;
          break;
        }
        if (subset[r] < k) value += c[subset[r]] * x;
      }
      if (feasible) best = std::max(best, value);
    }

    // next m-subset of {0..cols-1}
    int pos = m - 1;
    while (pos >= 0 && subset[pos] == cols - m + pos) --pos;
    if (pos < 0) break;
    ++subset[pos];
    for (int j = pos + 1; j < m; ++j) subset[j] = subset[j - 1] + 1;
  }
  return best;
}

inline std::vector<std::vector<double>> matching_matrix(const MatchingNetwork& net) {
  std::vector<std::vector<double>> A(net.num_types(),
                                     std::vector<double>(net.num_matches(), 0.0));
  for (int m = 0; m < net.num_matches(); ++m) {
    auto [a, b] = net.matches()[m];
    A[a][m] = 1.0;
    A[b][m] = 1.0;
  }
  return A;
}

// IP oracle: exhaustive enumeration of integer match vectors y with
// M y <= counts, maximizing r^T y. Viable for tiny counts only.
inline double ip_exhaustive(const MatchingNetwork& net, const std::vector<long long>& counts) {
  const int k = net.num_matches();
  std::vector<long long> y(k, 0);
  std::vector<long long> load(net.num_types(), 0);
  double best = 0.0;

  auto feasible_inc = [&](int m) {
    auto [a, b] = net.matches()[m];
    return load[a] + 1 <= counts[a] && load[b] + 1 <= counts[b];
  };

  // depth-first over y_0..y_{k-1}
  std::function<void(int, double)> rec = [&](int m, double value) {
    if (m == k) {
      best = std::max(best, value);
      return;
    }
    rec(m + 1, value);
    auto [a, b] = net.matches()[m];
    int used = 0;
    while (feasible_inc(m)) {
      ++load[a];
      ++load[b];
      ++used;
      value += net.rewards()[m];
      rec(m + 1, value);
    }
    load[a] -= used;
    load[b] -= used;
  };
  rec(0, 0.0);
  return best;
}

}  // namespace testutil
