#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dynmatch/network.hpp"
#include "dynmatch/simplex.hpp"

namespace dynmatch {

/// Offline benchmark: max r^T y s.t. M y <= counts, y integer >= 0, posed
/// over the full match set (redundant matches included).
struct HindsightSolution {
  double value = 0.0;
  std::vector<long long> y;
};

namespace detail {

constexpr double kIntegralityTol = 1e-7;

struct BnbNode {
  std::vector<long long> lb;
  std::vector<long long> ub;  // -1 encodes +infinity
};

inline bool integer_feasible(const MatchingNetwork& net, const std::vector<long long>& y,
                             const std::vector<long long>& counts) {
  std::vector<long long> load(net.num_types(), 0);
  for (int m = 0; m < net.num_matches(); ++m) {
    if (y[m] < 0) return false;
    auto [a, b] = net.matches()[m];
    load[a] += y[m];
    load[b] += y[m];
  }
  for (int i = 0; i < net.num_types(); ++i) {
    if (load[i] > counts[i]) return false;
  }
  return true;
}

inline double reward_of(const MatchingNetwork& net, const std::vector<long long>& y) {
  double v = 0.0;
  for (int m = 0; m < net.num_matches(); ++m) v += net.rewards()[m] * y[m];
  return v;
}

}  // namespace detail

/// Exact integer optimum. The LP relaxation is solved first; its vertex is
/// integral on bipartite graphs (b-matching integrality), which covers most
/// instances directly. Otherwise a depth-first branch-and-bound on the most
/// fractional variable finishes the job; rounded candidates are re-verified
/// against the constraints in integer arithmetic.
inline HindsightSolution hindsight_optimal(const MatchingNetwork& net,
                                           const std::vector<long long>& counts) {
  const int k = net.num_matches();
  const int n = net.num_types();

  HindsightSolution best;
  best.y.assign(k, 0);
  best.value = 0.0;  // y = 0 is always feasible

  std::vector<detail::BnbNode> stack;
  stack.push_back({std::vector<long long>(k, 0), std::vector<long long>(k, -1)});

  while (!stack.empty()) {
    detail::BnbNode node = std::move(stack.back());
    stack.pop_back();

    // Shift by the lower bounds: y = lb + y', rhs = counts - M lb.
    std::vector<double> rhs(n);
    bool infeasible = false;
    {
      std::vector<long long> used(n, 0);
      for (int m = 0; m < k; ++m) {
        auto [a, b] = net.matches()[m];
        used[a] += node.lb[m];
        used[b] += node.lb[m];
      }
      for (int i = 0; i < n; ++i) {
        if (used[i] > counts[i]) {
          infeasible = true;
          break;
        }
        rhs[i] = static_cast<double>(counts[i] - used[i]);
      }
    }
    if (infeasible) continue;

    // Upper-bound rows y'_m <= ub_m - lb_m for the finite bounds.
    std::vector<std::vector<double>> A(n, std::vector<double>(k, 0.0));
    for (int m = 0; m < k; ++m) {
      auto [a, b] = net.matches()[m];
      A[a][m] = 1.0;
      A[b][m] = 1.0;
    }
    std::vector<double> b = rhs;
    bool bound_conflict = false;
    for (int m = 0; m < k; ++m) {
      if (node.ub[m] < 0) continue;
      long long cap = node.ub[m] - node.lb[m];
      if (cap < 0) {
        bound_conflict = true;
        break;
      }
      std::vector<double> row(k, 0.0);
      row[m] = 1.0;
      A.push_back(std::move(row));
      b.push_back(static_cast<double>(cap));
    }
    if (bound_conflict) continue;

    lp::Result lpres = lp::solve(A, b, net.rewards());
    double offset = 0.0;
    for (int m = 0; m < k; ++m) offset += net.rewards()[m] * node.lb[m];
    double bound = lpres.objective + offset;
    if (bound <= best.value + 1e-9) continue;

    // Most fractional variable: largest distance to the nearest integer,
    // ties to the smallest index.
    int frac_var = -1;
    double frac_dist = detail::kIntegralityTol;
    for (int m = 0; m < k; ++m) {
      double f = std::abs(lpres.x[m] - std::round(lpres.x[m]));
      if (f > frac_dist + 1e-15) {
        frac_dist = f;
        frac_var = m;
      }
    }

    if (frac_var < 0) {
      std::vector<long long> y(k);
      for (int m = 0; m < k; ++m) {
        y[m] = node.lb[m] + static_cast<long long>(std::llround(lpres.x[m]));
      }
      if (detail::integer_feasible(net, y, counts)) {
        double v = detail::reward_of(net, y);
        if (v > best.value) {
          best.value = v;
          best.y = std::move(y);
        }
      }
      continue;
    }

    // Floor of the LP vertex is integer feasible; use it to warm the incumbent.
    {
      std::vector<long long> y(k);
      for (int m = 0; m < k; ++m) {
        y[m] = node.lb[m] + static_cast<long long>(std::floor(lpres.x[m] + 1e-12));
      }
      if (detail::integer_feasible(net, y, counts)) {
        double v = detail::reward_of(net, y);
        if (v > best.value) {
          best.value = v;
          best.y = std::move(y);
        }
      }
    }

    long long split = node.lb[frac_var] + static_cast<long long>(std::floor(lpres.x[frac_var]));
    detail::BnbNode down = node, up = node;
    down.ub[frac_var] = split;
    up.lb[frac_var] = split + 1;
    stack.push_back(std::move(down));
    stack.push_back(std::move(up));  // explore the round-up branch first
  }
  return best;
}

/// Hindsight optima at each checkpoint given the cumulative arrival counts
/// there; monotone non-decreasing in t since the feasible set only grows.
inline std::vector<double> hindsight_curve(
    const MatchingNetwork& net, const std::vector<std::vector<long long>>& counts_at) {
  std::vector<double> out;
  out.reserve(counts_at.size());
  for (const auto& counts : counts_at) {
    out.push_back(hindsight_optimal(net, counts).value);
  }
  return out;
}

}  // namespace dynmatch
