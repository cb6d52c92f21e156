#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dynmatch/errors.hpp"
#include "dynmatch/network.hpp"

namespace dynmatch {

constexpr double kFluidTol = 1e-9;

/// Truncated tree priority generalized to fractional arrivals. Exists for
/// verification of the drift and Lipschitz analysis only; the integer engine
/// is the simulator. Requires the acyclic reduced network rooted at its
/// unique under-demanded node.
struct FluidState {
  long long t = 0;
  std::vector<double> q;   // per type; the root entry never grows
  std::vector<double> A;   // cumulative fractional arrivals
  std::vector<double> D;   // cumulative fractional matches per match index
  std::vector<double> R;   // R_i = q_i(0) + A_i - sum_{j in C(i)} D_{m(j,i)}
  std::vector<double> reflect_max;  // max_s [A_i(s) - sum_{j in C(i)} R_j(s)]+
  double discarded_root = 0.0;
};

inline FluidState make_fluid_state(const MatchingNetwork& net, const RootedTree& tree,
                                   const std::vector<double>& q0 = {}) {
  FluidState s;
  const int n = net.num_types();
  s.q = q0.empty() ? std::vector<double>(n, 0.0) : q0;
  s.A.assign(n, 0.0);
  s.D.assign(net.num_matches(), 0.0);
  s.R = s.q;
  s.reflect_max.assign(n, 0.0);
  (void)tree;
  return s;
}

/// Total over-demanded mass Phi(q) = sum_{i != root} q_i.
inline double fluid_phi(const std::vector<double>& q, const RootedTree& tree) {
  double phi = 0.0;
  for (int i = 0; i < static_cast<int>(q.size()); ++i) {
    if (i != tree.root) phi += q[i];
  }
  return phi;
}

/// One fluid period: every node receives its (fractional) arrivals, then
/// nodes are visited children-before-parent and each matches its new
/// arrivals against the mass still available in its children. Per-child
/// splits drain ascending type indices; aggregate quantities do not depend
/// on that order.
inline void fluid_step(FluidState& s, const std::vector<double>& arrivals,
                       const MatchingNetwork& net, const RootedTree& tree) {
  const int n = net.num_types();
  for (int i = 0; i < n; ++i) {
    if (arrivals[i] < 0.0) {
      throw NegativeArrivalError("negative arrival mass at type " + std::to_string(i));
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (tree.depth[a] != tree.depth[b]) return tree.depth[a] > tree.depth[b];
    return a < b;
  });

  // Children precede parents in `order`, so by the time node i runs, each
  // child's unmatched mass is final and nothing has been taken from it yet.
  std::vector<double> unmatched = arrivals;  // arrivals at i not sent down to C(i)
  std::vector<double> taken_by_parent(n, 0.0);
  for (int i : order) {
    double rem = unmatched[i];
    for (int j : tree.children[i]) {
      if (rem <= 0.0) break;
      double pool = s.q[j] + unmatched[j];
      double take = std::min(pool, rem);
      if (take <= 0.0) continue;
      taken_by_parent[j] = take;
      s.D[net.match_index(i, j)] += take;
      rem -= take;
    }
    unmatched[i] = rem;
  }

  for (int i = 0; i < n; ++i) {
    s.A[i] += arrivals[i];
    s.R[i] += unmatched[i];
    if (i == tree.root) {
      s.discarded_root += unmatched[i];
    } else {
      s.q[i] = s.q[i] + unmatched[i] - taken_by_parent[i];
    }
  }
  s.t += 1;

  for (int i = 0; i < n; ++i) {
    double v = s.A[i];
    for (int j : tree.children[i]) v -= s.R[j];
    if (v > s.reflect_max[i]) s.reflect_max[i] = v;
  }
}

/// Worst absolute deviation of the reflection identity
///   sum_{j in C(i)} q_j(t) = sum_{j in C(i)} R_j(t) - A_i(t)
///                            + max_{s<=t} [A_i(s) - sum_{j in C(i)} R_j(s)]+
/// across all nodes of the current state.
inline double reflection_deviation(const FluidState& s, const RootedTree& tree) {
  double worst = 0.0;
  for (int i = 0; i < static_cast<int>(s.q.size()); ++i) {
    double lhs = 0.0, r_sum = 0.0;
    for (int j : tree.children[i]) {
      lhs += s.q[j];
      r_sum += s.R[j];
    }
    double rhs = r_sum - s.A[i] + std::max(0.0, s.reflect_max[i]);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

/// Matching rates of one fluid period started at state q: the leaf-to-root
/// recursion beta_i = min(lambda_i, sum_{j in C(i)} (lambda_j + q_j - beta_j)),
/// plus the induced aggregates F and Phi.
struct FluidRates {
  std::vector<double> beta;
  double F = 0.0;
  double Phi = 0.0;
};

inline FluidRates beta_rates(const std::vector<double>& q, const MatchingNetwork& net,
                             const RootedTree& tree) {
  const int n = net.num_types();
  FluidRates out;
  out.beta.assign(n, 0.0);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (tree.depth[a] != tree.depth[b]) return tree.depth[a] > tree.depth[b];
    return a < b;
  });
  for (int i : order) {
    if (tree.is_leaf(i)) continue;
    double supply = 0.0;
    for (int j : tree.children[i]) {
      supply += net.lambda()[j] + q[j] - out.beta[j];
    }
    out.beta[i] = std::min(net.lambda()[i], supply);
  }

  out.Phi = fluid_phi(q, tree);
  out.F = out.beta[tree.root];
  for (int i = 0; i < n; ++i) {
    if (i != tree.root) out.F += 2.0 * out.beta[i];
  }
  return out;
}

/// Closed form for beta under small total mass (Phi(q) <= eps):
/// beta_i = sum_{j in C(i)} eps_j - sum_{j in T-(i)} (-1)^{d(i,j)} q_j.
inline std::vector<double> beta_closed_form(const std::vector<double>& q,
                                            const std::vector<double>& eps_i,
                                            const RootedTree& tree) {
  const int n = static_cast<int>(q.size());
  std::vector<double> beta(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double v = 0.0;
    for (int j : tree.children[i]) v += eps_i[j];
    for (int j : tree.subtree[i]) {
      if (j == i) continue;
      int d = tree.depth[j] - tree.depth[i];
      v -= (d % 2 == 0 ? 1.0 : -1.0) * q[j];
    }
    beta[i] = v;
  }
  return beta;
}

struct DriftCheckResult {
  bool pass = true;
  double min_slack = 0.0;  // min over steps of (Phi(t) - eps)+ + tol - Phi(t+1)
  long long violations = 0;
  long long steps = 0;
};

/// Verifies the one-step fluid drift Phi(q(t+1)) <= (Phi(q(t)) - eps)+ under
/// the fluid arrival A(t) = t lambda, starting from q0.
inline DriftCheckResult fluid_drift_check(const MatchingNetwork& net, const RootedTree& tree,
                                          double epsilon, const std::vector<double>& q0,
                                          long long horizon) {
  FluidState s = make_fluid_state(net, tree, q0);
  DriftCheckResult out;
  out.min_slack = 1e300;
  double phi = fluid_phi(s.q, tree);
  for (long long t = 0; t < horizon; ++t) {
    fluid_step(s, net.lambda(), net, tree);
    double next_phi = fluid_phi(s.q, tree);
    double slack = std::max(phi - epsilon, 0.0) + kFluidTol - next_phi;
    out.min_slack = std::min(out.min_slack, slack);
    if (slack < 0.0) {
      out.pass = false;
      ++out.violations;
    }
    phi = next_phi;
    ++out.steps;
  }
  return out;
}

struct LipschitzCheckResult {
  bool pass = true;
  double max_ratio = 0.0;  // max over t of LHS / RHS (0 when RHS is zero)
  double worst_margin = 1e300;  // min of RHS + tol - LHS
};

/// Verifies |sum_A0 q(t) - sum_A0 q'(t)| <= 2 (d_r + 1) sum_i max_{s<=t}
/// |A_i(s) - A'_i(s)| for two cumulative arrival trajectories started from
/// the same q0. Trajectories are indexed 0..horizon with A[0] the initial
/// cumulative mass (normally zero).
inline LipschitzCheckResult lipschitz_check(const MatchingNetwork& net, const RootedTree& tree,
                                            const std::vector<std::vector<double>>& A,
                                            const std::vector<std::vector<double>>& A_prime,
                                            const std::vector<double>& q0, long long horizon) {
  const int n = net.num_types();
  FluidState sa = make_fluid_state(net, tree, q0);
  FluidState sb = make_fluid_state(net, tree, q0);
  std::vector<double> maxdiff(n, 0.0);
  for (int i = 0; i < n; ++i) maxdiff[i] = std::abs(A[0][i] - A_prime[0][i]);

  LipschitzCheckResult out;
  const double factor = 2.0 * (tree.max_depth + 1);
  std::vector<double> da(n), db(n);
  for (long long t = 1; t <= horizon; ++t) {
    for (int i = 0; i < n; ++i) {
      da[i] = A[t][i] - A[t - 1][i];
      db[i] = A_prime[t][i] - A_prime[t - 1][i];
    }
    fluid_step(sa, da, net, tree);
    fluid_step(sb, db, net, tree);
    for (int i = 0; i < n; ++i) {
      maxdiff[i] = std::max(maxdiff[i], std::abs(A[t][i] - A_prime[t][i]));
    }
    double lhs = std::abs(fluid_phi(sa.q, tree) - fluid_phi(sb.q, tree));
    double rhs = factor * std::accumulate(maxdiff.begin(), maxdiff.end(), 0.0);
    out.worst_margin = std::min(out.worst_margin, rhs + kFluidTol - lhs);
    if (lhs > rhs + kFluidTol) out.pass = false;
    if (rhs > 0.0) out.max_ratio = std::max(out.max_ratio, lhs / rhs);
  }
  return out;
}

}  // namespace dynmatch
