#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dynmatch/analytics.hpp"
#include "dynmatch/builtins.hpp"
#include "dynmatch/engine.hpp"
#include "dynmatch/fluid.hpp"
#include "dynmatch/network.hpp"
#include "dynmatch/planner.hpp"
#include "dynmatch/policies.hpp"

namespace dynmatch::verify {

/// One verification outcome. `worst` is the binding margin of the checked
/// inequality (negative means violation) unless stated otherwise.
struct CheckResult {
  std::string name;
  bool pass = true;
  double worst = 0.0;
  std::string detail;
};

/// Quadratic-Lyapunov drift of probabilistic matching: at every sampled
/// reachable state, E[dL] <= -(2 eps / n) |Q|_1 + 1 with L = sum_{A0} Q_i^2.
inline CheckResult pm_drift_check(const MatchingNetwork& net, const SppSolution& spp,
                                  std::shared_ptr<const BasisResolver> resolver,
                                  int n_states, long long max_prefix, std::uint64_t seed) {
  PmPolicy pm(net, spp, resolver);
  auto states = sample_reachable_states(net, pm, n_states, max_prefix, seed);

  auto L = [&](const std::vector<long long>& Q) {
    double v = 0.0;
    for (int i : spp.over_demanded) v += static_cast<double>(Q[i]) * Q[i];
    return v;
  };
  const int n = net.num_types();
  CheckResult out;
  out.name = "pm_quadratic_drift";
  out.worst = 1e300;
  for (const auto& Q : states) {
    double drift = exact_drift(net, pm, Q, L);
    long long q1 = 0;
    for (auto q : Q) q1 += q;
    double bound = -2.0 * spp.epsilon / n * static_cast<double>(q1) + 1.0;
    double margin = bound + 1e-9 - drift;
    out.worst = std::min(out.worst, margin);
    if (margin < 0.0) out.pass = false;
  }
  std::ostringstream d;
  d << n_states << " reachable states, eps = " << spp.epsilon;
  out.detail = d.str();
  return out;
}

/// Generalized quadratic drift of tree priority:
/// E[dL] <= -(eps / 2^{d_r - 1}) |Q|_1 + n (1 + 1/eps)^{floor((d_r-1)/2)}.
inline CheckResult tp_drift_check(const MatchingNetwork& net, const SppSolution& spp,
                                  const RootedTree& tree, int n_states,
                                  long long max_prefix, std::uint64_t seed) {
  TpPolicy tp(net, spp, tree);
  auto states = sample_reachable_states(net, tp, n_states, max_prefix, seed);
  TpLyapunov ly = tp_alpha(net, spp, tree);
  auto L = [&](const std::vector<long long>& Q) { return ly.value(Q); };

  const int n = net.num_types();
  const double eps = spp.epsilon;
  const double negative_rate = eps / std::pow(2.0, tree.max_depth - 1);
  const double additive =
      n * std::pow(1.0 + 1.0 / eps, std::floor((tree.max_depth - 1) / 2.0));

  CheckResult out;
  out.name = "tp_generalized_drift";
  out.worst = 1e300;
  for (const auto& Q : states) {
    double drift = exact_drift(net, tp, Q, L);
    long long q1 = 0;
    for (auto q : Q) q1 += q;
    double bound = -negative_rate * static_cast<double>(q1) + additive;
    double margin = bound + 1e-9 - drift;
    out.worst = std::min(out.worst, margin);
    if (margin < 0.0) out.pass = false;
  }
  std::ostringstream d;
  d << n_states << " reachable states, additive term " << additive;
  out.detail = d.str();
  return out;
}

/// Coefficient sanity for the tree-priority Lyapunov function:
/// alpha_i = 1 on the root's children and alpha_i <= (1 + 1/eps)^{...} always.
inline CheckResult tp_alpha_bound_check(const MatchingNetwork& net, const SppSolution& spp,
                                        const RootedTree& tree) {
  TpLyapunov ly = tp_alpha(net, spp, tree);
  CheckResult out;
  out.name = "tp_alpha_bounds";
  out.worst = 1e300;
  for (int i = 0; i < net.num_types(); ++i) {
    if (i == tree.root) continue;
    double cap = std::pow(1.0 + 1.0 / spp.epsilon,
                          std::floor((tree.distance(tree.root, i) - 1) / 2.0));
    double margin = cap - ly.alpha[i];
    out.worst = std::min(out.worst, margin);
    if (ly.alpha[i] > cap + 1e-9) out.pass = false;
    if (tree.parent[i] == tree.root || i == tree.root) {
      if (std::abs(ly.alpha[i] - 1.0) > 1e-12) out.pass = false;
    }
  }
  return out;
}

/// |f_i(Q(t+1)) - f_i(Q(t))| <= 1 along tree-priority trajectories.
inline CheckResult f_step_bound_check(const MatchingNetwork& net, const SppSolution& spp,
                                      const RootedTree& tree, long long horizon,
                                      std::uint64_t seed) {
  TpPolicy tp(net, spp, tree);
  ArrivalStream stream(net.lambda(), seed, 0);
  std::mt19937_64 rng = make_rng(seed, 1);
  CheckResult out;
  out.name = "tp_f_step_bound";
  out.worst = 1e300;

  std::vector<double> prev(net.num_types(), 0.0);
  SimState s = make_state(net);
  for (long long t = 1; t <= horizon; ++t) {
    int arrival = stream.next();
    PolicyDecision d = tp.decide(s.Q, arrival, rng);
    apply_step(s, net, arrival, d);
    for (int i = 0; i < net.num_types(); ++i) {
      if (i == tree.root) continue;
      double fi = f_alternating(tree, i, s.Q);
      double margin = 1.0 - std::abs(fi - prev[i]);
      out.worst = std::min(out.worst, margin);
      if (margin < -1e-12) out.pass = false;
      prev[i] = fi;
    }
  }
  return out;
}

/// Fluid drift on the instance: 100 random starts (by default) from scaled
/// random states, each run to depletion plus a margin.
inline CheckResult fluid_drift_instance_check(const MatchingNetwork& net,
                                              const SppSolution& spp, const RootedTree& tree,
                                              int starts, std::uint64_t seed) {
  CheckResult out;
  out.name = "fluid_drift";
  out.worst = 1e300;
  std::mt19937_64 rng = make_rng(seed, 2);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int s = 0; s < starts; ++s) {
    std::vector<double> q0(net.num_types(), 0.0);
    double phi = 0.0;
    for (int i = 0; i < net.num_types(); ++i) {
      if (i == tree.root) continue;
      q0[i] = unif(rng);
      phi += q0[i];
    }
    long long horizon = static_cast<long long>(phi / spp.epsilon) + 50;
    auto res = fluid_drift_check(net, tree, spp.epsilon, q0, horizon);
    out.worst = std::min(out.worst, res.min_slack);
    if (!res.pass) out.pass = false;
  }
  return out;
}

/// Lipschitz continuity of fluid TTP: sampled arrival trajectories against
/// the fluid one, `pairs` independent draws of horizon T.
inline CheckResult lipschitz_instance_check(const MatchingNetwork& net, const RootedTree& tree,
                                            int pairs, long long horizon,
                                            std::uint64_t seed) {
  CheckResult out;
  out.name = "ttp_lipschitz";
  out.worst = 0.0;  // max ratio attained; must stay <= 1
  const int n = net.num_types();
  for (int p = 0; p < pairs; ++p) {
    std::vector<std::vector<double>> A(horizon + 1, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> B(horizon + 1, std::vector<double>(n, 0.0));
    ArrivalStream stream(net.lambda(), seed, static_cast<std::uint64_t>(p));
    for (long long t = 1; t <= horizon; ++t) {
      A[t] = A[t - 1];
      A[t][stream.next()] += 1.0;
      for (int i = 0; i < n; ++i) B[t][i] = B[t - 1][i] + net.lambda()[i];
    }
    auto res = lipschitz_check(net, tree, A, B, std::vector<double>(n, 0.0), horizon);
    out.worst = std::max(out.worst, res.max_ratio);
    if (!res.pass) out.pass = false;
  }
  std::ostringstream d;
  d << pairs << " sampled-vs-fluid pairs, T = " << horizon << ", max LHS/RHS ratio "
    << out.worst;
  out.detail = d.str();
  return out;
}

/// Truncation monotonicity for single-parity truncation sets,
/// pointwise over a shared-stream run.
inline CheckResult truncation_monotonicity_check(const MatchingNetwork& net,
                                                 const SppSolution& spp,
                                                 const RootedTree& tree, long long horizon,
                                                 std::uint64_t seed) {
  TpPolicy tp(net, spp, tree);
  const int n = net.num_types();
  std::vector<int> even_nodes, odd_nodes;
  for (int i = 0; i < n; ++i) {
    (tree.depth[i] % 2 == 0 ? even_nodes : odd_nodes).push_back(i);
  }

  CheckResult out;
  out.name = "truncation_monotone";
  long long violations = 0;
  for (const auto& set : {even_nodes, odd_nodes}) {
    if (set.empty()) continue;
    bool even_set = tree.depth[set[0]] % 2 == 0;
    std::vector<bool> truncated(n, false);
    for (int i : set) truncated[i] = true;
    ArrivalStream stream(net.lambda(), seed, 3);
    std::mt19937_64 rng = make_rng(seed, 4);
    coupled_truncated_steps(net, tp, truncated, horizon, stream, rng,
                            [&](long long, const std::vector<long long>& Q,
                                const std::vector<long long>& Qp) {
                              for (int i = 0; i < n; ++i) {
                                bool odd_depth = tree.depth[i] % 2 == 1;
                                bool grows = odd_depth == even_set;
                                if (grows && Q[i] > Qp[i]) ++violations;
                                if (!grows && Q[i] < Qp[i]) ++violations;
                              }
                            });
  }
  out.pass = violations == 0;
  out.worst = static_cast<double>(violations);
  out.detail = "pointwise queue comparisons under even/odd-depth truncation";
  return out;
}

/// Alternating inequalities of the path warm-up coupling: for every i, the
/// suffix-truncated system S_i brackets the original queue lengths with
/// parity-alternating inequalities below level i. Requires a path instance
/// rooted at its last node.
inline CheckResult warmup_coupling_check(const MatchingNetwork& net, const SppSolution& spp,
                                         const RootedTree& tree, long long horizon,
                                         std::uint64_t seed) {
  const int n = net.num_types();
  CheckResult out;
  out.name = "warmup_suffix_coupling";
  for (int i = 0; i + 1 < n; ++i) {
    if (net.match_index(i, i + 1) < 0) {
      out.pass = false;
      out.detail = "instance is not a path; S_i systems undefined";
      return out;
    }
  }
  if (tree.root != n - 1) {
    out.pass = false;
    out.detail = "path must be rooted at its last node";
    return out;
  }

  TpPolicy tp(net, spp, tree);
  long long violations = 0;
  for (int i = 1; i < n; ++i) {  // 1-based level i; truncate types i+1..n
    std::vector<bool> truncated(n, false);
    for (int j = i; j < n; ++j) truncated[j] = true;  // 0-based j >= i
    ArrivalStream stream(net.lambda(), seed, static_cast<std::uint64_t>(10 + i));
    std::mt19937_64 rng = make_rng(seed, static_cast<std::uint64_t>(20 + i));
    coupled_truncated_steps(
        net, tp, truncated, horizon, stream, rng,
        [&](long long, const std::vector<long long>& Q, const std::vector<long long>& Qbar) {
          if (i % 2 == 1) {  // odd level: Qbar_even <= Q_even, Qbar_odd >= Q_odd
            for (int j = 2; j <= i - 1; j += 2) {
              if (Qbar[j - 1] > Q[j - 1]) ++violations;
            }
            for (int j = 1; j <= i; j += 2) {
              if (Qbar[j - 1] < Q[j - 1]) ++violations;
            }
          } else {  // even level: Qbar_even >= Q_even, Qbar_odd <= Q_odd
            for (int j = 2; j <= i; j += 2) {
              if (Qbar[j - 1] < Q[j - 1]) ++violations;
            }
            for (int j = 1; j <= i + 1 && j <= n; j += 2) {
              if (Qbar[j - 1] > Q[j - 1]) ++violations;
            }
          }
        });
  }
  out.pass = violations == 0;
  out.worst = static_cast<double>(violations);
  out.detail = "S_i suffix systems, alternating inequalities below level i";
  return out;
}

/// One-step l1 non-expansion over random valid state pairs for the
/// deterministic consistent policies.
inline CheckResult consistency_check(const MatchingNetwork& net, const SppSolution& spp,
                                     const RootedTree* tree, int pairs, long long max_prefix,
                                     std::uint64_t seed) {
  std::vector<std::unique_ptr<Policy>> policies;
  if (tree != nullptr) {
    policies.push_back(std::make_unique<TpPolicy>(net, spp, *tree));
    policies.push_back(std::make_unique<TtpPolicy>(net, spp, *tree));
  }
  policies.push_back(std::make_unique<LqPolicy>(net, spp));

  CheckResult out;
  out.name = "one_step_consistency";
  long long violations = 0;
  for (std::size_t pi = 0; pi < policies.size(); ++pi) {
    auto& pol = policies[pi];
    auto states = sample_reachable_states(net, *pol, 2 * pairs, max_prefix,
                                          seed + 31 * (pi + 1));
    for (int p = 0; p < pairs; ++p) {
      const auto& qa = states[2 * p];
      const auto& qb = states[2 * p + 1];
      long long base = l1_distance(qa, qb);
      for (int arrival = 0; arrival < net.num_types(); ++arrival) {
        auto [a, b] = coupled_pair_run(net, *pol, qa, qb, arrival);
        if (l1_distance(a.Q, b.Q) > base) ++violations;
      }
    }
  }
  out.pass = violations == 0;
  out.worst = static_cast<double>(violations);
  std::ostringstream d;
  d << pairs << " valid pairs x all arrival types x " << policies.size() << " policies";
  out.detail = d.str();
  return out;
}

/// The non-consistent fixture: |Q(4) - Q'(4)|_1 = 3 from |Q(0) - Q'(0)|_1 = 1
/// under arrivals (3,5,4,6), exactly.
inline CheckResult adversarial_fixture_check(const MatchingNetwork& net) {
  CheckResult out;
  out.name = "adversarial_fixture";
  AdversarialPolicy pol(net);
  SimState a = make_state(net);
  std::vector<long long> e1(net.num_types(), 0);
  e1[0] = 1;
  SimState b = make_state(net, e1);
  std::mt19937_64 rng = make_rng(0, 0);
  for (int arrival : {2, 4, 3, 5}) {
    apply_step(a, net, arrival, pol.decide(a.Q, arrival, rng));
    apply_step(b, net, arrival, pol.decide(b.Q, arrival, rng));
  }
  long long dist = l1_distance(a.Q, b.Q);
  out.worst = static_cast<double>(dist);
  out.pass = dist == 3;
  out.detail = "expected l1 distance exactly 3 after four arrivals";
  return out;
}

/// Adjacent-exclusivity along trajectories of the always-matching policies.
inline CheckResult greedy_exclusivity_check(const MatchingNetwork& net, const SppSolution& spp,
                                            std::shared_ptr<const BasisResolver> resolver,
                                            const RootedTree* tree, long long horizon,
                                            std::uint64_t seed) {
  std::vector<std::unique_ptr<Policy>> policies;
  policies.push_back(std::make_unique<PmPolicy>(net, spp, resolver));
  if (tree != nullptr) policies.push_back(std::make_unique<TpPolicy>(net, spp, *tree));
  policies.push_back(std::make_unique<LqPolicy>(net, spp));

  CheckResult out;
  out.name = "greedy_exclusivity";
  long long violations = 0;
  for (auto& pol : policies) {
    ArrivalStream stream(net.lambda(), seed, 5);
    std::mt19937_64 rng = make_rng(seed, 6);
    run_steps(net, *pol, stream, horizon, rng,
              [&](const SimState& s, int, const PolicyDecision&) {
                for (auto [i, j] : net.matches()) {
                  if (s.Q[i] > 0 && s.Q[j] > 0) ++violations;
                }
              });
  }
  out.pass = violations == 0;
  out.worst = static_cast<double>(violations);
  std::ostringstream d;
  d << policies.size() << " policies, " << horizon << " steps each";
  out.detail = d.str();
  return out;
}

/// E[Z(T)] <= 2 sqrt(n) + 3 s.e. for the categorical arrival process.
inline CheckResult concentration_bound_check(const std::vector<double>& lambda,
                                             long long horizon, long long replications,
                                             std::uint64_t seed) {
  auto res = concentration_check(lambda, horizon, replications, seed);
  CheckResult out;
  out.name = "arrival_concentration";
  out.pass = res.pass;
  out.worst = res.bound + 3.0 * res.std_error - res.mean;
  std::ostringstream d;
  d << "mean Z = " << res.mean << ", bound 2 sqrt(n) = " << res.bound << ", s.e. "
    << res.std_error;
  out.detail = d.str();
  return out;
}

/// Runs every check that applies to the instance class.
inline std::vector<CheckResult> run_suite(const MatchingNetwork& net, const SppSolution& spp,
                                          std::uint64_t seed) {
  std::vector<CheckResult> results;
  auto resolver = std::make_shared<BasisResolver>(net, spp);

  bool tree_like = spp.has_epsilon_i;
  RootedTree tree;
  if (tree_like) tree = reduced_tree(net, spp);
  const RootedTree* tree_ptr = tree_like ? &tree : nullptr;

  results.push_back(pm_drift_check(net, spp, resolver, 1000, 400, seed));
  if (tree_like) {
    results.push_back(tp_drift_check(net, spp, tree, 1000, 400, seed + 1));
    results.push_back(tp_alpha_bound_check(net, spp, tree));
    results.push_back(f_step_bound_check(net, spp, tree, 10000, seed + 2));
    results.push_back(fluid_drift_instance_check(net, spp, tree, 100, seed + 3));
    results.push_back(lipschitz_instance_check(net, tree, 50, 10000, seed + 4));
    results.push_back(truncation_monotonicity_check(net, spp, tree, 10000, seed + 5));
    if (tree.root == net.num_types() - 1 &&
        net.match_index(0, 1) >= 0) {  // path instances rooted at the top
      bool is_path = true;
      for (int i = 0; i + 1 < net.num_types(); ++i) {
        if (net.match_index(i, i + 1) < 0) is_path = false;
      }
      if (is_path && net.num_matches() == net.num_types() - 1) {
        results.push_back(warmup_coupling_check(net, spp, tree, 10000, seed + 6));
      }
    }
  }
  results.push_back(consistency_check(net, spp, tree_ptr, 2500, 250, seed + 7));
  if (tree_like && net.num_types() >= 6) {
    bool is_path = true;
    for (int i = 0; i + 1 < net.num_types(); ++i) {
      if (net.match_index(i, i + 1) < 0) is_path = false;
    }
    if (is_path && net.num_matches() == net.num_types() - 1) {
      results.push_back(adversarial_fixture_check(net));
    }
  }
  results.push_back(greedy_exclusivity_check(net, spp, resolver, tree_ptr, 100000, seed + 8));
  results.push_back(concentration_bound_check(net.lambda(), 10000, 1000, seed + 9));
  return results;
}

}  // namespace dynmatch::verify
