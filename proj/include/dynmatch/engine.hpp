#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dynmatch/errors.hpp"
#include "dynmatch/network.hpp"
#include "dynmatch/policies.hpp"
#include "dynmatch/rng.hpp"

namespace dynmatch {

/// Discrete-time system state: Q(t) = Q(0) + A(t) - M D(t) - discards(t).
/// The explicit discard ledger keeps the identity exact under truncation.
struct SimState {
  long long t = 0;
  std::vector<long long> Q0;         // initial queues (all-zero by default)
  std::vector<long long> Q;          // per type
  std::vector<long long> A;          // cumulative arrivals per type
  std::vector<long long> D;          // cumulative matches per match index
  std::vector<long long> discarded;  // per type (truncated queues only)
  double reward = 0.0;
};

inline SimState make_state(const MatchingNetwork& net,
                           const std::vector<long long>& initial_Q = {}) {
  SimState s;
  const int n = net.num_types();
  s.Q0 = initial_Q.empty() ? std::vector<long long>(n, 0) : initial_Q;
  s.Q = s.Q0;
  s.A.assign(n, 0);
  s.D.assign(net.num_matches(), 0);
  s.discarded.assign(n, 0);
  return s;
}

inline bool check_conservation(const SimState& s, const MatchingNetwork& net) {
  const int n = net.num_types();
  std::vector<long long> matched(n, 0);
  for (int m = 0; m < net.num_matches(); ++m) {
    auto [a, b] = net.matches()[m];
    matched[a] += s.D[m];
    matched[b] += s.D[m];
  }
  for (int i = 0; i < n; ++i) {
    if (s.Q[i] != s.Q0[i] + s.A[i] - matched[i] - s.discarded[i]) return false;
    if (s.Q[i] < 0) return false;
  }
  return true;
}

/// Applies one period: the arrival joins, then the decision is executed.
/// At most one match is performed and it involves the arriving agent.
inline void apply_step(SimState& s, const MatchingNetwork& net, int arrival,
                       const PolicyDecision& d) {
  s.t += 1;
  s.A[arrival] += 1;
  switch (d.kind) {
    case ActionKind::Match: {
      int m = d.match >= 0 ? d.match : net.match_index(arrival, d.partner);
      if (m < 0 || d.partner == arrival) {
        throw IllegalDecisionError("match with non-adjacent partner " +
                                   std::to_string(d.partner));
      }
      if (s.Q[d.partner] <= 0) {
        throw IllegalDecisionError("match with empty queue " + std::to_string(d.partner));
      }
      s.Q[d.partner] -= 1;
      s.D[m] += 1;
      s.reward += net.rewards()[m];
      break;
    }
    case ActionKind::Enqueue:
      s.Q[arrival] += 1;
      break;
    case ActionKind::Discard:
      s.discarded[arrival] += 1;
      break;
  }
}

inline SimState step(const SimState& s, const MatchingNetwork& net, int arrival,
                     const PolicyDecision& d) {
  SimState next = s;
  apply_step(next, net, arrival, d);
  return next;
}

/// Alias-table categorical sampler over lambda; each draw consumes exactly
/// one 64-bit generator output, which keeps coupled systems aligned.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& lambda) {
    const int n = static_cast<int>(lambda.size());
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    for (int i = 0; i < n; ++i) scaled[i] = lambda[i] * n;
    std::vector<int> small, large;
    for (int i = n - 1; i >= 0; --i) {
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      int s = small.back();
      small.pop_back();
      int l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (int i : small) prob_[i] = 1.0;
    for (int i : large) prob_[i] = 1.0;
  }

  int sample(std::uint64_t u) const {
    const int n = static_cast<int>(prob_.size());
    double pos = to_unit_interval(u) * n;
    int k = std::min(static_cast<int>(pos), n - 1);
    return (pos - k) < prob_[k] ? k : alias_[k];
  }

 private:
  std::vector<double> prob_;
  std::vector<int> alias_;
};

/// Seeded per-replication arrival stream: identical (seed, replication)
/// reproduce the identical type sequence bit-exactly.
class ArrivalStream {
 public:
  ArrivalStream(const std::vector<double>& lambda, std::uint64_t seed,
                std::uint64_t replication)
      : table_(lambda), rng_(make_rng(seed, replication)) {}

  int next() { return table_.sample(rng_()); }

 private:
  AliasTable table_;
  std::mt19937_64 rng_;
};

inline std::vector<long long> geometric_checkpoints(long long T) {
  std::vector<long long> cps;
  for (long long t = 1; t < T; t *= 2) cps.push_back(t);
  if (T >= 1) cps.push_back(T);
  return cps;
}

struct RunConfig {
  long long horizon = 0;
  std::vector<long long> checkpoints;  // ascending; empty selects the geometric grid
  std::vector<long long> initial_Q;    // empty means all-zero
  std::vector<bool> extra_truncated;   // additional always-discard queues (coupling runs)
};

struct Snapshot {
  long long t = 0;
  std::vector<long long> Q, A, D, discarded;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
};

namespace detail {

inline Snapshot snapshot_of(const SimState& s) {
  return Snapshot{s.t, s.Q, s.A, s.D, s.discarded, s.reward};
}

inline PolicyDecision decide_with_truncation(Policy& policy, const SimState& s, int arrival,
                                             const std::vector<bool>& extra_truncated,
                                             std::mt19937_64& rng) {
  PolicyDecision d = policy.decide(s.Q, arrival, rng);
  if (d.kind == ActionKind::Enqueue && !extra_truncated.empty() && extra_truncated[arrival]) {
    d.kind = ActionKind::Discard;
  }
  return d;
}

}  // namespace detail

/// Runs one trajectory, taking snapshots at t = 0 and every requested
/// checkpoint. Deterministic given (policy, stream, rng) configuration.
inline Trajectory run(const MatchingNetwork& net, Policy& policy, ArrivalStream& stream,
                      const RunConfig& cfg, std::mt19937_64& policy_rng) {
  SimState s = make_state(net, cfg.initial_Q);
  std::vector<long long> cps =
      cfg.checkpoints.empty() ? geometric_checkpoints(cfg.horizon) : cfg.checkpoints;

  Trajectory out;
  out.snapshots.push_back(detail::snapshot_of(s));
  std::size_t next_cp = 0;
  while (next_cp < cps.size() && cps[next_cp] == 0) ++next_cp;

  for (long long t = 1; t <= cfg.horizon; ++t) {
    int arrival = stream.next();
    PolicyDecision d =
        detail::decide_with_truncation(policy, s, arrival, cfg.extra_truncated, policy_rng);
    apply_step(s, net, arrival, d);
    if (next_cp < cps.size() && cps[next_cp] == t) {
      out.snapshots.push_back(detail::snapshot_of(s));
      ++next_cp;
    }
  }
  return out;
}

/// Step-level driver for property checks; visit(state, arrival, decision) is
/// called after each applied step.
template <typename Visitor>
void run_steps(const MatchingNetwork& net, Policy& policy, ArrivalStream& stream,
               long long horizon, std::mt19937_64& policy_rng, Visitor&& visit,
               const std::vector<long long>& initial_Q = {}) {
  SimState s = make_state(net, initial_Q);
  for (long long t = 1; t <= horizon; ++t) {
    int arrival = stream.next();
    PolicyDecision d = policy.decide(s.Q, arrival, policy_rng);
    apply_step(s, net, arrival, d);
    visit(s, arrival, d);
  }
}

/// Common-random-numbers helper: runs a policy over a pre-drawn arrival
/// sequence and reports (reward, queue state) at each checkpoint.
struct CheckpointStat {
  long long t = 0;
  double reward = 0.0;
  std::vector<long long> Q;
};

inline std::vector<CheckpointStat> run_on_arrivals(const MatchingNetwork& net, Policy& policy,
                                                   const std::vector<int>& arrivals,
                                                   const std::vector<long long>& checkpoints,
                                                   std::mt19937_64& policy_rng) {
  SimState s = make_state(net);
  std::vector<CheckpointStat> out;
  std::size_t next_cp = 0;
  while (next_cp < checkpoints.size() && checkpoints[next_cp] == 0) {
    out.push_back({0, 0.0, s.Q});
    ++next_cp;
  }
  for (long long t = 1; t <= static_cast<long long>(arrivals.size()); ++t) {
    int arrival = arrivals[t - 1];
    PolicyDecision d = policy.decide(s.Q, arrival, policy_rng);
    apply_step(s, net, arrival, d);
    if (next_cp < checkpoints.size() && checkpoints[next_cp] == t) {
      out.push_back({t, s.reward, s.Q});
      ++next_cp;
    }
  }
  return out;
}

/// Drives the original and a truncated copy of the system on one shared
/// arrival stream; visit(t, Q_original, Q_truncated) runs after every step.
template <typename Visitor>
void coupled_truncated_steps(const MatchingNetwork& net, Policy& policy,
                             const std::vector<bool>& truncated, long long horizon,
                             ArrivalStream& stream, std::mt19937_64& policy_rng,
                             Visitor&& visit) {
  SimState orig = make_state(net);
  SimState trunc = make_state(net);
  std::unique_ptr<Policy> policy_trunc = policy.clone();
  for (long long t = 1; t <= horizon; ++t) {
    int arrival = stream.next();
    PolicyDecision d_orig = policy.decide(orig.Q, arrival, policy_rng);
    apply_step(orig, net, arrival, d_orig);
    PolicyDecision d_trunc =
        detail::decide_with_truncation(*policy_trunc, trunc, arrival, truncated, policy_rng);
    apply_step(trunc, net, arrival, d_trunc);
    visit(t, orig.Q, trunc.Q);
  }
}

/// Paired run for the truncation-monotonicity checks. The truncation set
/// must sit on one depth parity of the rooted tree; mixing parities voids
/// the monotone coupling and is rejected. Intended for the deterministic
/// static-priority policies: both systems consume one shared arrival
/// stream, which is the entire coupling.
inline std::pair<Trajectory, Trajectory> coupled_truncated_run(
    const MatchingNetwork& net, Policy& policy, const RootedTree& tree,
    const std::vector<int>& truncate_set, long long horizon,
    const std::vector<double>& lambda, std::uint64_t seed, std::uint64_t replication) {
  bool any_even = false, any_odd = false;
  for (int i : truncate_set) {
    (tree.depth[i] % 2 == 0 ? any_even : any_odd) = true;
  }
  if (any_even && any_odd) {
    throw MixedParityTruncationError(
        "truncation set mixes even- and odd-depth nodes of the rooted tree");
  }
  std::vector<bool> truncated(net.num_types(), false);
  for (int i : truncate_set) truncated[i] = true;

  std::vector<long long> cps = geometric_checkpoints(horizon);
  Trajectory a, b;
  SimState orig = make_state(net);
  SimState trunc = make_state(net);
  a.snapshots.push_back(detail::snapshot_of(orig));
  b.snapshots.push_back(detail::snapshot_of(trunc));
  ArrivalStream stream(lambda, seed, replication);
  std::mt19937_64 rng = make_rng(seed, replication + 0x10000);
  std::unique_ptr<Policy> policy_trunc = policy.clone();
  std::size_t next_cp = 0;
  for (long long t = 1; t <= horizon; ++t) {
    int arrival = stream.next();
    PolicyDecision d_orig = policy.decide(orig.Q, arrival, rng);
    apply_step(orig, net, arrival, d_orig);
    PolicyDecision d_trunc =
        detail::decide_with_truncation(*policy_trunc, trunc, arrival, truncated, rng);
    apply_step(trunc, net, arrival, d_trunc);
    if (next_cp < cps.size() && cps[next_cp] == t) {
      a.snapshots.push_back(detail::snapshot_of(orig));
      b.snapshots.push_back(detail::snapshot_of(trunc));
      ++next_cp;
    }
  }
  return {std::move(a), std::move(b)};
}

/// One-arrival coupling: both systems receive the same arrival. For the
/// deterministic policies this returns the deterministic successor pair.
inline std::pair<SimState, SimState> coupled_pair_run(const MatchingNetwork& net,
                                                      Policy& policy,
                                                      const std::vector<long long>& Q0,
                                                      const std::vector<long long>& Q0_prime,
                                                      int arrival) {
  SimState a = make_state(net, Q0);
  SimState b = make_state(net, Q0_prime);
  std::mt19937_64 rng = make_rng(0, 0);  // unused by deterministic policies
  PolicyDecision da = policy.decide(a.Q, arrival, rng);
  apply_step(a, net, arrival, da);
  PolicyDecision db = policy.decide(b.Q, arrival, rng);
  apply_step(b, net, arrival, db);
  return {std::move(a), std::move(b)};
}

inline long long l1_distance(const std::vector<long long>& a, const std::vector<long long>& b) {
  long long d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::llabs(a[i] - b[i]);
  return d;
}

// Trajectory CSV schema: replication,t,type_or_match,kind,value with kind in
// {queue, arrivals, matches, discards, reward}; reward rows use
// type_or_match = -1. Values are printed with 9 significant digits.
inline void write_trajectory_csv(std::ostream& out, long long replication,
                                 const Trajectory& traj, bool header = true) {
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  if (header) out << "replication,t,type_or_match,kind,value\n";
  for (const auto& s : traj.snapshots) {
    for (std::size_t i = 0; i < s.Q.size(); ++i) {
      out << replication << ',' << s.t << ',' << i << ",queue," << s.Q[i] << '\n';
      out << replication << ',' << s.t << ',' << i << ",arrivals," << s.A[i] << '\n';
      out << replication << ',' << s.t << ',' << i << ",discards," << s.discarded[i] << '\n';
    }
    for (std::size_t m = 0; m < s.D.size(); ++m) {
      out << replication << ',' << s.t << ',' << m << ",matches," << s.D[m] << '\n';
    }
    out << replication << ',' << s.t << ",-1,reward," << fmt(s.reward) << '\n';
  }
}

}  // namespace dynmatch
