#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "dynmatch/engine.hpp"
#include "dynmatch/errors.hpp"
#include "dynmatch/hindsight.hpp"
#include "dynmatch/network.hpp"
#include "dynmatch/planner.hpp"
#include "dynmatch/policies.hpp"
#include "dynmatch/rng.hpp"

namespace dynmatch {

/// Alternating subtree sum f_i(v) = sum_{j in T-(i)} (-1)^{d(i,j)+1} v_j.
template <typename Vec>
double f_alternating(const RootedTree& tree, int i, const Vec& v) {
  double sum = 0.0;
  for (int j : tree.subtree[i]) {
    if (j == i) continue;
    int d = tree.depth[j] - tree.depth[i];
    sum += (d % 2 == 0 ? -1.0 : 1.0) * static_cast<double>(v[j]);
  }
  return sum;
}

/// Generalized quadratic Lyapunov function for tree priority:
/// L(Q) = sum_{i in A0} alpha_i (f_i(Q)+)^2 with the recursion
/// alpha_i = 1 + (1/eps_i) sum_{j in P(i)} alpha_j (lambda_j - eps_j).
struct TpLyapunov {
  const RootedTree* tree = nullptr;
  std::vector<double> alpha;  // per type; the (under-demanded) root slot is 0

  template <typename Vec>
  double f(int i, const Vec& v) const {
    return f_alternating(*tree, i, v);
  }

  template <typename Vec>
  double value(const Vec& Q) const {
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(alpha.size()); ++i) {
      if (i == tree->root) continue;
      double fi = f(i, Q);
      if (fi > 0.0) total += alpha[i] * fi * fi;
    }
    return total;
  }
};

/// Evaluates the alpha recursion top-down (ancestors first).
inline TpLyapunov tp_alpha(const MatchingNetwork& net, const SppSolution& spp,
                           const RootedTree& tree) {
  if (!spp.has_epsilon_i) {
    throw NotAcyclicError("tp_alpha requires the acyclic reduced network gaps eps_i");
  }
  const int n = net.num_types();
  TpLyapunov ly;
  ly.tree = &tree;
  ly.alpha.assign(n, 0.0);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (tree.depth[a] != tree.depth[b]) return tree.depth[a] < tree.depth[b];
    return a < b;
  });
  for (int i : order) {
    if (i == tree.root) continue;
    double acc = 1.0;
    for (int j : tree.same_parity_ancestors[i]) {
      acc += ly.alpha[j] * (net.lambda()[j] - spp.epsilon_i[j]) / spp.epsilon_i[i];
    }
    ly.alpha[i] = acc;
  }
  return ly;
}

/// Exact one-step drift E[L(Q(t+1)) - L(Q(t)) | Q(t) = Q]: enumerates the n
/// arrival types weighted by lambda and the policy's exact decision
/// distribution. No Monte Carlo anywhere.
inline double exact_drift(const MatchingNetwork& net, Policy& policy,
                          const std::vector<long long>& Q,
                          const std::function<double(const std::vector<long long>&)>& L) {
  const int n = net.num_types();
  const double base = L(Q);
  double drift = 0.0;
  std::vector<long long> succ = Q;
  for (int j = 0; j < n; ++j) {
    auto dist = policy.match_distribution(Q, j);
    double match_mass = 0.0;
    double inner = 0.0;
    for (auto [partner, p] : dist) {
      succ[partner] -= 1;
      inner += p * (L(succ) - base);
      succ[partner] += 1;
      match_mass += p;
    }
    double rest = 1.0 - match_mass;
    if (rest > 1e-15) {
      if (policy.discards(j)) {
        // state unchanged
      } else {
        succ[j] += 1;
        inner += rest * (L(succ) - base);
        succ[j] -= 1;
      }
    }
    drift += net.lambda()[j] * inner;
  }
  return drift;
}

/// States reachable by the policy itself: simulate from empty over a random
/// prefix of arrivals. The drift statements quantify over valid states, and
/// reachability is exactly validity.
inline std::vector<std::vector<long long>> sample_reachable_states(
    const MatchingNetwork& net, Policy& policy, int count, long long max_prefix,
    std::uint64_t seed) {
  std::vector<std::vector<long long>> states;
  states.reserve(count);
  for (int s = 0; s < count; ++s) {
    ArrivalStream stream(net.lambda(), seed, 2 * s);
    std::mt19937_64 policy_rng = make_rng(seed, 2 * s + 1);
    long long prefix = static_cast<long long>(splitmix64(seed ^ (0xabcdull + s)) % (max_prefix + 1));
    SimState st = make_state(net);
    for (long long t = 0; t < prefix; ++t) {
      int arrival = stream.next();
      PolicyDecision d = policy.decide(st.Q, arrival, policy_rng);
      apply_step(st, net, arrival, d);
    }
    states.push_back(st.Q);
  }
  return states;
}

// ---------------------------------------------------------------------------
// Regret estimation with common random numbers.
// ---------------------------------------------------------------------------

struct RegretCurve {
  std::string policy;
  std::vector<double> mean_regret;
  std::vector<double> ci_half;          // 1.96 standard errors
  std::vector<double> mean_total_queue; // sum over A0 of E[Q_i(t)]
  double sup_regret = 0.0;
  std::size_t sup_index = 0;
};

struct RegretReport {
  std::vector<long long> checkpoints;
  std::vector<RegretCurve> curves;
  long long horizon = 0;
  long long replications = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Deterministic parallel map over replication chunks: chunk boundaries are
// fixed (independent of thread count), workers claim chunks atomically, and
// reduction walks chunks in index order.
template <typename ChunkFn>
void parallel_chunks(long long items, long long chunk_size, int threads, ChunkFn&& fn) {
  const long long chunks = (items + chunk_size - 1) / chunk_size;
  std::atomic<long long> next{0};
  int hw = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  hw = static_cast<int>(std::min<long long>(hw, chunks));
  auto worker = [&]() {
    while (true) {
      long long c = next.fetch_add(1);
      if (c >= chunks) break;
      long long begin = c * chunk_size;
      long long end = std::min(items, begin + chunk_size);
      fn(c, begin, end);
    }
  };
  if (hw <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(hw);
  for (int i = 0; i < hw; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

struct Accum {
  std::vector<double> sum_regret, sumsq_regret, sum_queue;
};

}  // namespace detail

/// Per replication: one arrival trajectory is drawn, every policy runs on
/// it, and the hindsight optimum is solved on the same trajectory; regrets
/// are aggregated across replications. Deterministic given the base seed.
inline RegretReport regret_experiment(const MatchingNetwork& net, const SppSolution& spp,
                                      const std::vector<const Policy*>& prototypes,
                                      long long horizon,
                                      std::vector<long long> checkpoints,
                                      long long replications, std::uint64_t seed,
                                      int threads = 0) {
  if (checkpoints.empty()) checkpoints = geometric_checkpoints(horizon);
  const std::size_t ncp = checkpoints.size();
  const std::size_t npol = prototypes.size();
  const int n = net.num_types();

  const long long chunk_size = 16;
  const long long chunks = (replications + chunk_size - 1) / chunk_size;
  std::vector<std::vector<detail::Accum>> partials(
      chunks, std::vector<detail::Accum>(npol));
  for (auto& per_pol : partials) {
    for (auto& acc : per_pol) {
      acc.sum_regret.assign(ncp, 0.0);
      acc.sumsq_regret.assign(ncp, 0.0);
      acc.sum_queue.assign(ncp, 0.0);
    }
  }

  detail::parallel_chunks(replications, chunk_size, threads, [&](long long chunk,
                                                                 long long begin,
                                                                 long long end) {
    std::vector<std::unique_ptr<Policy>> local;
    for (const Policy* p : prototypes) local.push_back(p->clone());

    for (long long rep = begin; rep < end; ++rep) {
      ArrivalStream stream(net.lambda(), seed, static_cast<std::uint64_t>(rep));
      std::vector<int> arrivals(horizon);
      for (long long t = 0; t < horizon; ++t) arrivals[t] = stream.next();

      // cumulative counts at the checkpoints, then the hindsight curve
      std::vector<std::vector<long long>> counts_at;
      counts_at.reserve(ncp);
      {
        std::vector<long long> counts(n, 0);
        std::size_t cp = 0;
        while (cp < ncp && checkpoints[cp] == 0) {  // leading t = 0 checkpoints
          counts_at.push_back(counts);
          ++cp;
        }
        for (long long t = 1; t <= horizon && cp < ncp; ++t) {
          ++counts[arrivals[t - 1]];
          while (cp < ncp && checkpoints[cp] == t) {
            counts_at.push_back(counts);
            ++cp;
          }
        }
      }
      std::vector<double> rstar = hindsight_curve(net, counts_at);

      for (std::size_t pi = 0; pi < npol; ++pi) {
        std::mt19937_64 policy_rng =
            make_rng(seed ^ 0x9e3779b97f4a7c15ull, static_cast<std::uint64_t>(rep) * 64 + pi);
        auto stats = run_on_arrivals(net, *local[pi], arrivals, checkpoints, policy_rng);
        auto& acc = partials[chunk][pi];
        for (std::size_t c = 0; c < ncp; ++c) {
          double regret = rstar[c] - stats[c].reward;
          acc.sum_regret[c] += regret;
          acc.sumsq_regret[c] += regret * regret;
          double qsum = 0.0;
          for (int i : spp.over_demanded) qsum += static_cast<double>(stats[c].Q[i]);
          acc.sum_queue[c] += qsum;
        }
      }
    }
  });

  RegretReport report;
  report.checkpoints = checkpoints;
  report.horizon = horizon;
  report.replications = replications;
  report.seed = seed;
  for (std::size_t pi = 0; pi < npol; ++pi) {
    RegretCurve curve;
    curve.policy = prototypes[pi]->name();
    curve.mean_regret.assign(ncp, 0.0);
    curve.ci_half.assign(ncp, 0.0);
    curve.mean_total_queue.assign(ncp, 0.0);
    std::vector<double> sum(ncp, 0.0), sumsq(ncp, 0.0), qsum(ncp, 0.0);
    for (long long c = 0; c < chunks; ++c) {
      for (std::size_t cp = 0; cp < ncp; ++cp) {
        sum[cp] += partials[c][pi].sum_regret[cp];
        sumsq[cp] += partials[c][pi].sumsq_regret[cp];
        qsum[cp] += partials[c][pi].sum_queue[cp];
      }
    }
    const double R = static_cast<double>(replications);
    for (std::size_t cp = 0; cp < ncp; ++cp) {
      double mean = sum[cp] / R;
      curve.mean_regret[cp] = mean;
      double var = R > 1 ? std::max(0.0, (sumsq[cp] - R * mean * mean) / (R - 1)) : 0.0;
      curve.ci_half[cp] = 1.96 * std::sqrt(var / R);
      curve.mean_total_queue[cp] = qsum[cp] / R;
      if (cp == 0 || mean > curve.sup_regret) {
        curve.sup_regret = mean;
        curve.sup_index = cp;
      }
    }
    report.curves.push_back(std::move(curve));
  }
  return report;
}

/// Least-squares slope of y against log(t) over the checkpoints in the
/// final decade (t >= T / 10); the boundedness test for regret curves.
inline double slope_vs_log_t(const std::vector<long long>& checkpoints,
                             const std::vector<double>& y, long long horizon) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] * 10 >= horizon && checkpoints[i] > 0) {
      xs.push_back(std::log(static_cast<double>(checkpoints[i])));
      ys.push_back(y[i]);
    }
  }
  if (xs.size() < 2) return 0.0;
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return den > 0 ? num / den : 0.0;
}

// Regret CSV schema: policy,t,mean_regret,ci_half,mean_total_queue,
// sup_regret_flag; 9 significant digits.
inline void write_regret_csv(std::ostream& out, const RegretReport& report) {
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  out << "policy,t,mean_regret,ci_half,mean_total_queue,sup_regret_flag\n";
  for (const auto& c : report.curves) {
    for (std::size_t i = 0; i < report.checkpoints.size(); ++i) {
      out << c.policy << ',' << report.checkpoints[i] << ',' << fmt(c.mean_regret[i]) << ','
          << fmt(c.ci_half[i]) << ',' << fmt(c.mean_total_queue[i]) << ','
          << (i == c.sup_index ? 1 : 0) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Concentration of the arrival process.
// ---------------------------------------------------------------------------

struct ConcentrationResult {
  double mean = 0.0;
  double std_error = 0.0;
  double bound = 0.0;  // 2 sqrt(n)
  bool pass = false;
};

/// Monte Carlo estimate of E[Z(T)], Z(T) = T^{-1/2} sum_i max_{t<=T}
/// |A_i(t) - lambda_i t|, checked against the 2 sqrt(n) bound.
inline ConcentrationResult concentration_check(const std::vector<double>& lambda,
                                               long long horizon, long long replications,
                                               std::uint64_t seed) {
  const int n = static_cast<int>(lambda.size());
  double sum = 0.0, sumsq = 0.0;
  std::vector<double> dev(n);
  std::vector<long long> counts(n);
  for (long long rep = 0; rep < replications; ++rep) {
    ArrivalStream stream(lambda, seed, static_cast<std::uint64_t>(rep));
    std::fill(dev.begin(), dev.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (long long t = 1; t <= horizon; ++t) {
      ++counts[stream.next()];
      for (int i = 0; i < n; ++i) {
        double d = std::abs(static_cast<double>(counts[i]) - lambda[i] * t);
        if (d > dev[i]) dev[i] = d;
      }
    }
    double z = std::accumulate(dev.begin(), dev.end(), 0.0) / std::sqrt(horizon);
    sum += z;
    sumsq += z * z;
  }
  ConcentrationResult out;
  const double R = static_cast<double>(replications);
  out.mean = sum / R;
  double var = R > 1 ? std::max(0.0, (sumsq - R * out.mean * out.mean) / (R - 1)) : 0.0;
  out.std_error = std::sqrt(var / R);
  out.bound = 2.0 * std::sqrt(static_cast<double>(n));
  out.pass = out.mean <= out.bound + 3.0 * out.std_error;
  return out;
}

}  // namespace dynmatch
