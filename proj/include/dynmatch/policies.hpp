#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dynmatch/errors.hpp"
#include "dynmatch/network.hpp"
#include "dynmatch/planner.hpp"
#include "dynmatch/rng.hpp"

namespace dynmatch {

enum class ActionKind { Match, Enqueue, Discard };

/// Outcome of a policy for one arrival. For randomized policies,
/// `probabilities` carries the full match distribution actually used, so the
/// drift checker can work with exact probabilities instead of Monte Carlo.
struct PolicyDecision {
  ActionKind kind = ActionKind::Enqueue;
  int partner = -1;  // partner type when kind == Match
  int match = -1;    // match index when kind == Match
  std::vector<std::pair<int, double>> probabilities;  // (partner, prob)
};

enum class Granularity { Availability, QueueLength };
enum class Scope { Local, Global };

struct PolicyInfo {
  Granularity granularity;
  Scope scope;
  friend bool operator==(const PolicyInfo&, const PolicyInfo&) = default;
};

/// Adjacency restricted to the active matches M+. Policies are built on the
/// reduced network, which structurally rules out performing redundant
/// matches.
struct ActiveGraph {
  // per type: (partner, match index), ascending by partner
  std::vector<std::vector<std::pair<int, int>>> nbrs;

  static ActiveGraph build(const MatchingNetwork& net, const SppSolution& spp) {
    ActiveGraph g;
    g.nbrs.resize(net.num_types());
    for (int m : spp.active_matches) {
      auto [a, b] = net.matches()[m];
      g.nbrs[a].emplace_back(b, m);
      g.nbrs[b].emplace_back(a, m);
    }
    for (auto& v : g.nbrs) std::sort(v.begin(), v.end());
    return g;
  }
};

inline PolicyDecision no_match_decision(bool discard) {
  PolicyDecision d;
  d.kind = discard ? ActionKind::Discard : ActionKind::Enqueue;
  return d;
}

// ---------------------------------------------------------------------------
// Pure deciders. Each signature admits exactly the information its policy
// class is allowed to use.
// ---------------------------------------------------------------------------

/// Probabilistic matching: match the arriving agent to a non-empty
/// neighboring queue i with probability proportional to the fixed-basis
/// re-solve rate z~_{m(i, arrival)}. Always matches when some neighbor is
/// available, so the probabilities over the choice set sum to one.
inline std::vector<std::pair<int, double>> pm_match_probabilities(
    const ActiveGraph& graph, const BasisResolver& resolver, std::uint64_t availability,
    int arrival) {
  std::vector<std::pair<int, double>> probs;
  bool any = false;
  for (auto [partner, m] : graph.nbrs[arrival]) {
    any = any || ((availability >> partner) & 1ull);
  }
  if (!any) return probs;
  const PerturbedSolution& tilde = resolver.resolve(availability);
  double total = 0.0;
  for (auto [partner, m] : graph.nbrs[arrival]) {
    if ((availability >> partner) & 1ull) {
      probs.emplace_back(partner, tilde.z[m]);
      total += tilde.z[m];
    }
  }
  for (auto& [partner, p] : probs) p /= total;
  return probs;
}

inline PolicyDecision pm_decide(const ActiveGraph& graph, const BasisResolver& resolver,
                                std::uint64_t availability, int arrival,
                                bool discard_unmatched, std::mt19937_64& rng) {
  PolicyDecision d;
  d.probabilities = pm_match_probabilities(graph, resolver, availability, arrival);
  if (d.probabilities.empty()) {
    d.kind = discard_unmatched ? ActionKind::Discard : ActionKind::Enqueue;
    return d;
  }
  d.kind = ActionKind::Match;
  d.partner = d.probabilities.back().first;  // absorbs rounding residue
  if (d.probabilities.size() > 1) {
    double u = to_unit_interval(rng());
    double acc = 0.0;
    for (auto [partner, p] : d.probabilities) {
      acc += p;
      if (u < acc) {
        d.partner = partner;
        break;
      }
    }
  }
  return d;
}

/// Tree priority: children first (ascending type index), then the parent as
/// a last resort. child_nonempty is aligned with tree.children[arrival].
inline PolicyDecision tp_decide(const RootedTree& tree, int arrival,
                                const std::vector<bool>& child_nonempty,
                                bool parent_nonempty) {
  PolicyDecision d;
  const auto& kids = tree.children[arrival];
  for (std::size_t c = 0; c < kids.size(); ++c) {
    if (child_nonempty[c]) {
      d.kind = ActionKind::Match;
      d.partner = kids[c];
      return d;
    }
  }
  if (arrival != tree.root && parent_nonempty) {
    d.kind = ActionKind::Match;
    d.partner = tree.parent[arrival];
    return d;
  }
  return no_match_decision(arrival == tree.root);
}

/// Truncated tree priority: children only; the parent queue is never
/// consulted. Unmatched arrivals at the root are discarded.
inline PolicyDecision ttp_decide(const RootedTree& tree, int arrival,
                                 const std::vector<bool>& child_nonempty) {
  PolicyDecision d;
  const auto& kids = tree.children[arrival];
  for (std::size_t c = 0; c < kids.size(); ++c) {
    if (child_nonempty[c]) {
      d.kind = ActionKind::Match;
      d.partner = kids[c];
      return d;
    }
  }
  return no_match_decision(arrival == tree.root);
}

/// Longest queue among the arriving type's neighbors; ties broken by the
/// smallest type index. neighbor_lengths is ascending by type.
inline PolicyDecision lq_decide(const std::vector<std::pair<int, long long>>& neighbor_lengths,
                                bool discard_unmatched) {
  int best = -1;
  long long best_len = 0;
  for (auto [partner, len] : neighbor_lengths) {
    if (len > best_len) {
      best = partner;
      best_len = len;
    }
  }
  if (best < 0) return no_match_decision(discard_unmatched);
  PolicyDecision d;
  d.kind = ActionKind::Match;
  d.partner = best;
  return d;
}

/// Generic static priority: the highest-priority available match in the
/// arriving type's ordered list M(i). `available` is aligned with `ordered`.
inline PolicyDecision static_priority_decide(
    const std::vector<std::pair<int, int>>& ordered /* (match, partner) */,
    const std::vector<bool>& available, bool discard_unmatched) {
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    if (available[k]) {
      PolicyDecision d;
      d.kind = ActionKind::Match;
      d.match = ordered[k].first;
      d.partner = ordered[k].second;
      return d;
    }
  }
  return no_match_decision(discard_unmatched);
}

/// Non-consistent counterexample policy on a path: with both side queues
/// non-empty, match toward the smaller index when queue 0 is empty and
/// toward the larger index otherwise; plain greedy in all other states.
/// Uses the full state by design, and never discards.
inline PolicyDecision adversarial_decide(const std::vector<long long>& Q, int arrival) {
  const int n = static_cast<int>(Q.size());
  bool left = arrival > 0 && Q[arrival - 1] > 0;
  bool right = arrival + 1 < n && Q[arrival + 1] > 0;
  PolicyDecision d;
  if (left && right) {
    d.kind = ActionKind::Match;
    d.partner = Q[0] == 0 ? arrival - 1 : arrival + 1;
  } else if (left || right) {
    d.kind = ActionKind::Match;
    d.partner = left ? arrival - 1 : arrival + 1;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Runtime policy objects driven by the engine.
// ---------------------------------------------------------------------------

class Policy {
 public:
  Policy(std::string name, PolicyInfo info) : name_(std::move(name)), info_(info) {}
  virtual ~Policy() = default;

  const std::string& name() const { return name_; }
  PolicyInfo info() const { return info_; }

  /// Decision for one arrival given the queue state at the start of the
  /// period (before the arrival joins).
  virtual PolicyDecision decide(const std::vector<long long>& Q, int arrival,
                                std::mt19937_64& rng) = 0;

  /// Exact distribution over match partners for this arrival; deterministic
  /// policies return a single unit atom (or nothing when no match is
  /// available). The complement mass is enqueue/discard.
  virtual std::vector<std::pair<int, double>> match_distribution(
      const std::vector<long long>& Q, int arrival) const = 0;

  /// Whether unmatched arrivals of this type are discarded (truncation).
  virtual bool discards(int type) const = 0;

  virtual std::unique_ptr<Policy> clone() const = 0;

 private:
  std::string name_;
  PolicyInfo info_;
};

namespace detail {

inline std::uint64_t availability_mask(const std::vector<long long>& Q) {
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    if (Q[i] > 0) mask |= 1ull << i;
  }
  return mask;
}

inline std::vector<bool> truncation_set(const SppSolution& spp, int n) {
  std::vector<bool> t(n, false);
  for (int i : spp.under_demanded) t[i] = true;
  return t;
}

}  // namespace detail

class PmPolicy final : public Policy {
 public:
  PmPolicy(const MatchingNetwork& net, const SppSolution& spp,
           std::shared_ptr<const BasisResolver> resolver)
      : Policy("pm", {Granularity::Availability, Scope::Global}),
        graph_(ActiveGraph::build(net, spp)),
        resolver_(std::move(resolver)),
        truncated_(detail::truncation_set(spp, net.num_types())) {}

  PolicyDecision decide(const std::vector<long long>& Q, int arrival,
                        std::mt19937_64& rng) override {
    std::uint64_t mask = detail::availability_mask(Q);
    PolicyDecision d = pm_decide(graph_, *resolver_, mask, arrival, truncated_[arrival], rng);
    if (d.kind == ActionKind::Match) d.match = partner_match(arrival, d.partner);
    return d;
  }

  std::vector<std::pair<int, double>> match_distribution(
      const std::vector<long long>& Q, int arrival) const override {
    return pm_match_probabilities(graph_, *resolver_, detail::availability_mask(Q), arrival);
  }

  bool discards(int type) const override { return truncated_[type]; }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<PmPolicy>(*this); }

 private:
  int partner_match(int arrival, int partner) const {
    for (auto [p, m] : graph_.nbrs[arrival]) {
      if (p == partner) return m;
    }
    return -1;
  }

  ActiveGraph graph_;
  std::shared_ptr<const BasisResolver> resolver_;
  std::vector<bool> truncated_;
};

class TpPolicy final : public Policy {
 public:
  TpPolicy(const MatchingNetwork& net, const SppSolution& spp, RootedTree tree)
      : Policy("tp", {Granularity::Availability, Scope::Local}),
        net_(&net),
        tree_(std::move(tree)) {
    if (!spp.is_under_demanded(tree_.root)) {
      throw Error("tp: tree root must be the under-demanded node");
    }
  }

  PolicyDecision decide(const std::vector<long long>& Q, int arrival,
                        std::mt19937_64&) override {
    const auto& kids = tree_.children[arrival];
    scratch_.assign(kids.size(), false);
    for (std::size_t c = 0; c < kids.size(); ++c) scratch_[c] = Q[kids[c]] > 0;
    bool parent_nonempty = arrival != tree_.root && Q[tree_.parent[arrival]] > 0;
    PolicyDecision d = tp_decide(tree_, arrival, scratch_, parent_nonempty);
    if (d.kind == ActionKind::Match) d.match = net_->match_index(arrival, d.partner);
    return d;
  }

  std::vector<std::pair<int, double>> match_distribution(
      const std::vector<long long>& Q, int arrival) const override {
    std::vector<bool> child(tree_.children[arrival].size(), false);
    for (std::size_t c = 0; c < child.size(); ++c) {
      child[c] = Q[tree_.children[arrival][c]] > 0;
    }
    bool parent_nonempty = arrival != tree_.root && Q[tree_.parent[arrival]] > 0;
    PolicyDecision d = tp_decide(tree_, arrival, child, parent_nonempty);
    if (d.kind != ActionKind::Match) return {};
    return {{d.partner, 1.0}};
  }

  bool discards(int type) const override { return type == tree_.root; }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<TpPolicy>(*this); }

  const RootedTree& tree() const { return tree_; }

 private:
  const MatchingNetwork* net_;
  RootedTree tree_;
  std::vector<bool> scratch_;
};

class TtpPolicy final : public Policy {
 public:
  TtpPolicy(const MatchingNetwork& net, const SppSolution& spp, RootedTree tree)
      : Policy("ttp", {Granularity::Availability, Scope::Local}),
        net_(&net),
        tree_(std::move(tree)) {
    if (!spp.is_under_demanded(tree_.root)) {
      throw Error("ttp: tree root must be the under-demanded node");
    }
  }

  PolicyDecision decide(const std::vector<long long>& Q, int arrival,
                        std::mt19937_64&) override {
    const auto& kids = tree_.children[arrival];
    scratch_.assign(kids.size(), false);
    for (std::size_t c = 0; c < kids.size(); ++c) scratch_[c] = Q[kids[c]] > 0;
    PolicyDecision d = ttp_decide(tree_, arrival, scratch_);
    if (d.kind == ActionKind::Match) d.match = net_->match_index(arrival, d.partner);
    return d;
  }

  std::vector<std::pair<int, double>> match_distribution(
      const std::vector<long long>& Q, int arrival) const override {
    std::vector<bool> child(tree_.children[arrival].size(), false);
    for (std::size_t c = 0; c < child.size(); ++c) {
      child[c] = Q[tree_.children[arrival][c]] > 0;
    }
    PolicyDecision d = ttp_decide(tree_, arrival, child);
    if (d.kind != ActionKind::Match) return {};
    return {{d.partner, 1.0}};
  }

  bool discards(int type) const override { return type == tree_.root; }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<TtpPolicy>(*this); }

  const RootedTree& tree() const { return tree_; }

 private:
  const MatchingNetwork* net_;
  RootedTree tree_;
  std::vector<bool> scratch_;
};

class LqPolicy final : public Policy {
 public:
  LqPolicy(const MatchingNetwork& net, const SppSolution& spp)
      : Policy("lq", {Granularity::QueueLength, Scope::Local}),
        graph_(ActiveGraph::build(net, spp)),
        truncated_(detail::truncation_set(spp, net.num_types())) {}

  PolicyDecision decide(const std::vector<long long>& Q, int arrival,
                        std::mt19937_64&) override {
    lengths_.clear();
    for (auto [partner, m] : graph_.nbrs[arrival]) lengths_.emplace_back(partner, Q[partner]);
    PolicyDecision d = lq_decide(lengths_, truncated_[arrival]);
    if (d.kind == ActionKind::Match) d.match = partner_match(arrival, d.partner);
    return d;
  }

  std::vector<std::pair<int, double>> match_distribution(
      const std::vector<long long>& Q, int arrival) const override {
    std::vector<std::pair<int, long long>> lengths;
    for (auto [partner, m] : graph_.nbrs[arrival]) lengths.emplace_back(partner, Q[partner]);
    PolicyDecision d = lq_decide(lengths, truncated_[arrival]);
    if (d.kind != ActionKind::Match) return {};
    return {{d.partner, 1.0}};
  }

  bool discards(int type) const override { return truncated_[type]; }

  std::unique_ptr<Policy> clone() const override { return std::make_unique<LqPolicy>(*this); }

 private:
  int partner_match(int arrival, int partner) const {
    for (auto [p, m] : graph_.nbrs[arrival]) {
      if (p == partner) return m;
    }
    return -1;
  }

  ActiveGraph graph_;
  std::vector<bool> truncated_;
  std::vector<std::pair<int, long long>> lengths_;
};

/// Strict per-type priority orders over subsets of incident active matches.
struct PriorityOrders {
  std::vector<std::vector<int>> order;  // per type: ordered match indices
};

class StaticPriorityPolicy final : public Policy {
 public:
  StaticPriorityPolicy(const MatchingNetwork& net, const SppSolution& spp,
                       const PriorityOrders& orders, std::string name = "static")
      : Policy(std::move(name), {Granularity::Availability, Scope::Local}),
        truncated_(detail::truncation_set(spp, net.num_types())) {
    ordered_.resize(net.num_types());
    for (int i = 0; i < net.num_types(); ++i) {
      for (int m : orders.order[i]) {
        auto [a, b] = net.matches()[m];
        if (a != i && b != i) {
          throw Error("priority order for type " + std::to_string(i) +
                      " contains non-incident match " + std::to_string(m));
        }
        if (!spp.is_active(m)) {
          throw Error("priority order contains redundant match " + std::to_string(m));
        }
        ordered_[i].emplace_back(m, a == i ? b : a);
      }
    }
  }

  PolicyDecision decide(const std::vector<long long>& Q, int arrival,
                        std::mt19937_64&) override {
    const auto& ord = ordered_[arrival];
    scratch_.assign(ord.size(), false);
    for (std::size_t k = 0; k < ord.size(); ++k) scratch_[k] = Q[ord[k].second] > 0;
    return static_priority_decide(ord, scratch_, truncated_[arrival]);
  }

  std::vector<std::pair<int, double>> match_distribution(
      const std::vector<long long>& Q, int arrival) const override {
    const auto& ord = ordered_[arrival];
    std::vector<bool> avail(ord.size(), false);
    for (std::size_t k = 0; k < ord.size(); ++k) avail[k] = Q[ord[k].second] > 0;
    PolicyDecision d = static_priority_decide(ord, avail, truncated_[arrival]);
    if (d.kind != ActionKind::Match) return {};
    return {{d.partner, 1.0}};
  }

  bool discards(int type) const override { return truncated_[type]; }

  std::unique_ptr<Policy> clone() const override {
    return std::make_unique<StaticPriorityPolicy>(*this);
  }

 private:
  std::vector<std::vector<std::pair<int, int>>> ordered_;  // (match, partner)
  std::vector<bool> truncated_;
  std::vector<bool> scratch_;
};

class AdversarialPolicy final : public Policy {
 public:
  explicit AdversarialPolicy(const MatchingNetwork& net)
      : Policy("adversarial", {Granularity::QueueLength, Scope::Global}), net_(&net) {
    const int n = net.num_types();
    if (n < 6) {
      throw Error("adversarial fixture requires a path of at least 6 nodes");
    }
    for (int i = 0; i + 1 < n; ++i) {
      if (net.match_index(i, i + 1) < 0 || net.num_matches() != n - 1) {
        throw Error("adversarial fixture requires a path network");
      }
    }
  }

  PolicyDecision decide(const std::vector<long long>& Q, int arrival,
                        std::mt19937_64&) override {
    PolicyDecision d = adversarial_decide(Q, arrival);
    if (d.kind == ActionKind::Match) d.match = net_->match_index(arrival, d.partner);
    return d;
  }

  std::vector<std::pair<int, double>> match_distribution(
      const std::vector<long long>& Q, int arrival) const override {
    PolicyDecision d = adversarial_decide(Q, arrival);
    if (d.kind != ActionKind::Match) return {};
    return {{d.partner, 1.0}};
  }

  bool discards(int) const override { return false; }

  std::unique_ptr<Policy> clone() const override {
    return std::make_unique<AdversarialPolicy>(*this);
  }

 private:
  const MatchingNetwork* net_;
};

/// TP expressed as priority orders: all incident matches, children
/// (ascending) before the parent.
inline PriorityOrders tp_orders(const MatchingNetwork& net, const RootedTree& tree) {
  PriorityOrders orders;
  orders.order.resize(net.num_types());
  for (int i = 0; i < net.num_types(); ++i) {
    for (int c : tree.children[i]) orders.order[i].push_back(net.match_index(i, c));
    if (i != tree.root) orders.order[i].push_back(net.match_index(i, tree.parent[i]));
  }
  return orders;
}

/// TTP expressed as priority orders: child matches only.
inline PriorityOrders ttp_orders(const MatchingNetwork& net, const RootedTree& tree) {
  PriorityOrders orders;
  orders.order.resize(net.num_types());
  for (int i = 0; i < net.num_types(); ++i) {
    for (int c : tree.children[i]) orders.order[i].push_back(net.match_index(i, c));
  }
  return orders;
}

}  // namespace dynmatch
