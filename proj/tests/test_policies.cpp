#include <catch2/catch_amalgamated.hpp>

#include "dynmatch/analytics.hpp"
#include "dynmatch/builtins.hpp"
#include "dynmatch/engine.hpp"
#include "dynmatch/planner.hpp"
#include "dynmatch/policies.hpp"
#include "helpers.hpp"

using namespace dynmatch;
using Catch::Approx;

namespace {

struct Setup {
  MatchingNetwork net;
  SppSolution spp;
  RootedTree tree;
  std::shared_ptr<BasisResolver> resolver;

  explicit Setup(const std::string& name)
      : net(builtin_instance(name)),
        spp(*solve_spp(net).solution),
        tree(reduced_tree(net, spp)),
        resolver(std::make_shared<BasisResolver>(net, spp)) {}
};

std::vector<long long> run_arrivals(const MatchingNetwork& net, Policy& policy,
                                    const std::vector<int>& arrivals, SimState* out = nullptr) {
  SimState s = make_state(net);
  std::mt19937_64 rng = make_rng(1, 1);
  for (int a : arrivals) {
    PolicyDecision d = policy.decide(s.Q, a, rng);
    apply_step(s, net, a, d);
  }
  if (out) *out = s;
  return s.Q;
}

}  // namespace

TEST_CASE("pm: no non-empty neighbor enqueues or discards by demand class") {
  Setup x("path4");
  PmPolicy pm(x.net, x.spp, x.resolver);
  std::mt19937_64 rng = make_rng(3, 0);
  std::vector<long long> empty(4, 0);
  auto d0 = pm.decide(empty, 0, rng);
  CHECK(d0.kind == ActionKind::Enqueue);  // type 0 is over-demanded
  auto d3 = pm.decide(empty, 3, rng);
  CHECK(d3.kind == ActionKind::Discard);  // type 3 is the under-demanded root
}

TEST_CASE("pm: a single non-empty neighbor is matched with probability one") {
  Setup x("path4");
  PmPolicy pm(x.net, x.spp, x.resolver);
  std::mt19937_64 rng = make_rng(4, 0);
  std::vector<long long> Q = {0, 1, 0, 0};
  auto d = pm.decide(Q, 0, rng);
  REQUIRE(d.kind == ActionKind::Match);
  CHECK(d.partner == 1);
  REQUIRE(d.probabilities.size() == 1);
  CHECK(d.probabilities[0].second == Approx(1.0).margin(1e-15));
}

TEST_CASE("pm: two-sided choice uses the fixed-basis re-solve rates") {
  Setup x("path4");
  PmPolicy pm(x.net, x.spp, x.resolver);
  // Pattern U+ = {1, 3} in 1-based labels; arrival at type 2.
  std::vector<long long> Q = {1, 0, 1, 0};
  auto probs = pm.match_distribution(Q, 1);
  REQUIRE(probs.size() == 2);

  // Oracle: forward-substitute the path chain with lambda perturbed by
  // eps/4 on types 1 and 3 (1-based).
  const auto& l = x.net.lambda();
  const double d = x.spp.epsilon / 4.0;
  double z0 = l[0] + d;
  double z1 = l[1] - z0;
  CHECK(probs[0].first == 0);
  CHECK(probs[0].second == Approx(z0 / (z0 + z1)).margin(1e-12));
  CHECK(probs[1].first == 2);
  CHECK(probs[1].second == Approx(z1 / (z0 + z1)).margin(1e-12));
}

TEST_CASE("pm: probabilities over the choice set always sum to one") {
  Setup x("path6-fig5");
  PmPolicy pm(x.net, x.spp, x.resolver);
  auto states = sample_reachable_states(x.net, pm, 2000, 300, 77);
  long long checked = 0;
  for (const auto& Q : states) {
    for (int j = 0; j < x.net.num_types(); ++j) {
      auto probs = pm.match_distribution(Q, j);
      if (probs.empty()) continue;
      double total = 0.0;
      for (auto [p, v] : probs) total += v;
      REQUIRE(total == Approx(1.0).margin(1e-12));
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("tp on the path of 4: arrivals (3,2,1) perform exactly m(2,3)") {
  Setup x("path4");
  TpPolicy tp(x.net, x.spp, x.tree);
  SimState s;
  run_arrivals(x.net, tp, {2, 1, 0}, &s);  // 0-based types
  CHECK(s.D[0] == 0);
  CHECK(s.D[1] == 1);  // m(2,3) in 1-based labels
  CHECK(s.D[2] == 0);
  CHECK(s.Q == std::vector<long long>{1, 0, 0, 0});
}

TEST_CASE("tp: root arrival matches an available child; leaf with empty parent enqueues") {
  Setup x("path4");
  TpPolicy tp(x.net, x.spp, x.tree);
  std::mt19937_64 rng = make_rng(5, 0);
  std::vector<long long> Q = {0, 0, 1, 0};
  auto d = tp.decide(Q, 3, rng);
  REQUIRE(d.kind == ActionKind::Match);
  CHECK(d.partner == 2);

  std::vector<long long> empty(4, 0);
  auto leaf = tp.decide(empty, 0, rng);
  CHECK(leaf.kind == ActionKind::Enqueue);
}

TEST_CASE("ttp never consults the parent queue") {
  Setup x("path4");
  // Direct decider call: only child availability enters the signature.
  std::vector<bool> no_children_available = {false};
  auto d = ttp_decide(x.tree, 1, no_children_available);
  CHECK(d.kind == ActionKind::Enqueue);
  std::vector<bool> child_available = {true};
  auto d2 = ttp_decide(x.tree, 1, child_available);
  REQUIRE(d2.kind == ActionKind::Match);
  CHECK(d2.partner == 0);
}

TEST_CASE("ttp on the path of 4: arrivals (3,2,1) enqueue; the next type-2 arrival clears") {
  // The formal children-only rule performs no match during (3,2,1); the
  // match m(1,2) is performed by the following arrival at type 2.
  Setup x("path4");
  TtpPolicy ttp(x.net, x.spp, x.tree);
  SimState s;
  run_arrivals(x.net, ttp, {2, 1, 0}, &s);
  CHECK(s.Q == std::vector<long long>{1, 1, 1, 0});
  CHECK(s.D == std::vector<long long>{0, 0, 0});

  std::mt19937_64 rng = make_rng(6, 0);
  auto d = ttp.decide(s.Q, 1, rng);
  REQUIRE(d.kind == ActionKind::Match);
  CHECK(d.partner == 0);  // performs m(1,2) in 1-based labels
}

TEST_CASE("ttp: leaf arrivals always enqueue; unmatched root arrivals are discarded") {
  Setup x("path4");
  TtpPolicy ttp(x.net, x.spp, x.tree);
  std::mt19937_64 rng = make_rng(7, 0);
  std::vector<long long> Q = {0, 5, 0, 0};
  auto leaf = ttp.decide(Q, 0, rng);
  CHECK(leaf.kind == ActionKind::Enqueue);

  std::vector<long long> empty(4, 0);
  auto root = ttp.decide(empty, 3, rng);
  CHECK(root.kind == ActionKind::Discard);
}

TEST_CASE("lq: longest neighbor queue wins, ties to the smallest index") {
  Setup x("path4");
  LqPolicy lq(x.net, x.spp);
  std::mt19937_64 rng = make_rng(8, 0);

  std::vector<long long> empty(4, 0);
  CHECK(lq.decide(empty, 1, rng).kind == ActionKind::Enqueue);

  std::vector<long long> Q = {0, 3, 0, 5};
  auto d = lq.decide(Q, 2, rng);
  REQUIRE(d.kind == ActionKind::Match);
  CHECK(d.partner == 3);

  std::vector<long long> tie = {0, 2, 0, 2};
  auto dt = lq.decide(tie, 2, rng);
  REQUIRE(dt.kind == ActionKind::Match);
  CHECK(dt.partner == 1);
}

TEST_CASE("static priority with empty allowed sets always enqueues") {
  Setup x("path4");
  PriorityOrders orders;
  orders.order.assign(4, {});
  StaticPriorityPolicy pol(x.net, x.spp, orders);
  std::mt19937_64 rng = make_rng(9, 0);
  std::vector<long long> Q = {3, 3, 3, 3};
  for (int i = 0; i < 3; ++i) {
    CHECK(pol.decide(Q, i, rng).kind == ActionKind::Enqueue);
  }
  CHECK(pol.decide(Q, 3, rng).kind == ActionKind::Discard);
}

TEST_CASE("tp and ttp are instantiations of static priority") {
  Setup x("path6-fig5");
  TpPolicy tp(x.net, x.spp, x.tree);
  TtpPolicy ttp(x.net, x.spp, x.tree);
  StaticPriorityPolicy tp_static(x.net, x.spp, tp_orders(x.net, x.tree));
  StaticPriorityPolicy ttp_static(x.net, x.spp, ttp_orders(x.net, x.tree));

  std::mt19937_64 rng = make_rng(10, 0);
  std::mt19937_64 state_rng = make_rng(11, 0);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<long long> Q(6);
    for (auto& q : Q) q = static_cast<long long>(state_rng() % 4);
    int arrival = static_cast<int>(state_rng() % 6);

    auto a = tp.decide(Q, arrival, rng);
    auto b = tp_static.decide(Q, arrival, rng);
    REQUIRE(a.kind == b.kind);
    if (a.kind == ActionKind::Match) REQUIRE(a.partner == b.partner);

    auto c = ttp.decide(Q, arrival, rng);
    auto d = ttp_static.decide(Q, arrival, rng);
    REQUIRE(c.kind == d.kind);
    if (c.kind == ActionKind::Match) REQUIRE(c.partner == d.partner);
  }
}

TEST_CASE("adversarial fixture reproduces the non-consistency example") {
  auto net = builtin_instance("path6-fig5");
  AdversarialPolicy pol(net);
  // 1-based arrivals (3,5,4,6) from Q(0) = 0 and Q'(0) = e_1.
  std::vector<int> arrivals = {2, 4, 3, 5};

  SimState a = make_state(net);
  SimState b = make_state(net, {1, 0, 0, 0, 0, 0});
  std::mt19937_64 rng = make_rng(12, 0);
  for (int t = 0; t < 4; ++t) {
    apply_step(a, net, arrivals[t], pol.decide(a.Q, arrivals[t], rng));
    apply_step(b, net, arrivals[t], pol.decide(b.Q, arrivals[t], rng));
  }
  CHECK(l1_distance(a.Q, b.Q) == 3);
  CHECK(l1_distance(make_state(net).Q, make_state(net, {1, 0, 0, 0, 0, 0}).Q) == 1);
}

TEST_CASE("adversarial greedy fallback") {
  auto net = builtin_instance("path6-fig5");
  AdversarialPolicy pol(net);
  std::mt19937_64 rng = make_rng(13, 0);
  std::vector<long long> Q = {0, 0, 0, 1, 0, 0};
  auto d = pol.decide(Q, 4, rng);
  REQUIRE(d.kind == ActionKind::Match);
  CHECK(d.partner == 3);
  std::vector<long long> empty(6, 0);
  CHECK(pol.decide(empty, 2, rng).kind == ActionKind::Enqueue);
}

TEST_CASE("declared information classes match the granularity-scope taxonomy") {
  Setup x("path4");
  PmPolicy pm(x.net, x.spp, x.resolver);
  TpPolicy tp(x.net, x.spp, x.tree);
  TtpPolicy ttp(x.net, x.spp, x.tree);
  LqPolicy lq(x.net, x.spp);
  CHECK(pm.info() == PolicyInfo{Granularity::Availability, Scope::Global});
  CHECK(tp.info() == PolicyInfo{Granularity::Availability, Scope::Local});
  CHECK(ttp.info() == PolicyInfo{Granularity::Availability, Scope::Local});
  CHECK(lq.info() == PolicyInfo{Granularity::QueueLength, Scope::Local});
}

TEST_CASE("one-step l1 non-expansion for the consistent policies") {
  Setup x("path6-fig5");
  TpPolicy tp(x.net, x.spp, x.tree);
  TtpPolicy ttp(x.net, x.spp, x.tree);
  LqPolicy lq(x.net, x.spp);

  // A static priority policy with shuffled orders is consistent as well.
  std::mt19937_64 order_rng = make_rng(21, 0);
  PriorityOrders random_orders = tp_orders(x.net, x.tree);
  for (auto& ord : random_orders.order) {
    std::shuffle(ord.begin(), ord.end(), order_rng);
  }
  StaticPriorityPolicy random_static(x.net, x.spp, random_orders, "static:random");

  std::vector<Policy*> policies = {&tp, &ttp, &lq, &random_static};
  for (Policy* pol : policies) {
    auto states = sample_reachable_states(x.net, *pol, 500, 250, 1000 + pol->name().size());
    long long pairs = 0;
    for (std::size_t s = 0; s + 1 < states.size(); s += 2) {
      for (int arrival = 0; arrival < x.net.num_types(); ++arrival) {
        auto [a, b] = coupled_pair_run(x.net, *pol, states[s], states[s + 1], arrival);
        REQUIRE(l1_distance(a.Q, b.Q) <= l1_distance(states[s], states[s + 1]));
      }
      ++pairs;
    }
    CHECK(pairs == 250);
  }
}
