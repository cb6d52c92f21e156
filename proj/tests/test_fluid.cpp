#include <catch2/catch_amalgamated.hpp>

#include "dynmatch/builtins.hpp"
#include "dynmatch/engine.hpp"
#include "dynmatch/fluid.hpp"
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

  explicit Setup(const std::string& name)
      : net(builtin_instance(name)),
        spp(*solve_spp(net).solution),
        tree(reduced_tree(net, spp)) {}
};

std::vector<double> random_state(int n, int root, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, scale);
  std::vector<double> q(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (i != root) q[i] = unif(rng);
  }
  return q;
}

}  // namespace

TEST_CASE("zero arrivals leave the fluid state unchanged") {
  Setup x("path4");
  FluidState s = make_fluid_state(x.net, x.tree, {1.5, 0.0, 2.0, 0.0});
  FluidState before = s;
  fluid_step(s, std::vector<double>(4, 0.0), x.net, x.tree);
  CHECK(s.q == before.q);
  CHECK(s.D == before.D);
  CHECK(s.discarded_root == 0.0);
}

TEST_CASE("negative arrivals are rejected") {
  Setup x("path4");
  FluidState s = make_fluid_state(x.net, x.tree);
  std::vector<double> bad = {0.1, -0.2, 0.0, 0.0};
  CHECK_THROWS_AS(fluid_step(s, bad, x.net, x.tree), NegativeArrivalError);
}

TEST_CASE("fluid arrival from empty keeps Phi at zero and discards the root slack") {
  Setup x("path6-fig5");
  FluidState s = make_fluid_state(x.net, x.tree);
  const long long T = 200;
  for (long long t = 0; t < T; ++t) {
    fluid_step(s, x.net.lambda(), x.net, x.tree);
    CHECK(fluid_phi(s.q, x.tree) <= 1e-12);
  }
  // per-period root discard equals s*_root
  CHECK(s.discarded_root == Approx(T * x.spp.s_star[x.tree.root]).margin(1e-9));
}

TEST_CASE("one-hot unit arrival reproduces the integer ttp step") {
  Setup x("path4");
  FluidState s = make_fluid_state(x.net, x.tree, {1.0, 0.0, 0.0, 0.0});
  std::vector<double> arrivals = {0.0, 1.0, 0.0, 0.0};
  fluid_step(s, arrivals, x.net, x.tree);
  CHECK(s.D[0] == Approx(1.0));  // m(1,2) in 1-based labels
  CHECK(s.q == std::vector<double>{0.0, 0.0, 0.0, 0.0});
}

TEST_CASE("integer arrivals drive the fluid engine exactly like the ttp engine") {
  Setup x("path6-fig5");
  TtpPolicy ttp(x.net, x.spp, x.tree);
  SimState engine_state = make_state(x.net);
  FluidState fluid_state = make_fluid_state(x.net, x.tree);

  ArrivalStream stream(x.net.lambda(), 404, 0);
  std::mt19937_64 rng = make_rng(404, 1);
  std::vector<double> one_hot(x.net.num_types(), 0.0);
  for (long long t = 1; t <= 2000; ++t) {
    int arrival = stream.next();
    PolicyDecision d = ttp.decide(engine_state.Q, arrival, rng);
    apply_step(engine_state, x.net, arrival, d);

    std::fill(one_hot.begin(), one_hot.end(), 0.0);
    one_hot[arrival] = 1.0;
    fluid_step(fluid_state, one_hot, x.net, x.tree);

    for (int i = 0; i < x.net.num_types(); ++i) {
      REQUIRE(fluid_state.q[i] == Approx(static_cast<double>(engine_state.Q[i])).margin(0.0));
    }
    for (int m = 0; m < x.net.num_matches(); ++m) {
      REQUIRE(fluid_state.D[m] == Approx(static_cast<double>(engine_state.D[m])).margin(0.0));
    }
  }
}

TEST_CASE("beta recursion on the empty state gives child-gap sums") {
  Setup x("path4");
  auto rates = beta_rates(std::vector<double>(4, 0.0), x.net, x.tree);
  REQUIRE(x.spp.has_epsilon_i);
  CHECK(rates.beta[0] == 0.0);  // leaf
  CHECK(rates.beta[1] == Approx(x.spp.epsilon_i[0]).margin(1e-12));
  CHECK(rates.beta[2] == Approx(x.spp.epsilon_i[1]).margin(1e-12));
  CHECK(rates.beta[3] == Approx(x.spp.epsilon_i[2]).margin(1e-12));
  CHECK(rates.F == Approx(1.0 - x.net.lambda()[x.tree.root]).margin(1e-12));
  CHECK(rates.Phi == 0.0);
}

TEST_CASE("beta matches the closed form whenever Phi(q) <= eps") {
  Setup x("path6-fig5");
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    auto q = random_state(6, x.tree.root, x.spp.epsilon / 5.0, rng);
    REQUIRE(fluid_phi(q, x.tree) <= x.spp.epsilon);
    auto rates = beta_rates(q, x.net, x.tree);
    auto closed = beta_closed_form(q, x.spp.epsilon_i, x.tree);
    for (int i = 0; i < 6; ++i) {
      REQUIRE(rates.beta[i] == Approx(closed[i]).margin(1e-12));
    }
    // Property 1 of F: F(q) = 1 - lambda_root + Phi(q) in this regime.
    REQUIRE(rates.F ==
            Approx(1.0 - x.net.lambda()[x.tree.root] + rates.Phi).margin(1e-12));
  }
}

TEST_CASE("beta stays within [0, lambda_i] and attains one min argument") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + static_cast<int>(rng() % 9);
    auto planted = testutil::planted_tree_instance(n, rng);
    auto net = make_network(planted.raw);
    auto tree = root_tree(net, planted.root);
    auto q = random_state(n, tree.root, 3.0, rng);
    auto rates = beta_rates(q, net, tree);
    for (int i = 0; i < n; ++i) {
      REQUIRE(rates.beta[i] >= -1e-12);
      REQUIRE(rates.beta[i] <= net.lambda()[i] + 1e-12);
      if (tree.is_leaf(i)) {
        REQUIRE(rates.beta[i] == 0.0);
        continue;
      }
      double supply = 0.0;
      for (int j : tree.children[i]) {
        supply += net.lambda()[j] + q[j] - rates.beta[j];
      }
      REQUIRE(rates.beta[i] <= supply + 1e-12);
      bool hits_lambda = std::abs(rates.beta[i] - net.lambda()[i]) <= 1e-12;
      bool hits_supply = std::abs(rates.beta[i] - supply) <= 1e-12;
      REQUIRE((hits_lambda || hits_supply));
    }
  }
}

TEST_CASE("F lower bound and monotonicity") {
  Setup x("path6-fig5");
  const double lr = x.net.lambda()[x.tree.root];
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10000; ++trial) {
    auto q = random_state(6, x.tree.root, 4.0, rng);
    auto rq = beta_rates(q, x.net, x.tree);
    REQUIRE(rq.F >= 1.0 - lr + std::min(x.spp.epsilon, rq.Phi) - 1e-12);

    auto q_small = q;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 6; ++i) {
      if (i != x.tree.root) q_small[i] = q[i] * unif(rng);
    }
    auto rs = beta_rates(q_small, x.net, x.tree);
    REQUIRE(rs.F <= rq.F + 1e-12);
  }
}

TEST_CASE("reflection identity holds along fluid trajectories") {
  Setup x("path6-fig5");
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> unif(0.0, 0.4);
  FluidState s = make_fluid_state(x.net, x.tree, random_state(6, x.tree.root, 2.0, rng));
  std::vector<double> arrivals(6);
  for (long long t = 0; t < 3000; ++t) {
    for (auto& a : arrivals) a = unif(rng);
    fluid_step(s, arrivals, x.net, x.tree);
    REQUIRE(reflection_deviation(s, x.tree) <= 1e-9);
    // R_i = q_i + D_{m(i, P(i))} for every non-root node
    for (int i = 0; i < 6; ++i) {
      if (i == x.tree.root) continue;
      double rhs = s.q[i] + s.D[x.net.match_index(i, x.tree.parent[i])];
      REQUIRE(s.R[i] == Approx(rhs).margin(1e-9));
    }
  }
}

TEST_CASE("reflection identity holds on random trees under random arrivals") {
  std::mt19937_64 rng(88);
  for (int trial = 0; trial < 15; ++trial) {
    int n = 2 + static_cast<int>(rng() % 9);
    auto planted = testutil::planted_tree_instance(n, rng);
    auto net = make_network(planted.raw);
    auto tree = root_tree(net, planted.root);
    FluidState s = make_fluid_state(net, tree, random_state(n, tree.root, 3.0, rng));
    std::uniform_real_distribution<double> unif(0.0, 0.6);
    std::vector<double> arrivals(n);
    for (long long t = 0; t < 500; ++t) {
      for (auto& a : arrivals) a = unif(rng);
      fluid_step(s, arrivals, net, tree);
      REQUIRE(reflection_deviation(s, tree) <= 1e-9);
      for (int i = 0; i < n; ++i) {
        if (i == tree.root) continue;
        double rhs = s.q[i] + s.D[net.match_index(i, tree.parent[i])];
        REQUIRE(s.R[i] == Approx(rhs).margin(1e-9));
      }
    }
  }
}

TEST_CASE("fluid drift: empty start is a fixed point of Phi") {
  Setup x("path4");
  auto res = fluid_drift_check(x.net, x.tree, x.spp.epsilon, std::vector<double>(4, 0.0), 100);
  CHECK(res.pass);
  CHECK(res.violations == 0);
}

TEST_CASE("fluid drift drains Phi by at least eps per period on the path of 6") {
  Setup x("path6-fig5");
  std::mt19937_64 rng(35);
  // spread 50 units of mass over the over-demanded queues
  std::vector<double> q0(6, 0.0);
  double total = 0.0;
  for (int i = 0; i < 5; ++i) {
    q0[i] = static_cast<double>(1 + (rng() % 10));
    total += q0[i];
  }
  for (int i = 0; i < 5; ++i) q0[i] *= 50.0 / total;

  FluidState s = make_fluid_state(x.net, x.tree, q0);
  double phi = fluid_phi(s.q, x.tree);
  CHECK(phi == Approx(50.0));
  long long steps = 0;
  while (phi > x.spp.epsilon && steps < 100000) {
    fluid_step(s, x.net.lambda(), x.net, x.tree);
    double next = fluid_phi(s.q, x.tree);
    REQUIRE(next <= phi - x.spp.epsilon + 1e-9);
    phi = next;
    ++steps;
  }
  CHECK(steps <= static_cast<long long>(std::ceil(50.0 / x.spp.epsilon)) + 1);
}

TEST_CASE("fluid drift passes on random planted trees") {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(rng() % 9);  // n <= 10
    auto planted = testutil::planted_tree_instance(n, rng);
    auto net = make_network(planted.raw);
    auto tree = root_tree(net, planted.root);
    double eps = *std::min_element(planted.eps.begin(), planted.eps.end());
    for (int start = 0; start < 5; ++start) {
      auto q0 = random_state(n, tree.root, 5.0, rng);
      auto res = fluid_drift_check(net, tree, eps, q0, 1500);
      REQUIRE(res.pass);
      REQUIRE(res.violations == 0);
    }
  }
}

TEST_CASE("lipschitz: identical trajectories give zero gap") {
  Setup x("path4");
  const long long T = 500;
  std::vector<std::vector<double>> A(T + 1, std::vector<double>(4, 0.0));
  for (long long t = 1; t <= T; ++t) {
    for (int i = 0; i < 4; ++i) A[t][i] = A[t - 1][i] + x.net.lambda()[i];
  }
  auto res = lipschitz_check(x.net, x.tree, A, A, std::vector<double>(4, 0.0), T);
  CHECK(res.pass);
  CHECK(res.max_ratio == 0.0);
}

TEST_CASE("lipschitz: one extra unit arrival moves Phi by at most 2(d_r + 1)") {
  Setup x("path6-fig5");
  const long long T = 400;
  const int bump_type = 1;
  const long long bump_time = 57;
  std::vector<std::vector<double>> A(T + 1, std::vector<double>(6, 0.0));
  for (long long t = 1; t <= T; ++t) {
    for (int i = 0; i < 6; ++i) A[t][i] = A[t - 1][i] + x.net.lambda()[i];
  }
  auto B = A;
  for (long long t = bump_time; t <= T; ++t) B[t][bump_type] += 1.0;

  auto res = lipschitz_check(x.net, x.tree, A, B, std::vector<double>(6, 0.0), T);
  CHECK(res.pass);
  // sum of max deviations is exactly 1, so LHS <= 2 (d_r + 1) directly
  CHECK(res.max_ratio <= 1.0 + 1e-12);
}

TEST_CASE("lipschitz: sampled arrivals against the fluid trajectory") {
  Setup x("path6-fig5");
  const long long T = 2000;
  std::vector<std::vector<double>> A(T + 1, std::vector<double>(6, 0.0));
  std::vector<std::vector<double>> B(T + 1, std::vector<double>(6, 0.0));
  ArrivalStream stream(x.net.lambda(), 777, 0);
  for (long long t = 1; t <= T; ++t) {
    A[t] = A[t - 1];
    A[t][stream.next()] += 1.0;
    for (int i = 0; i < 6; ++i) B[t][i] = B[t - 1][i] + x.net.lambda()[i];
  }
  auto res = lipschitz_check(x.net, x.tree, A, B, std::vector<double>(6, 0.0), T);
  CHECK(res.pass);
  CHECK(res.max_ratio <= 1.0);
}
