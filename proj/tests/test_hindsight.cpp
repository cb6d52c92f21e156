#include <catch2/catch_amalgamated.hpp>

#include "dynmatch/builtins.hpp"
#include "dynmatch/engine.hpp"
#include "dynmatch/hindsight.hpp"
#include "dynmatch/planner.hpp"
#include "dynmatch/policies.hpp"
#include "helpers.hpp"

using namespace dynmatch;
using Catch::Approx;

TEST_CASE("empty market values zero") {
  auto net = builtin_instance("path4");
  auto sol = hindsight_optimal(net, {0, 0, 0, 0});
  CHECK(sol.value == 0.0);
  for (auto y : sol.y) CHECK(y == 0);
}

TEST_CASE("path of 4 with one agent per inner type takes the better edge") {
  NetworkDescription raw = builtin_description("path4");
  raw.rewards = {5.0, 3.0, 1.0};
  auto net = make_network(raw);
  auto sol = hindsight_optimal(net, {1, 1, 1, 0});
  CHECK(sol.value == Approx(5.0));
  CHECK(sol.value == Approx(testutil::ip_exhaustive(net, {1, 1, 1, 0})));
}

TEST_CASE("5-cycle small counts equal exhaustive enumeration") {
  auto net = builtin_instance("cycle5");
  std::vector<long long> counts = {2, 1, 1, 1, 1};
  auto sol = hindsight_optimal(net, counts);
  CHECK(sol.value == Approx(testutil::ip_exhaustive(net, counts)).margin(1e-9));
}

TEST_CASE("random instances match the exhaustive oracle exactly") {
  std::mt19937_64 rng(20240607);
  int done = 0;
  while (done < 500) {
    int n = 2 + static_cast<int>(rng() % 5);  // n <= 6
    auto raw = testutil::random_connected_instance(n, static_cast<int>(rng() % 4), rng);
    auto v = validate(raw);
    if (!v.network) continue;
    std::vector<long long> counts(n);
    for (auto& c : counts) c = static_cast<long long>(rng() % 5);  // counts <= 4
    auto sol = hindsight_optimal(*v.network, counts);
    double oracle = testutil::ip_exhaustive(*v.network, counts);
    REQUIRE(sol.value == Approx(oracle).margin(1e-9));
    REQUIRE(detail::integer_feasible(*v.network, sol.y, counts));
    ++done;
  }
}

TEST_CASE("branch and bound stays exact on the odd cycle at mid-scale counts") {
  // cycle5's LP vertices are half-integral, so this exercises real branching.
  auto net = builtin_instance("cycle5");
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<long long> counts(5);
    for (auto& c : counts) c = static_cast<long long>(rng() % 9);  // counts <= 8
    auto sol = hindsight_optimal(net, counts);
    double oracle = testutil::ip_exhaustive(net, counts);
    REQUIRE(sol.value == Approx(oracle).margin(1e-9));
    REQUIRE(detail::integer_feasible(net, sol.y, counts));
  }
}

TEST_CASE("lp relaxation dominates the integer optimum, with equality on bipartite") {
  std::mt19937_64 rng(11);
  int done = 0;
  while (done < 100) {
    int n = 2 + static_cast<int>(rng() % 5);
    auto raw = testutil::random_connected_instance(n, static_cast<int>(rng() % 3), rng);
    auto v = validate(raw);
    if (!v.network) continue;
    const auto& net = *v.network;
    std::vector<long long> counts(n);
    for (auto& c : counts) c = static_cast<long long>(rng() % 5);

    auto A = testutil::matching_matrix(net);
    std::vector<double> b(counts.begin(), counts.end());
    auto lpres = lp::solve(A, b, net.rewards());
    auto ip = hindsight_optimal(net, counts);
    REQUIRE(lpres.objective >= ip.value - 1e-7);
    if (net.bipartite()) {
      REQUIRE(lpres.objective == Approx(ip.value).margin(1e-7));
    }
    ++done;
  }
}

TEST_CASE("hindsight curve is monotone with bounded increments") {
  auto net = builtin_instance("path5-fig10");
  ArrivalStream stream(net.lambda(), 90, 0);
  const long long T = 400;
  std::vector<std::vector<long long>> counts_at;
  std::vector<long long> counts(net.num_types(), 0);
  for (long long t = 1; t <= T; ++t) {
    ++counts[stream.next()];
    counts_at.push_back(counts);
  }
  auto curve = hindsight_curve(net, counts_at);
  double r_max = *std::max_element(net.rewards().begin(), net.rewards().end());
  for (std::size_t t = 1; t < curve.size(); ++t) {
    REQUIRE(curve[t] >= curve[t - 1] - 1e-12);
    REQUIRE(curve[t] - curve[t - 1] <= r_max + 1e-12);
  }
  CHECK(curve.front() == 0.0);  // single agent cannot match
}

TEST_CASE("checkpoint zero values zero") {
  auto net = builtin_instance("path4");
  auto curve = hindsight_curve(net, {std::vector<long long>(4, 0)});
  REQUIRE(curve.size() == 1);
  CHECK(curve[0] == 0.0);
}
