#pragma once

#include <string>
#include <vector>

#include "dynmatch/errors.hpp"
#include "dynmatch/network.hpp"

namespace dynmatch {

/// Benchmark instances used throughout the experiments. Type indices are
/// 0-based; the descriptions below cite the conventional 1-based labels.
///
///   path6-fig5  : path 1-..-6, lambda = (1,2,4,6,8,7)/28, r = (10,5,3,2,1)
///   path5-fig10 : path 1-..-5, lambda = (1,2,3,4,2.1)/12.1, r = (1,2,3,2)
///   path4       : path 1-..-4, lambda = (1,2,3,4)/10, r = (1,1,1)
///                 (default parameterization, not taken from a benchmark)
///   cycle5      : 5-cycle, lambda = (0.165,0.09,0.325,0.33,0.09),
///                 r = (1.75,2,1.3,1.4,0.85)
inline NetworkDescription builtin_description(const std::string& name) {
  NetworkDescription raw;
  auto path_edges = [](int n) {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return e;
  };
  if (name == "path6-fig5") {
    raw.n = 6;
    raw.matches = path_edges(6);
    raw.lambda = {1.0 / 28, 2.0 / 28, 4.0 / 28, 6.0 / 28, 8.0 / 28, 7.0 / 28};
    raw.rewards = {10, 5, 3, 2, 1};
  } else if (name == "path5-fig10") {
    raw.n = 5;
    raw.matches = path_edges(5);
    raw.lambda = {1.0 / 12.1, 2.0 / 12.1, 3.0 / 12.1, 4.0 / 12.1, 2.1 / 12.1};
    raw.rewards = {1, 2, 3, 2};
  } else if (name == "path4") {
    raw.n = 4;
    raw.matches = path_edges(4);
    raw.lambda = {0.1, 0.2, 0.3, 0.4};
    raw.rewards = {1, 1, 1};
  } else if (name == "cycle5") {
    raw.n = 5;
    raw.matches = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}};
    raw.lambda = {0.165, 0.09, 0.325, 0.33, 0.09};
    raw.rewards = {1.75, 2, 1.3, 1.4, 0.85};
  } else {
    throw UnknownBuiltinError("unknown builtin instance: " + name);
  }
  return raw;
}

inline MatchingNetwork builtin_instance(const std::string& name) {
  return make_network(builtin_description(name));
}

inline std::vector<std::string> builtin_names() {
  return {"path6-fig5", "path5-fig10", "path4", "cycle5"};
}

}  // namespace dynmatch
