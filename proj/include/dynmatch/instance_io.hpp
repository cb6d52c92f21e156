#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "dynmatch/errors.hpp"
#include "dynmatch/network.hpp"

namespace dynmatch {

// Instance file schema (field names fixed):
//   {"n": int, "matches": [[i, j], ...], "lambda": [float, ...],
//    "rewards": [float, ...]}
// Type indices are 0-based.

inline NetworkDescription description_from_json(const nlohmann::json& j) {
  NetworkDescription raw;
  try {
    raw.n = j.at("n").get<int>();
    for (const auto& e : j.at("matches")) {
      raw.matches.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    raw.lambda = j.at("lambda").get<std::vector<double>>();
    raw.rewards = j.at("rewards").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad instance object: ") + e.what());
  }
  return raw;
}

inline nlohmann::json description_to_json(const NetworkDescription& raw) {
  nlohmann::json j;
  j["n"] = raw.n;
  j["matches"] = nlohmann::json::array();
  for (auto [a, b] : raw.matches) j["matches"].push_back({a, b});
  j["lambda"] = raw.lambda;
  j["rewards"] = raw.rewards;
  return j;
}

inline NetworkDescription load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open instance file: " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return description_from_json(j);
}

}  // namespace dynmatch
