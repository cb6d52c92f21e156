#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dynmatch/builtins.hpp"
#include "dynmatch/errors.hpp"
#include "dynmatch/instance_io.hpp"
#include "dynmatch/network.hpp"
#include "dynmatch/planner.hpp"
#include "dynmatch/policies.hpp"

namespace dynmatch {

/// Experiment configuration. JSON is the on-disk format; CLI flags override
/// file fields, which override these defaults.
struct ExperimentConfig {
  std::string mode = "regret";  // validate | spp | simulate | regret | sweep | verify
  std::string instance;         // "builtin:<name>" or a file path (when inline empty)
  std::optional<nlohmann::json> inline_instance;
  std::vector<std::string> policies = {"tp", "ttp", "lq", "pm"};
  long long horizon = 10000;
  std::vector<long long> checkpoints;  // empty = geometric grid
  long long replications = 1000;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  std::string out;  // empty = stdout

  struct Sweep {
    std::string parameter = "epsilon_scale";
    std::vector<double> values;
    friend bool operator==(const Sweep&, const Sweep&) = default;
  } sweep;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.mode == b.mode && a.instance == b.instance &&
           a.inline_instance == b.inline_instance && a.policies == b.policies &&
           a.horizon == b.horizon && a.checkpoints == b.checkpoints &&
           a.replications == b.replications && a.seed == b.seed && a.threads == b.threads &&
           a.out == b.out && a.sweep == b.sweep;
  }
};

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("mode")) cfg.mode = j.at("mode").get<std::string>();
    if (j.contains("instance")) {
      if (j.at("instance").is_string()) {
        cfg.instance = j.at("instance").get<std::string>();
      } else {
        cfg.inline_instance = j.at("instance");
      }
    }
    if (j.contains("policies")) cfg.policies = j.at("policies").get<std::vector<std::string>>();
    if (j.contains("horizon")) cfg.horizon = j.at("horizon").get<long long>();
    if (j.contains("checkpoints")) {
      cfg.checkpoints = j.at("checkpoints").get<std::vector<long long>>();
    }
    if (j.contains("replications")) cfg.replications = j.at("replications").get<long long>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("sweep")) {
      cfg.sweep.parameter = j.at("sweep").value("parameter", std::string("epsilon_scale"));
      if (j.at("sweep").contains("values")) {
        cfg.sweep.values = j.at("sweep").at("values").get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["mode"] = cfg.mode;
  if (cfg.inline_instance) {
    j["instance"] = *cfg.inline_instance;
  } else {
    j["instance"] = cfg.instance;
  }
  j["policies"] = cfg.policies;
  j["horizon"] = cfg.horizon;
  if (!cfg.checkpoints.empty()) j["checkpoints"] = cfg.checkpoints;
  j["replications"] = cfg.replications;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["out"] = cfg.out;
  j["sweep"] = {{"parameter", cfg.sweep.parameter}, {"values", cfg.sweep.values}};
  return j;
}

/// Resolves "builtin:<name>", a file path, or an inline JSON object into a
/// raw (unvalidated) description.
inline NetworkDescription resolve_instance(const ExperimentConfig& cfg) {
  if (cfg.inline_instance) {
    return description_from_json(*cfg.inline_instance);
  }
  if (cfg.instance.rfind("builtin:", 0) == 0) {
    return builtin_description(cfg.instance.substr(8));
  }
  if (cfg.instance.empty()) {
    throw ConfigError("no instance given (expected builtin:<name>, a path, or an object)");
  }
  return load_instance_file(cfg.instance);
}

/// Policy factory by name string: pm | tp | ttp | lq | adversarial |
/// static:<json map type -> ordered match list>.
inline std::unique_ptr<Policy> make_policy(const std::string& spec, const MatchingNetwork& net,
                                           const SppSolution& spp,
                                           std::shared_ptr<const BasisResolver> resolver,
                                           const RootedTree* tree) {
  if (spec == "pm") {
    return std::make_unique<PmPolicy>(net, spp, std::move(resolver));
  }
  if (spec == "tp" || spec == "ttp") {
    if (tree == nullptr) {
      throw NotAcyclicError(spec + " requires an acyclic reduced network");
    }
    if (spec == "tp") return std::make_unique<TpPolicy>(net, spp, *tree);
    return std::make_unique<TtpPolicy>(net, spp, *tree);
  }
  if (spec == "lq") {
    return std::make_unique<LqPolicy>(net, spp);
  }
  if (spec == "adversarial") {
    return std::make_unique<AdversarialPolicy>(net);
  }
  if (spec.rfind("static:", 0) == 0) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(spec.substr(7));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad static policy spec: ") + e.what());
    }
    PriorityOrders orders;
    orders.order.resize(net.num_types());
    for (auto it = j.begin(); it != j.end(); ++it) {
      int type = std::stoi(it.key());
      if (type < 0 || type >= net.num_types()) {
        throw ConfigError("static policy spec references unknown type " + it.key());
      }
      orders.order[type] = it.value().get<std::vector<int>>();
    }
    return std::make_unique<StaticPriorityPolicy>(net, spp, orders, spec);
  }
  throw ConfigError("unknown policy: " + spec +
                    " (expected pm|tp|ttp|lq|adversarial|static:<json>)");
}

/// Scales the instance toward degeneracy. The dial runs along the line
/// through lambda and the uniform distribution (which preserves the total
/// mass) to the nearest point where a basic variable of the fixed optimal
/// basis hits zero; scale = 1 is the instance itself, scale -> 0 approaches
/// that boundary, and the recomputed gap shrinks linearly in scale. The
/// basis stays optimal along the whole segment since reduced costs do not
/// depend on lambda.
inline NetworkDescription epsilon_scaled_description(const MatchingNetwork& net,
                                                     const SppSolution& spp, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) {
    throw ConfigError("epsilon_scale values must lie in (0, 1]");
  }
  const int n = net.num_types();
  Eigen::VectorXd lambda(n), direction(n);
  for (int i = 0; i < n; ++i) {
    lambda(i) = net.lambda()[i];
    direction(i) = 1.0 / n - lambda(i);
  }
  if (direction.cwiseAbs().maxCoeff() < 1e-13) {
    throw ConfigError("lambda is uniform; no sweep direction toward degeneracy");
  }

  Eigen::MatrixXd B = detail::basis_matrix(net, spp.basis);
  Eigen::VectorXd x_star = B.partialPivLu().solve(lambda);
  Eigen::VectorXd x_dir = B.partialPivLu().solve(direction);

  // Roots of (basic entry = 0) along lambda + s * direction, both sides of
  // s = 0, nearest first. A root only qualifies if the market stays thick at
  // its boundary: driving some lambda_i toward zero degenerates the instance
  // by thinning a type instead of tightening a gap, and the regret dial
  // breaks there.
  std::vector<double> roots;
  for (int i = 0; i < n; ++i) {
    if (std::abs(x_dir(i)) < 1e-13) continue;
    double root = -x_star(i) / x_dir(i);
    if (std::abs(root) > 1e-12) roots.push_back(root);
  }
  std::sort(roots.begin(), roots.end(),
            [](double a, double b) { return std::abs(a) < std::abs(b); });
  const double floor = 0.1 * lambda.minCoeff();
  double best = 0.0;
  bool found = false;
  for (double root : roots) {
    double min_lambda = 1.0;
    for (int i = 0; i < n; ++i) {
      min_lambda = std::min(min_lambda, lambda(i) + root * direction(i));
    }
    if (min_lambda >= floor) {
      best = root;
      found = true;
      break;
    }
  }
  if (!found) {
    throw ConfigError(
        "no degenerate boundary along the uniform direction keeps the market thick");
  }

  NetworkDescription raw;
  raw.n = n;
  raw.matches = net.matches();
  raw.rewards = net.rewards();
  raw.lambda.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    raw.lambda[i] = lambda(i) + (1.0 - scale) * best * direction(i);
    if (!(raw.lambda[i] > 0.0)) {
      throw ConfigError("epsilon sweep drove a lambda entry non-positive");
    }
    total += raw.lambda[i];
  }
  for (auto& v : raw.lambda) v /= total;
  return raw;
}

}  // namespace dynmatch
