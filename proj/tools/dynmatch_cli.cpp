// dynmatch command-line driver: instance validation, static planning,
// simulation, regret benchmarking, epsilon sweeps and the verification
// suite. Configuration precedence: flags > --config file > defaults.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynmatch/analytics.hpp"
#include "dynmatch/builtins.hpp"
#include "dynmatch/config.hpp"
#include "dynmatch/engine.hpp"
#include "dynmatch/instance_io.hpp"
#include "dynmatch/network.hpp"
#include "dynmatch/planner.hpp"
#include "dynmatch/policies.hpp"
#include "dynmatch/verify.hpp"

namespace {

using namespace dynmatch;
using nlohmann::json;

struct GpgExit {
  GpgViolation violation;
};

struct VerifyFailureExit {};

struct InstanceContext {
  MatchingNetwork net;
  SppSolution spp;
  std::shared_ptr<BasisResolver> resolver;
  std::optional<RootedTree> tree;
};

InstanceContext load_context(const NetworkDescription& raw) {
  Validated v = validate(raw);
  if (!v.network) {
    throw ConfigError("invalid instance:\n" + v.report.summary());
  }
  SppResult res = solve_spp(*v.network);
  if (!res.solution) {
    throw GpgExit{*res.gpg_violation};
  }
  InstanceContext ctx{*std::move(v.network), *std::move(res.solution), nullptr, std::nullopt};
  ctx.resolver = std::make_shared<BasisResolver>(ctx.net, ctx.spp);
  if (ctx.spp.has_epsilon_i) {
    ctx.tree = reduced_tree(ctx.net, ctx.spp);
  }
  return ctx;
}

// Output sink: file when --out is set, stdout otherwise.
struct Sink {
  std::ofstream file;
  bool to_file = false;

  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file.open(path);
      if (!file) throw ConfigError("cannot open output file: " + path);
      to_file = true;
    }
  }
  std::ostream& stream() { return to_file ? file : std::cout; }
};

json spp_to_json(const InstanceContext& ctx) {
  const auto& spp = ctx.spp;
  json j;
  j["z_star"] = spp.z_star;
  j["s_star"] = spp.s_star;
  j["epsilon"] = spp.epsilon;
  j["objective"] = spp.objective;
  j["active_matches"] = spp.active_matches;
  j["redundant_matches"] = spp.redundant_matches;
  j["under_demanded"] = spp.under_demanded;
  j["over_demanded"] = spp.over_demanded;
  j["basis"] = json::array();
  for (const auto& v : spp.basis) {
    j["basis"].push_back({{"kind", v.kind == BasicVariable::Kind::Match ? "match" : "slack"},
                          {"index", v.index}});
  }
  if (spp.has_epsilon_i) j["epsilon_i"] = spp.epsilon_i;
  j["metadata"] = {{"simplex_pivots", spp.simplex_pivots},
                   {"pivot_rule", "bland-from-all-slack"}};
  return j;
}

std::vector<std::unique_ptr<Policy>> build_policies(const ExperimentConfig& cfg,
                                                    const InstanceContext& ctx) {
  std::vector<std::unique_ptr<Policy>> out;
  for (const auto& name : cfg.policies) {
    out.push_back(make_policy(name, ctx.net, ctx.spp, ctx.resolver,
                              ctx.tree ? &*ctx.tree : nullptr));
  }
  if (out.empty()) throw ConfigError("no policies selected");
  return out;
}

int run_validate(const ExperimentConfig& cfg) {
  NetworkDescription raw = resolve_instance(cfg);
  Validated v = validate(raw);
  json j;
  j["valid"] = v.report.ok();
  j["acyclic"] = v.report.acyclic;
  j["bipartite"] = v.report.bipartite;
  j["errors"] = json::array();
  for (const auto& e : v.report.errors) {
    j["errors"].push_back({{"code", to_string(e.code)}, {"detail", e.detail}});
  }
  Sink sink(cfg.out);
  sink.stream() << j.dump(2) << "\n";
  return v.report.ok() ? 0 : 1;
}

int run_spp(const ExperimentConfig& cfg) {
  InstanceContext ctx = load_context(resolve_instance(cfg));
  Sink sink(cfg.out);
  sink.stream() << spp_to_json(ctx).dump(2) << "\n";
  if (sink.to_file) {
    std::cout << "spp: epsilon = " << ctx.spp.epsilon << ", |M+| = "
              << ctx.spp.active_matches.size() << ", A+ size = "
              << ctx.spp.under_demanded.size() << "\n";
  }
  return 0;
}

int run_simulate(const ExperimentConfig& cfg) {
  if (cfg.policies.size() != 1) {
    throw ConfigError("simulate expects exactly one policy (got " +
                      std::to_string(cfg.policies.size()) + "); run regret to compare");
  }
  InstanceContext ctx = load_context(resolve_instance(cfg));
  auto policies = build_policies(cfg, ctx);

  Sink sink(cfg.out);
  for (long long rep = 0; rep < cfg.replications; ++rep) {
    ArrivalStream stream(ctx.net.lambda(), cfg.seed, static_cast<std::uint64_t>(rep));
    std::mt19937_64 rng = make_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull,
                                   static_cast<std::uint64_t>(rep) * 64);
    RunConfig rc;
    rc.horizon = cfg.horizon;
    rc.checkpoints = cfg.checkpoints;
    auto traj = run(ctx.net, *policies[0], stream, rc, rng);
    write_trajectory_csv(sink.stream(), rep, traj, rep == 0);
  }
  if (sink.to_file) {
    std::cout << "simulate: " << cfg.replications << " replication(s) of "
              << cfg.policies[0] << " over T = " << cfg.horizon << " -> " << cfg.out << "\n";
  }
  return 0;
}

int run_regret(const ExperimentConfig& cfg) {
  InstanceContext ctx = load_context(resolve_instance(cfg));
  auto policies = build_policies(cfg, ctx);
  std::vector<const Policy*> protos;
  for (const auto& p : policies) protos.push_back(p.get());

  RegretReport report = regret_experiment(ctx.net, ctx.spp, protos, cfg.horizon,
                                          cfg.checkpoints, cfg.replications, cfg.seed,
                                          cfg.threads);
  Sink sink(cfg.out);
  write_regret_csv(sink.stream(), report);
  if (sink.to_file) {
    // Reporting aid: a policy that keeps the over-demanded queues below B
    // has all-time regret at most r_max * n * B; print the implied
    // certificate next to the measured sup.
    double r_max = 0.0;
    for (int m : ctx.spp.active_matches) {
      r_max = std::max(r_max, ctx.net.rewards()[m]);
    }
    for (const auto& c : report.curves) {
      double peak_queue = 0.0;
      for (double q : c.mean_total_queue) peak_queue = std::max(peak_queue, q);
      std::cout << "regret: " << c.policy << " sup = " << c.sup_regret << " at t = "
                << report.checkpoints[c.sup_index]
                << " (queue-bound certificate r_max*n*B = "
                << r_max * ctx.net.num_types() * peak_queue << ")\n";
    }
  }
  return 0;
}

int run_sweep(const ExperimentConfig& cfg) {
  if (cfg.sweep.values.empty()) {
    throw ConfigError("sweep requires sweep.values (or --values)");
  }
  if (cfg.sweep.parameter != "epsilon_scale") {
    throw ConfigError("unknown sweep parameter: " + cfg.sweep.parameter);
  }
  InstanceContext base = load_context(resolve_instance(cfg));

  Sink sink(cfg.out);
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  sink.stream() << "epsilon_scale,epsilon,policy,t,mean_regret,ci_half,mean_total_queue,"
                   "sup_regret_flag\n";
  for (double value : cfg.sweep.values) {
    InstanceContext ctx = load_context(epsilon_scaled_description(base.net, base.spp, value));
    auto policies = build_policies(cfg, ctx);
    std::vector<const Policy*> protos;
    for (const auto& p : policies) protos.push_back(p.get());
    RegretReport report = regret_experiment(ctx.net, ctx.spp, protos, cfg.horizon,
                                            cfg.checkpoints, cfg.replications, cfg.seed,
                                            cfg.threads);
    for (const auto& c : report.curves) {
      for (std::size_t i = 0; i < report.checkpoints.size(); ++i) {
        sink.stream() << fmt(value) << ',' << fmt(ctx.spp.epsilon) << ',' << c.policy << ','
                      << report.checkpoints[i] << ',' << fmt(c.mean_regret[i]) << ','
                      << fmt(c.ci_half[i]) << ',' << fmt(c.mean_total_queue[i]) << ','
                      << (i == c.sup_index ? 1 : 0) << '\n';
      }
      if (sink.to_file) {
        std::cout << "sweep " << fmt(value) << " (eps = " << fmt(ctx.spp.epsilon) << "): "
                  << c.policy << " sup regret = " << c.sup_regret << "\n";
      }
    }
  }
  return 0;
}

int run_verify(const ExperimentConfig& cfg) {
  InstanceContext ctx = load_context(resolve_instance(cfg));
  auto results = verify::run_suite(ctx.net, ctx.spp, cfg.seed);

  json j;
  j["instance"] = cfg.instance.empty() ? std::string("<inline>") : cfg.instance;
  j["seed"] = cfg.seed;
  j["checks"] = json::array();
  bool all_pass = true;
  for (const auto& r : results) {
    j["checks"].push_back(
        {{"name", r.name}, {"pass", r.pass}, {"worst", r.worst}, {"detail", r.detail}});
    all_pass = all_pass && r.pass;
  }
  j["all_pass"] = all_pass;

  Sink sink(cfg.out);
  sink.stream() << j.dump(2) << "\n";
  if (sink.to_file) {
    for (const auto& r : results) {
      std::cout << (r.pass ? "pass" : "FAIL") << "  " << r.name << "\n";
    }
  }
  if (!all_pass) throw VerifyFailureExit{};
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynmatch: two-way dynamic matching simulator and verifier"};
  app.require_subcommand(0, 1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override its fields)");

  // Shared option storage; only applied when the flag was actually given.
  std::string instance, out, policies_csv, checkpoints_csv, values_csv;
  long long horizon = 0, replications = 0;
  std::uint64_t seed = 0;
  int threads = 0;

  std::vector<CLI::App*> subs;
  for (const char* name : {"validate", "spp", "simulate", "regret", "sweep", "verify"}) {
    CLI::App* sub = app.add_subcommand(name, "");
    sub->add_option("instance", instance, "builtin:<name> or instance file");
    sub->add_option("--out", out, "output path (default stdout)");
    sub->add_option("--policies", policies_csv, "comma-separated policy names");
    sub->add_option("--T,--horizon", horizon, "time horizon");
    sub->add_option("--reps", replications, "replication count");
    sub->add_option("--seed", seed, "base seed");
    sub->add_option("--threads", threads, "worker threads (0 = hardware)");
    sub->add_option("--checkpoints", checkpoints_csv,
                    "comma-separated times or 'geometric'");
    sub->add_option("--values", values_csv, "comma-separated sweep values");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw dynmatch::ConfigError("cannot open config file: " + config_path);
      nlohmann::json j;
      in >> j;
      cfg = dynmatch::config_from_json(j);
    }

    CLI::App* active = nullptr;
    for (CLI::App* sub : subs) {
      if (sub->parsed()) active = sub;
    }
    if (active != nullptr) cfg.mode = active->get_name();
    if (cfg.mode.empty()) throw dynmatch::ConfigError("no mode given");

    auto given = [&](const char* flag) {
      return active != nullptr && active->count(flag) > 0;
    };
    if (given("instance")) cfg.instance = instance;
    if (given("--out")) cfg.out = out;
    if (given("--T")) cfg.horizon = horizon;
    if (given("--reps")) cfg.replications = replications;
    if (given("--seed")) cfg.seed = seed;
    if (given("--threads")) cfg.threads = threads;
    if (given("--policies")) {
      cfg.policies.clear();
      std::stringstream ss(policies_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) cfg.policies.push_back(tok);
      }
    }
    if (given("--checkpoints")) {
      cfg.checkpoints.clear();
      if (checkpoints_csv != "geometric") {
        std::stringstream ss(checkpoints_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          if (!tok.empty()) cfg.checkpoints.push_back(std::stoll(tok));
        }
      }
    }
    if (given("--values")) {
      cfg.sweep.values.clear();
      std::stringstream ss(values_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) cfg.sweep.values.push_back(std::stod(tok));
      }
    }

    if (cfg.mode == "validate") return run_validate(cfg);
    if (cfg.mode == "spp") return run_spp(cfg);
    if (cfg.mode == "simulate") return run_simulate(cfg);
    if (cfg.mode == "regret") return run_regret(cfg);
    if (cfg.mode == "sweep") return run_sweep(cfg);
    if (cfg.mode == "verify") return run_verify(cfg);
    throw dynmatch::ConfigError("unknown mode: " + cfg.mode);
  } catch (const GpgExit& e) {
    std::cerr << e.violation.message() << "\n";
    return 2;
  } catch (const VerifyFailureExit&) {
    std::cerr << "verification failed\n";
    return 3;
  } catch (const dynmatch::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
