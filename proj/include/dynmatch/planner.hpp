#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "dynmatch/errors.hpp"
#include "dynmatch/network.hpp"
#include "dynmatch/simplex.hpp"

namespace dynmatch {

constexpr double kGpgTol = 1e-9;
constexpr double kFeasTol = 1e-9;
constexpr double kConditionLimit = 1e12;

/// Identifier of a basic variable of SPP(lambda): either a match rate z_m or
/// a type slack s_i.
struct BasicVariable {
  enum class Kind { Match, Slack };
  Kind kind;
  int index;

  std::string name() const {
    return (kind == Kind::Match ? "z[" : "s[") + std::to_string(index) + "]";
  }
  friend bool operator==(const BasicVariable& a, const BasicVariable& b) {
    return a.kind == b.kind && a.index == b.index;
  }
};

/// Diagnostic for a degenerate optimum: the general position gap condition
/// fails because this basic variable is (numerically) zero.
struct GpgViolation {
  BasicVariable variable;
  double value;

  std::string message() const {
    std::ostringstream out;
    out << "GPG violation: basic variable " << variable.name() << " = " << value
        << " at the optimum; the general position gap is zero";
    return out.str();
  }
};

/// Non-degenerate basic optimal solution of the static planning problem
/// max r^T z s.t. M z + s = lambda, z, s >= 0.
struct SppSolution {
  std::vector<double> z_star;
  std::vector<double> s_star;
  std::vector<BasicVariable> basis;  // row-ordered, defines the basis matrix
  double epsilon = 0.0;              // min basic variable
  double objective = 0.0;

  std::vector<int> active_matches;     // M+, ascending
  std::vector<int> redundant_matches;  // M0, ascending
  std::vector<int> under_demanded;     // A+, ascending
  std::vector<int> over_demanded;      // A0, ascending

  // epsilon_i per type; populated only when the reduced network (A, M+) is
  // connected and acyclic (z*_{m(i,P(i))} off the root, s*_root at the root).
  std::vector<double> epsilon_i;
  bool has_epsilon_i = false;

  int simplex_pivots = 0;

  bool is_under_demanded(int i) const {
    return std::binary_search(under_demanded.begin(), under_demanded.end(), i);
  }
  bool is_active(int m) const {
    return std::binary_search(active_matches.begin(), active_matches.end(), m);
  }
};

struct SppResult {
  std::optional<SppSolution> solution;
  std::optional<GpgViolation> gpg_violation;
};

namespace detail {

inline Eigen::MatrixXd basis_matrix(const MatchingNetwork& net,
                                    const std::vector<BasicVariable>& basis) {
  const int n = net.num_types();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (int col = 0; col < n; ++col) {
    const auto& v = basis[col];
    if (v.kind == BasicVariable::Kind::Match) {
      auto [a, b] = net.matches()[v.index];
      B(a, col) = 1.0;
      B(b, col) = 1.0;
    } else {
      B(v.index, col) = 1.0;
    }
  }
  return B;
}

inline double condition_estimate(const Eigen::MatrixXd& B) {
  Eigen::MatrixXd inv = B.partialPivLu().inverse();
  double norm_b = B.cwiseAbs().colwise().sum().maxCoeff();
  double norm_inv = inv.cwiseAbs().colwise().sum().maxCoeff();
  return norm_b * norm_inv;
}

}  // namespace detail

/// Solves SPP(lambda) by primal simplex with Bland's rule from the all-slack
/// basis. Returns the basic optimal solution, or a GpgViolation diagnostic
/// when the optimum is degenerate.
inline SppResult solve_spp(const MatchingNetwork& net) {
  const int n = net.num_types();
  const int k = net.num_matches();

  std::vector<std::vector<double>> A(n, std::vector<double>(k, 0.0));
  for (int m = 0; m < k; ++m) {
    auto [a, b] = net.matches()[m];
    A[a][m] = 1.0;
    A[b][m] = 1.0;
  }
  lp::Result res = lp::solve(A, net.lambda(), net.rewards());
  if (res.status != lp::Status::Optimal) {
    throw NumericalInstabilityError("SPP relaxation reported unbounded");
  }

  SppSolution sol;
  sol.z_star = res.x;
  sol.s_star = res.slack;
  sol.objective = res.objective;
  sol.simplex_pivots = res.pivots;
  for (int col : res.basis) {
    sol.basis.push_back(col < k ? BasicVariable{BasicVariable::Kind::Match, col}
                                : BasicVariable{BasicVariable::Kind::Slack, col - k});
  }

  // Feasibility residual: M z + s must reproduce lambda row by row.
  for (int i = 0; i < n; ++i) {
    double row = sol.s_star[i];
    for (int m : net.incident(i)) row += sol.z_star[m];
    if (std::abs(row - net.lambda()[i]) > kFeasTol) {
      throw NumericalInstabilityError("SPP solution violates feasibility at type " +
                                      std::to_string(i));
    }
  }

  double cond = detail::condition_estimate(detail::basis_matrix(net, sol.basis));
  if (cond > kConditionLimit) {
    throw NumericalInstabilityError("basis matrix condition estimate " +
                                    std::to_string(cond) + " exceeds limit");
  }

  // Non-degeneracy gate: every basic variable must be strictly positive.
  SppResult out;
  double eps = 1.0;
  for (const auto& v : sol.basis) {
    double value = v.kind == BasicVariable::Kind::Match ? sol.z_star[v.index]
                                                        : sol.s_star[v.index];
    if (value <= kGpgTol) {
      out.gpg_violation = GpgViolation{v, value};
      return out;
    }
    eps = std::min(eps, value);
  }
  sol.epsilon = eps;

  for (int m = 0; m < k; ++m) {
    (sol.z_star[m] > kGpgTol ? sol.active_matches : sol.redundant_matches).push_back(m);
  }
  for (int i = 0; i < n; ++i) {
    (sol.s_star[i] > kGpgTol ? sol.under_demanded : sol.over_demanded).push_back(i);
  }

  // Per-type epsilon_i, defined through the parent edge on acyclic reduced
  // networks (left unset otherwise).
  if (static_cast<int>(sol.active_matches.size()) == n - 1 &&
      sol.under_demanded.size() == 1) {
    std::vector<std::pair<int, int>> active_edges;
    for (int m : sol.active_matches) active_edges.push_back(net.matches()[m]);
    try {
      RootedTree tree = root_tree_from_edges(n, active_edges, sol.under_demanded[0]);
      sol.epsilon_i.assign(n, 0.0);
      sol.epsilon_i[tree.root] = sol.s_star[tree.root];
      for (int i = 0; i < n; ++i) {
        if (i == tree.root) continue;
        sol.epsilon_i[i] = sol.z_star[net.match_index(i, tree.parent[i])];
      }
      sol.has_epsilon_i = true;
    } catch (const NotAcyclicError&) {
      // reduced network is not a tree; epsilon_i stays unset
    }
  }

  out.solution = std::move(sol);
  return out;
}

/// Rooted tree over the active matches M+. Requires the reduced network to
/// be a (connected) tree with a unique under-demanded node.
inline RootedTree reduced_tree(const MatchingNetwork& net, const SppSolution& spp) {
  if (static_cast<int>(spp.active_matches.size()) != net.num_types() - 1 ||
      spp.under_demanded.size() != 1) {
    throw NotAcyclicError(
        "reduced network (A, M+) is not a tree with a unique under-demanded node");
  }
  std::vector<std::pair<int, int>> edges;
  for (int m : spp.active_matches) edges.push_back(net.matches()[m]);
  return root_tree_from_edges(net.num_types(), edges, spp.under_demanded[0]);
}

/// Alternating-sum characterization of epsilon_i over subtrees:
/// eps_i = sum_{j in T(i)} (-1)^{d(i,j)} lambda_j. Independent of the
/// simplex; serves as a cross-check of the basic solution. The tree is the
/// (possibly reduced) network's rooted tree, so redundant off-tree edges of
/// a cyclic input never enter the sums.
inline std::vector<double> tree_epsilons(const MatchingNetwork& net, const RootedTree& tree) {
  const int n = net.num_types();
  std::vector<double> eps(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j : tree.subtree[i]) {
      int d = tree.depth[j] - tree.depth[i];
      sum += (d % 2 == 0 ? 1.0 : -1.0) * net.lambda()[j];
    }
    eps[i] = sum;
  }
  return eps;
}

/// Perturbed basic solution (z~, s~) sharing the basic activities of
/// (z*, s*).
struct PerturbedSolution {
  std::vector<double> z;
  std::vector<double> s;
};

/// Fixed-basis re-solver for the availability perturbations used by the
/// probabilistic matching policy: lambda~ = lambda + (eps/n) on every
/// non-empty queue. Results are memoized per availability pattern; the
/// cache is a pure optimization (identical inputs yield identical outputs)
/// and is safe under concurrent lookup.
class BasisResolver {
 public:
  BasisResolver(const MatchingNetwork& net, const SppSolution& spp)
      : net_(&net), basis_(spp.basis), epsilon_(spp.epsilon) {
    const int n = net.num_types();
    if (n > 64) {
      throw Error("availability patterns are limited to 64 types");
    }
    lu_ = detail::basis_matrix(net, basis_).partialPivLu();
  }

  /// availability is the bitmask of non-empty queues U+ (bit i set when
  /// queue i is non-empty at the start of the period).
  const PerturbedSolution& resolve(std::uint64_t availability) const {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(availability);
      if (it != cache_.end()) return it->second;
    }
    PerturbedSolution fresh = compute(availability);
    std::lock_guard<std::mutex> lock(mutex_);
    // unordered_map references are stable across rehashing
    return cache_.emplace(availability, std::move(fresh)).first->second;
  }

  double epsilon() const { return epsilon_; }

 private:
  PerturbedSolution compute(std::uint64_t availability) const {
    const int n = net_->num_types();
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      rhs(i) = net_->lambda()[i] +
               (((availability >> i) & 1ull) ? epsilon_ / n : 0.0);
    }
    Eigen::VectorXd x = lu_.solve(rhs);

    PerturbedSolution out;
    out.z.assign(net_->num_matches(), 0.0);
    out.s.assign(n, 0.0);
    for (int col = 0; col < n; ++col) {
      if (x(col) <= 0.0) {
        throw BasisInfeasibleError("fixed-basis re-solve produced non-positive " +
                                   basis_[col].name() + " for availability pattern " +
                                   std::to_string(availability));
      }
      if (basis_[col].kind == BasicVariable::Kind::Match) {
        out.z[basis_[col].index] = x(col);
      } else {
        out.s[basis_[col].index] = x(col);
      }
    }
    return out;
  }

  const MatchingNetwork* net_;
  std::vector<BasicVariable> basis_;
  double epsilon_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, PerturbedSolution> cache_;
};

}  // namespace dynmatch
