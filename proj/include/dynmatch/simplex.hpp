#pragma once

#include <cstddef>
#include <vector>

#include "dynmatch/errors.hpp"

namespace dynmatch::lp {

// Primal simplex on the standard form
//
//   max c^T x   s.t.  A x + s = b,  x >= 0,  s >= 0,
//
// with b >= 0 entrywise, started from the all-slack basis. Pivoting uses
// Bland's rule (smallest-index entering column; leaving row breaks ratio
// ties by smallest basic column id), so the method cannot cycle and the
// returned basis is a deterministic function of the input.
//
// Column ids: 0..k-1 are structural variables, k..k+m-1 are slacks.

enum class Status { Optimal, Unbounded };

struct Result {
  Status status = Status::Optimal;
  double objective = 0.0;
  std::vector<double> x;      // structural values, size k
  std::vector<double> slack;  // slack values, size m
  std::vector<int> basis;     // basic column ids, one per row
  int pivots = 0;
};

inline Result solve(const std::vector<std::vector<double>>& A,
                    const std::vector<double>& b, const std::vector<double>& c,
                    int max_pivots = 100000) {
  constexpr double kTol = 1e-9;
  const int m = static_cast<int>(A.size());
  const int k = static_cast<int>(c.size());
  const int cols = k + m;

  std::vector<std::vector<double>> tab(m, std::vector<double>(cols + 1, 0.0));
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < k; ++j) tab[r][j] = A[r][j];
    tab[r][k + r] = 1.0;
    tab[r][cols] = b[r];
  }
  std::vector<double> red(cols, 0.0);  // reduced costs
  for (int j = 0; j < k; ++j) red[j] = c[j];

  Result out;
  out.basis.resize(m);
  for (int r = 0; r < m; ++r) out.basis[r] = k + r;

  while (true) {
    int enter = -1;
    for (int j = 0; j < cols; ++j) {
      if (red[j] > kTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;  // optimal

    int leave = -1;
    double best_ratio = 0.0;
    for (int r = 0; r < m; ++r) {
      if (tab[r][enter] > kTol) {
        double ratio = tab[r][cols] / tab[r][enter];
        if (leave < 0 || ratio < best_ratio - kTol ||
            (ratio < best_ratio + kTol && out.basis[r] < out.basis[leave])) {
          leave = r;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) {
      out.status = Status::Unbounded;
      return out;
    }

    double piv = tab[leave][enter];
    for (int j = 0; j <= cols; ++j) tab[leave][j] /= piv;
    for (int r = 0; r < m; ++r) {
      if (r == leave) continue;
      double f = tab[r][enter];
      if (f == 0.0) continue;
      for (int j = 0; j <= cols; ++j) tab[r][j] -= f * tab[leave][j];
    }
    double fr = red[enter];
    for (int j = 0; j < cols; ++j) red[j] -= fr * tab[leave][j];
    out.basis[leave] = enter;

    if (++out.pivots > max_pivots) {
      throw NumericalInstabilityError("simplex exceeded pivot limit");
    }
  }

  out.x.assign(k, 0.0);
  out.slack.assign(m, 0.0);
  for (int r = 0; r < m; ++r) {
    double v = tab[r][cols];
    if (out.basis[r] < k) {
      out.x[out.basis[r]] = v;
    } else {
      out.slack[out.basis[r] - k] = v;
    }
  }
  out.objective = 0.0;
  for (int j = 0; j < k; ++j) out.objective += c[j] * out.x[j];
  return out;
}

}  // namespace dynmatch::lp
