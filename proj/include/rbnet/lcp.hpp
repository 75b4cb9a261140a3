#pragma once

// Linear complementarity: given an M-matrix R and q, find l >= 0 with
// w = q + R l >= 0 and l^T w = 0. Projected Gauss-Seidel; converges for
// M-matrices and the active sets here are tiny.

#include <Eigen/Dense>

#include "rbnet/errors.hpp"

namespace rbnet {

inline constexpr double kLcpTol = 1e-12;
inline constexpr int kLcpMaxIter = 100000;

inline Eigen::VectorXd lcp_pgs(const Eigen::MatrixXd& R, const Eigen::VectorXd& q,
                               double tol = kLcpTol, int max_iter = kLcpMaxIter) {
  const int n = static_cast<int>(q.size());
  Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < max_iter; ++it) {
    double delta = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = q[i];
      for (int j = 0; j < n; ++j) {
        if (j != i) s += R(i, j) * l[j];
      }
      const double li = std::max(0.0, -s / R(i, i));
      delta = std::max(delta, std::fabs(li - l[i]));
      l[i] = li;
    }
    if (delta <= tol) {
      return l;
    }
  }
  throw Error(Errc::NonConvergentLCP, "projected Gauss-Seidel hit iteration cap");
}

// LCP restricted to an index set: l is zero off the set.
inline Eigen::VectorXd lcp_pgs_subset(const Eigen::MatrixXd& R, const Eigen::VectorXd& q,
                                      const std::vector<int>& active, double tol = kLcpTol) {
  const int m = static_cast<int>(active.size());
  Eigen::VectorXd l = Eigen::VectorXd::Zero(q.size());
  if (m == 0) return l;
  Eigen::MatrixXd Rs(m, m);
  Eigen::VectorXd qs(m);
  for (int a = 0; a < m; ++a) {
    qs[a] = q[active[a]];
    for (int b = 0; b < m; ++b) Rs(a, b) = R(active[a], active[b]);
  }
  const Eigen::VectorXd ls = lcp_pgs(Rs, qs, tol);
  for (int a = 0; a < m; ++a) l[active[a]] = ls[a];
  return l;
}

}  // namespace rbnet
