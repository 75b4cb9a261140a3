#pragma once

// Event-driven exact solver for the Skorokhod problem
//     Y(t) = Y(0) + X(t) + R L(t),  Y >= 0,  L nondecreasing from 0,
//     int Y_i dL_i = 0,
// for piecewise-linear RCLL input X and M-matrix reflection R. Between
// breakpoints the pushing rates solve a small LCP on the current zero set;
// a strictly positive component hitting zero inserts an internal event.
// Jumps that would take Y negative are resolved by the instantaneous
// projection y = x + R l, y >= 0, l >= 0, y^T l = 0 (L then jumps).

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <vector>

#include "rbnet/errors.hpp"
#include "rbnet/lcp.hpp"
#include "rbnet/path.hpp"

namespace rbnet {

inline constexpr double kIdentityTol = 1e-10;
inline constexpr double kOrderTol = 1e-12;
inline constexpr double kZeroSnapTol = 1e-12;

struct ActiveRecord {
  double t0 = 0, t1 = 0;
  std::vector<int> zero_set;
  VectorXd push_rate;
};

struct SkorokhodSolution {
  MarkedPath Y;
  MarkedPath L;
  std::vector<ActiveRecord> active_history;
};

// Incremental solver state. Feed jumps and constant-slope stretches in time
// order; the stepper resolves boundary events internally. Recording of the
// output paths is optional so long inputs can be streamed with O(1) memory.
class SkorokhodStepper {
 public:
  SkorokhodStepper(const MatrixXd& R, VectorXd y0, double t0 = 0.0)
      : R_(R), y_(std::move(y0)), l_(VectorXd::Zero(R.rows())), t_(t0) {
    if ((y_.array() < 0).any()) {
      throw Error(Errc::NegativeInitial, "Skorokhod initial condition must be >= 0");
    }
    d_ = static_cast<int>(R_.rows());
    pending_jump_y_ = VectorXd::Zero(d_);
    pending_jump_l_ = VectorXd::Zero(d_);
  }

  void enable_recording(double horizon) {
    sol_.emplace();
    sol_->Y = MarkedPath(d_, horizon, y_);
    sol_->L = MarkedPath(d_, horizon, VectorXd::Zero(d_));
    horizon_ = horizon;
  }

  double time() const { return t_; }
  const VectorXd& y() const { return y_; }
  const VectorXd& l_cum() const { return l_; }

  void jump(const VectorXd& j) {
    VectorXd pre = y_ + j;
    VectorXd lj = VectorXd::Zero(d_);
    if ((pre.array() < -kZeroSnapTol).any()) {
      lj = lcp_pgs(R_, pre);
      pre += R_ * lj;
    }
    for (int i = 0; i < d_; ++i) {
      if (pre[i] < kZeroSnapTol) pre[i] = 0.0;
    }
    pending_jump_y_ += pre - y_;
    pending_jump_l_ += lj;
    y_ = pre;
    l_ += lj;
  }

  void advance(double dt, const VectorXd& v) {
    const double t_end = t_ + dt;
    int guard = 0;
    while (t_ < t_end) {
      if (++guard > kLcpMaxIter) {
        throw Error(Errc::NonConvergentLCP, "event cascade did not settle");
      }
      std::vector<int> zero_set;
      for (int i = 0; i < d_; ++i) {
        if (y_[i] <= kZeroSnapTol) {
          y_[i] = 0.0;
          zero_set.push_back(i);
        }
      }
      const VectorXd push = lcp_pgs_subset(R_, v, zero_set);
      VectorXd slope_y = v + R_ * push;
      for (int i : zero_set) {
        // pushing keeps the component pinned; clear LCP residue
        if (std::fabs(slope_y[i]) < 100 * kLcpTol && push[i] > 0) slope_y[i] = 0.0;
        if (slope_y[i] < 0 && slope_y[i] > -100 * kLcpTol) slope_y[i] = 0.0;
      }
      double t_hit = t_end;
      for (int i = 0; i < d_; ++i) {
        if (y_[i] > 0.0 && slope_y[i] < 0.0) {
          t_hit = std::min(t_hit, t_ + y_[i] / (-slope_y[i]));
        }
      }
      emit(t_, slope_y, push, zero_set);
      const double h = t_hit - t_;
      y_ += slope_y * h;
      l_ += push * h;
      for (int i = 0; i < d_; ++i) {
        if (y_[i] < kZeroSnapTol) y_[i] = 0.0;
      }
      t_ = t_hit;
    }
  }

  SkorokhodSolution take_solution() {
    if (sol_ && !sol_->active_history.empty()) sol_->active_history.back().t1 = horizon_;
    SkorokhodSolution s = std::move(*sol_);
    sol_.reset();
    return s;
  }

 private:
  void emit(double t, const VectorXd& slope_y, const VectorXd& push,
            const std::vector<int>& zero_set) {
    if (!sol_) {
      pending_jump_y_.setZero();
      pending_jump_l_.setZero();
      return;
    }
    if (!sol_->active_history.empty()) sol_->active_history.back().t1 = t;
    const std::size_t nb = sol_->Y.n_breakpoints();
    if (nb == 0 || t > sol_->Y.time(nb - 1)) {
      sol_->Y.append_breakpoint(t, pending_jump_y_, slope_y);
      sol_->L.append_breakpoint(t, pending_jump_l_, push);
      sol_->active_history.push_back({t, t, zero_set, push});
    }
    pending_jump_y_.setZero();
    pending_jump_l_.setZero();
  }

  MatrixXd R_;
  VectorXd y_;
  VectorXd l_;
  double t_;
  int d_;
  double horizon_ = 0;
  VectorXd pending_jump_y_;
  VectorXd pending_jump_l_;
  std::optional<SkorokhodSolution> sol_;
};

inline SkorokhodSolution solve(const MarkedPath& X, const MatrixXd& R, const VectorXd& y0) {
  SkorokhodStepper st(R, y0);
  st.enable_recording(X.horizon());
  const std::size_t n = X.n_breakpoints();
  for (std::size_t i = 0; i < n; ++i) {
    st.jump(X.jump(i));
    const double seg_end = (i + 1 < n) ? X.time(i + 1) : X.horizon();
    st.advance(seg_end - X.time(i), X.slope(i));
  }
  if (n == 0) st.advance(X.horizon(), VectorXd::Zero(X.dim()));
  auto sol = st.take_solution();
  sol.Y.set_horizon(X.horizon());
  sol.L.set_horizon(X.horizon());
  return sol;
}

// Running-minimum state for the orthogonal problem (R = I, y0 = 0):
// Y(t) = Z(t) - min over [0,t] of Z, anchored at the pre-jump initial value.
// Independent of the event-driven solver so the two can cross-check.
class OrthStepper {
 public:
  explicit OrthStepper(VectorXd z0) : z_(std::move(z0)), runmin_(z_) {}

  void jump(const VectorXd& j) {
    z_ += j;
    runmin_ = runmin_.cwiseMin(z_);
  }
  void advance(double dt, const VectorXd& v) {
    z_ += v * dt;
    runmin_ = runmin_.cwiseMin(z_);
  }
  VectorXd y() const { return z_ - runmin_; }
  const VectorXd& z() const { return z_; }
  const VectorXd& runmin() const { return runmin_; }

 private:
  VectorXd z_;
  VectorXd runmin_;
};

inline SkorokhodSolution solve_orthogonal(const MarkedPath& Z) {
  const int d = Z.dim();
  VectorXd z = Z.init();
  VectorXd m = z;
  const VectorXd anchor = Z.init();
  SkorokhodSolution sol;
  sol.Y = MarkedPath(d, Z.horizon(), VectorXd::Zero(d));
  sol.L = MarkedPath(d, Z.horizon(), VectorXd::Zero(d));
  VectorXd y_prev = VectorXd::Zero(d);  // value just before the next discrete change
  VectorXd l_prev = VectorXd::Zero(d);
  double last_t = -1.0;
  auto append = [&](double t, const VectorXd& v) {
    VectorXd sy(d), sl(d);
    for (int i = 0; i < d; ++i) {
      const bool on_min = z[i] <= m[i] + kZeroSnapTol;
      if (on_min && v[i] < 0) {
        sy[i] = 0.0;
        sl[i] = -v[i];
      } else {
        sy[i] = v[i];
        sl[i] = 0.0;
      }
    }
    const VectorXd y_now = z - m;
    const VectorXd l_now = anchor - m;
    if (t > last_t) {
      sol.Y.append_breakpoint(t, y_now - y_prev, sy);
      sol.L.append_breakpoint(t, l_now - l_prev, sl);
      sol.active_history.push_back({t, t, {}, sl});
      last_t = t;
    }
    y_prev = y_now;
    l_prev = l_now;
  };
  const std::size_t n = Z.n_breakpoints();
  for (std::size_t i = 0; i < n; ++i) {
    const double t0 = Z.time(i);
    const double seg_end = (i + 1 < n) ? Z.time(i + 1) : Z.horizon();
    const VectorXd v = Z.slope(i);
    z += Z.jump(i);
    m = m.cwiseMin(z);
    append(t0, v);
    std::vector<double> events;
    for (int c = 0; c < d; ++c) {
      if (v[c] < 0 && z[c] > m[c] + kZeroSnapTol) {
        const double tc = t0 + (z[c] - m[c]) / (-v[c]);
        if (tc < seg_end) events.push_back(tc);
      }
    }
    std::sort(events.begin(), events.end());
    double t_cur = t0;
    for (double te : events) {
      z += v * (te - t_cur);
      m = m.cwiseMin(z);
      t_cur = te;
      // continuous here: advance the "previous value" trackers to te
      y_prev = z - m;
      l_prev = anchor - m;
      append(te, v);
    }
    z += v * (seg_end - t_cur);
    m = m.cwiseMin(z);
    y_prev = z - m;
    l_prev = anchor - m;
  }
  if (!sol.active_history.empty()) sol.active_history.back().t1 = Z.horizon();
  return sol;
}

struct CheckReport {
  double identity = 0;
  double negativity = 0;
  double l_monotone = 0;
  double complementarity = 0;
  double max_violation() const {
    return std::max(std::max(identity, negativity), std::max(l_monotone, complementarity));
  }
};

// Verifies the four defining constraints against the input path.
inline CheckReport check_solution(const MarkedPath& X, const MatrixXd& R,
                                  const SkorokhodSolution& sol) {
  CheckReport rep;
  const VectorXd y0 = sol.Y.init();
  std::vector<double> ts;
  for (std::size_t i = 0; i < sol.Y.n_breakpoints(); ++i) ts.push_back(sol.Y.time(i));
  for (std::size_t i = 0; i < X.n_breakpoints(); ++i) ts.push_back(X.time(i));
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<double> probes;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    probes.push_back(ts[i]);
    if (i + 1 < ts.size()) probes.push_back(0.5 * (ts[i] + ts[i + 1]));
  }
  probes.push_back(X.horizon());
  for (double t : probes) {
    const VectorXd xinc = X.value(t) - X.init();
    const VectorXd y = sol.Y.value(t);
    const VectorXd l = sol.L.value(t);
    rep.identity = std::max(rep.identity, (y - (y0 + xinc + R * l)).cwiseAbs().maxCoeff());
    rep.negativity = std::max(rep.negativity, std::max(0.0, -y.minCoeff()));
  }
  for (std::size_t i = 0; i < sol.L.n_breakpoints(); ++i) {
    rep.l_monotone = std::max(rep.l_monotone, std::max(0.0, -sol.L.jump(i).minCoeff()));
    rep.l_monotone = std::max(rep.l_monotone, std::max(0.0, -sol.L.slope(i).minCoeff()));
  }
  for (std::size_t i = 0; i < sol.L.n_breakpoints(); ++i) {
    const double t0 = sol.L.time(i);
    const double t1 = (i + 1 < sol.L.n_breakpoints()) ? sol.L.time(i + 1) : sol.L.horizon();
    for (int c = 0; c < X.dim(); ++c) {
      if (sol.L.slope(i)[c] > 100 * kLcpTol) {
        const double ya = std::fabs(sol.Y.value(t0)[c]);
        const double yb = std::fabs(sol.Y.left_limit(t1)[c]);
        rep.complementarity = std::max(rep.complementarity, std::max(ya, yb));
      }
    }
  }
  return rep;
}

// Upper bound on the Lipschitz constant of the Skorokhod map in the uniform
// norm: with Theta = I - R (nonnegative off the diagonal, spectral radius
// < 1), |dY| <= (1 + max_i ((I+Theta)(I-Theta)^{-1} 1)_i) |dX|.
inline double lipschitz_bound(const MatrixXd& R) {
  const int d = static_cast<int>(R.rows());
  const MatrixXd theta = MatrixXd::Identity(d, d) - R;
  const MatrixXd inv = (MatrixXd::Identity(d, d) - theta).inverse();
  const VectorXd w = (MatrixXd::Identity(d, d) + theta) * inv * VectorXd::Ones(d);
  return 1.0 + w.maxCoeff();
}

}  // namespace rbnet
