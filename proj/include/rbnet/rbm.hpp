#pragma once

// Epsilon-controlled steady-state sampling of reflected Brownian motion.
//
// The driving Z(t) = mu t + A B(t) splits into the integer-time Gaussian
// walk S(n) = Z(n) + n zeta 1 and wavelet bridges between integer times.
// Coalescence detection follows the ladder construction: descend to anchors
// Delta_l (each 2m below the previous), investigate Gamma_l (does the walk
// ever rise m above the anchor?) with one merged tilted-proposal trial, and
// hunt the bridged path for a time tau with the epsilon certificate
//     Z_i(s) <= Z_i(tau) + eps for all s >= tau and every i,
// closed beyond the simulated window by the walk cap S <= S(anchor) + m and
// the coefficient envelope of a registered bound round.
//
// Once an anchor's investigation returns "never exceeds", the whole future
// is conditioned on staying below cap = S(anchor) + m. Further reveals stay
// exact by sequential acceptance/rejection: stretch proposals that violate
// the cap are rejected, and each accepted stretch is weighted by its future
// consistency through an auxiliary Bernoulli 1{T_gap < inf} generated by
// simulation (plain steps to the next 2m-drop, then one tilted trial at the
// enlarged gap, recursively). All randomness is keyed, so re-running any
// part of the decision logic -- in particular re-certification after a
// tolerance refinement -- replays the same realization.

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>

#include "rbnet/errors.hpp"
#include "rbnet/network.hpp"
#include "rbnet/random.hpp"
#include "rbnet/skorokhod.hpp"
#include "rbnet/wavelet.hpp"

namespace rbnet {

inline constexpr long kRbmDrawCap = 1000000000;

struct RBMSpec {
  VectorXd v;
  MatrixXd Sigma;
  ReflectionMatrix reflection;
  // derived
  VectorXd z;
  VectorXd mu;      // v - z = -delta0 * 1
  double delta0 = 0;
  double zeta = 0;  // delta0 / 2
  MatrixXd A;       // lower Cholesky factor of Sigma
  VectorXd theta;   // Cramer roots of the S-walk increments: 2 zeta / Sigma_ii
  VectorXd weights;
  double m = 0;
  double r_ratio = 0;  // max R^{-1} entry / min positive R^{-1} entry

  int dim() const { return static_cast<int>(v.size()); }
  double error_factor() const { return 1.0 + dim() * r_ratio; }
};

inline RBMSpec make_rbm_spec(const VectorXd& v, const MatrixXd& Sigma,
                             const ReflectionMatrix& reflection) {
  RBMSpec s;
  s.v = v;
  s.Sigma = Sigma;
  s.reflection = reflection;
  const int d = static_cast<int>(v.size());
  Eigen::LLT<MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::NonPDCovariance, "covariance must be positive definite");
  }
  s.A = llt.matrixL();
  const VectorXd u = reflection.R_inv * v;
  if (u.maxCoeff() >= 0) throw Error(Errc::Unstable, "R^{-1} v must be < 0");
  const VectorXd w = reflection.R_inv * VectorXd::Ones(d);
  double delta = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) delta = std::min(delta, -u[i] / w[i]);
  delta *= 0.5;
  s.z = v + delta * VectorXd::Ones(d);
  s.mu = v - s.z;
  s.delta0 = -s.mu.maxCoeff();
  s.zeta = 0.5 * s.delta0;
  s.theta = VectorXd(d);
  for (int i = 0; i < d; ++i) s.theta[i] = 2.0 * s.zeta / Sigma(i, i);
  s.m = choose_level_m(s.theta);
  s.weights = VectorXd(d);
  double tot = 0;
  for (int i = 0; i < d; ++i) {
    s.weights[i] = std::exp(-s.theta[i] * s.m);
    tot += s.weights[i];
  }
  s.weights /= tot;
  double mx = 0, mnpos = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double e = reflection.R_inv(i, j);
      mx = std::max(mx, e);
      if (e > 0) mnpos = std::min(mnpos, e);
    }
  }
  s.r_ratio = mx / mnpos;
  return s;
}

// Largest n for which the coefficient envelope cannot yet certify the
// bridge below n zeta: beyond m0 the tail argument closes by itself.
inline long envelope_m0(const RBMSpec& spec, const WaveletStore& store) {
  const double c = store.row_abs_max();
  const double s_half = 1.0 / (2.0 - std::sqrt(2.0));  // sum 2^{-j/2-1}
  const double tail0 = certified_tail_bound(0);
  long m0 = 1;
  for (long n = 1; n < 100000000; ++n) {
    const double env = c * (4.0 * std::sqrt(n <= 1 ? 0.0 : std::log(double(n))) * s_half + tail0);
    if (double(n) * spec.zeta < env) {
      m0 = n;
    } else if (n > 4 * m0 + 16) {
      break;  // the envelope grows like sqrt(log n); once clear it stays clear
    }
  }
  return std::max<long>(m0, 1);
}

// Integer-time Gaussian walk with ladder anchors and exact conditional
// reveals. S(0) = 0; Z^eps(n) = S(n) - n zeta.
class GaussianWalk {
 public:
  GaussianWalk(const RBMSpec& spec, std::uint64_t seed) : spec_(&spec), seed_(seed) {
    S_.push_back(VectorXd::Zero(spec.dim()));
  }

  long revealed() const { return static_cast<long>(S_.size()) - 1; }
  const VectorXd& S(long n) const { return S_[static_cast<std::size_t>(n)]; }
  VectorXd Zeps(long n) const { return S(n) - double(n) * spec_->zeta * VectorXd::Ones(spec_->dim()); }

  struct Anchor {
    long idx;
    bool inf;
    long crossing_end;  // valid when !inf
  };
  const std::vector<Anchor>& anchors() const { return anchors_; }
  long gauss_draws() const { return gauss_draws_; }
  long n_bernoulli() const { return bern_ctr_; }

  // First anchor with an infinite-Gamma verdict strictly beyond `pos`.
  long extend_to_inf_anchor(double pos) {
    for (;;) {
      for (const auto& a : anchors_) {
        if (a.inf && double(a.idx) > pos) return a.idx;
      }
      advance_one_anchor();
    }
  }

  void extend_revealed(long pos) {
    while (revealed() < pos) advance_one_anchor();
  }

  long last_crossing_end() const { return last_crossing_end_; }

 private:
  using Steps = std::vector<VectorXd>;  // S-increments

  VectorXd plain_increment(RngStream& rng) {
    VectorXd w0(spec_->dim());
    for (int i = 0; i < spec_->dim(); ++i) w0[i] = rng.normal();
    gauss_draws_ += spec_->dim();
    return -spec_->zeta * VectorXd::Ones(spec_->dim()) + spec_->A * w0;
  }

  VectorXd tilted_increment(int k, double th, RngStream& rng) {
    VectorXd w0(spec_->dim());
    for (int i = 0; i < spec_->dim(); ++i) w0[i] = rng.normal();
    gauss_draws_ += spec_->dim();
    w0 += th * spec_->A.transpose().col(k);
    return -spec_->zeta * VectorXd::Ones(spec_->dim()) + spec_->A * w0;
  }

  // One tilted proposal to the crossing of the vector level L, with
  // level-adapted weights; the acceptance Bernoulli has probability
  // P_0(T_L < inf) exactly. Requires sum_j exp(-theta_j L_j) <= 1.
  struct Trial {
    bool accepted;
    Steps path;
  };
  Trial merged_trial(const VectorXd& L, std::uint64_t c0, std::uint64_t c1) {
    const int d = spec_->dim();
    VectorXd w(d);
    double tot = 0;
    for (int j = 0; j < d; ++j) {
      w[j] = std::exp(-spec_->theta[j] * L[j]);
      tot += w[j];
    }
    if (tot > 1.0 + 1e-12) throw Error(Errc::ConfigError, "Condition 1 fails at this level");
    w /= tot;
    auto kstream = make_stream(seed_, tag::kWalkTilt, c0, c1, 0);
    int K = d - 1;
    {
      const double u = kstream.u01();
      double acc = 0;
      for (int j = 0; j < d; ++j) {
        acc += w[j];
        if (u <= acc) {
          K = j;
          break;
        }
      }
    }
    Trial tr;
    tr.accepted = false;
    VectorXd c = VectorXd::Zero(d);
    for (long step = 1;; ++step) {
      if (gauss_draws_ > kRbmDrawCap) throw Error(Errc::RuntimeCap, "walk draw cap exceeded");
      auto rng = make_stream(seed_, tag::kWalkTilt, c0, c1, static_cast<std::uint64_t>(step));
      c += tilted_increment(K, spec_->theta[K], rng);
      tr.path.push_back(c);
      if ((c.array() >= L.array()).any()) break;
    }
    double denom = 0;
    for (int j = 0; j < d; ++j) denom += w[j] * std::exp(spec_->theta[j] * c[j]);
    if (denom < 1.0 - 1e-9) throw Error(Errc::ConfigError, "walk AR denominator below 1");
    auto bern = make_stream(seed_, tag::kWalkBernoulli, c0, c1);
    ++bern_ctr_;
    tr.accepted = bern.u01() <= 1.0 / denom;
    return tr;
  }

  // Exact Bernoulli 1{T_L < inf} for an arbitrary positive level: when the
  // level is too low for the tilted bound, walk an auxiliary plain path to
  // the next 2m-drop (or an early crossing) and recurse at the larger gap.
  bool bernoulli_crossing(VectorXd L, std::uint64_t call_id) {
    const int d = spec_->dim();
    for (int depth = 0; depth < 64; ++depth) {
      double tot = 0;
      for (int j = 0; j < d; ++j) tot += std::exp(-spec_->theta[j] * L[j]);
      if (tot <= 0.5) {
        return merged_trial(L, pack2(call_id, depth), 0).accepted;
      }
      VectorXd s = VectorXd::Zero(d);
      const VectorXd drop = -2.0 * spec_->m * VectorXd::Ones(d);
      for (long step = 1;; ++step) {
        if (gauss_draws_ > kRbmDrawCap) throw Error(Errc::RuntimeCap, "walk draw cap exceeded");
        auto rng = make_stream(seed_, tag::kWalkBernoulli, pack2(call_id, depth),
                               static_cast<std::uint64_t>(step));
        s += plain_increment(rng);
        if ((s.array() >= L.array()).any()) return true;
        if ((s.array() < drop.array()).all()) break;
      }
      L -= s;  // gap grew by at least 2m
    }
    throw Error(Errc::RuntimeCap, "crossing Bernoulli recursion too deep");
  }

  static std::uint64_t pack2(std::uint64_t a, std::uint64_t b) { return (a << 8) | (b & 0xff); }

  void append_steps(const Steps& steps, const VectorXd& base) {
    for (const auto& c : steps) S_.push_back(base + c);
  }

  // Reveal from the current end to the next anchor (first index with
  // S < S(last anchor) - 2m in every component), respecting the standing
  // cap when one is active, then investigate Gamma there.
  void advance_one_anchor() {
    const int d = spec_->dim();
    const long ref_idx = anchors_.empty() ? 0 : last_delta_;
    const VectorXd target = S_[static_cast<std::size_t>(ref_idx)].array() - 2.0 * spec_->m;
    const VectorXd base = S_.back();
    const long start_idx = revealed();

    // 1) stretch to the next anchor
    Steps stretch;
    for (std::uint64_t attempt = 0;; ++attempt) {
      stretch.clear();
      VectorXd c = VectorXd::Zero(d);
      bool violated = false;
      for (long step = 1;; ++step) {
        if (gauss_draws_ > kRbmDrawCap) throw Error(Errc::RuntimeCap, "walk draw cap exceeded");
        auto rng = make_stream(seed_, tag::kWalkStretch, stretch_ctr_, attempt,
                               static_cast<std::uint64_t>(step));
        c += plain_increment(rng);
        stretch.push_back(c);
        if (have_standing_ && ((base + c).array() > cap_.array()).any()) {
          violated = true;
          break;
        }
        if (((base + c).array() < target.array()).all()) break;
      }
      if (violated) continue;
      if (have_standing_) {
        // future-consistency weight: accept iff the walk never crosses the
        // remaining gap to the cap
        const VectorXd gap = cap_ - (base + c);
        if (bernoulli_crossing(gap, pack_call(stretch_ctr_, attempt, 0))) continue;
      }
      break;
    }
    ++stretch_ctr_;
    append_steps(stretch, base);
    const long delta_idx = revealed();
    last_delta_ = delta_idx;
    (void)start_idx;

    // 2) investigate Gamma at the new anchor
    const VectorXd s_anchor = S_.back();
    const VectorXd level_m = spec_->m * VectorXd::Ones(d);
    for (std::uint64_t attempt = 0;; ++attempt) {
      auto tr = merged_trial(level_m, pack_call(invest_ctr_, attempt, 1), 1);
      if (!tr.accepted) {
        anchors_.push_back({delta_idx, true, -1});
        have_standing_ = true;
        cap_ = s_anchor + level_m;
        break;
      }
      // finite Gamma: splice the crossing path if consistent with the cap
      if (have_standing_) {
        bool bad = false;
        for (const auto& c : tr.path) {
          if (((s_anchor + c).array() > cap_.array()).any()) {
            bad = true;
            break;
          }
        }
        if (bad) continue;
        const VectorXd gap = cap_ - (s_anchor + tr.path.back());
        if (bernoulli_crossing(gap, pack_call(invest_ctr_, attempt, 2))) continue;
      }
      append_steps(tr.path, s_anchor);
      anchors_.push_back({delta_idx, false, revealed()});
      last_crossing_end_ = revealed();
      break;
    }
    ++invest_ctr_;
  }

  static std::uint64_t pack_call(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return (a << 20) | ((b & 0xffff) << 4) | (c & 0xf);
  }

  const RBMSpec* spec_;
  std::uint64_t seed_;
  std::vector<VectorXd> S_;
  std::vector<Anchor> anchors_;
  long last_delta_ = 0;
  long last_crossing_end_ = 0;
  bool have_standing_ = false;
  VectorXd cap_;
  std::uint64_t stretch_ctr_ = 0, invest_ctr_ = 0;
  long bern_ctr_ = 0;
  long gauss_draws_ = 0;
};

struct RbmCounters {
  long rounds = 0;
  long m_window = 0;
  long coefficients = 0;
  long walk_draws = 0;
  int refine_depth = 0;
};

// Joint simulation of tau_eps and Z^eps with the full certificate
//     Z^eps_i(s) <= Z^eps_i(tau_eps) + eps  for all s >= tau_eps.
class EpsCoalescence {
 public:
  EpsCoalescence(const RBMSpec& spec, double eps, std::uint64_t seed)
      : spec_(spec),
        store_(std::make_shared<WaveletStore>(seed, spec.dim(), spec.A, eps)),
        walk_(std::make_shared<GaussianWalk>(spec_, derive_key(seed, tag::kReplication, 1))) {
    run(0.0);
  }

  double tau() const { return tau_; }
  long anchor() const { return anchor_; }
  long window_end() const { return window_end_; }
  double eps() const { return store_->eps(); }
  WaveletStore& store() { return *store_; }
  const GaussianWalk& walk() const { return *walk_; }

  RbmCounters counters() const {
    RbmCounters c;
    c.rounds = rounds_;
    c.m_window = window_end_ - anchor_;
    c.coefficients = store_->coefficients_drawn();
    c.walk_draws = walk_->gauss_draws();
    c.refine_depth = refine_depth_;
    return c;
  }

  // Grid level and values of Z^eps on interval [n, n+1].
  int interval_level(long n) {
    int J = store_->J0();
    for (int i = 0; i < spec_.dim(); ++i) J = std::max(J, level_of(store_->K_of(n, i)));
    return J;
  }
  MatrixXd interval_values(long n) {
    const int d = spec_.dim();
    const int J = interval_level(n);
    const long N = 1L << (J + 1);
    walk_->extend_revealed(n + 1);
    MatrixXd g(d, N + 1);
    for (int i = 0; i < d; ++i) {
      const auto gi = store_->bridge_grid(n, i, J);
      for (long p = 0; p <= N; ++p) g(i, p) = gi[static_cast<std::size_t>(p)];
    }
    const VectorXd z0 = walk_->Zeps(n);
    const VectorXd z1 = walk_->Zeps(n + 1);
    MatrixXd vals(d, N + 1);
    for (long p = 0; p <= N; ++p) {
      const double frac = double(p) / double(N);
      vals.col(p) = z0 * (1.0 - frac) + z1 * frac + spec_.A * g.col(p);
    }
    return vals;
  }

  // Refinement with replayed randomness: re-validate the stored certificate
  // at the finer tolerance and continue the coalescence loop on violation.
  void refine(double new_eps) {
    if (new_eps == store_->eps()) return;
    store_->refine(new_eps);
    ++refine_depth_;
    if (!validate_certificate()) run(tau_);
  }

 private:
  void run(double tau_start) {
    tau_ = tau_start;
    for (;;) {
      ++rounds_;
      if (store_->coefficients_drawn() + walk_->gauss_draws() > kRbmDrawCap) {
        throw Error(Errc::RuntimeCap, "coefficient draw cap exceeded");
      }
      anchor_ = walk_->extend_to_inf_anchor(tau_);
      // step 3: hunt for the earliest certified candidate in the range
      const double lo = std::max(tau_, double(walk_->last_crossing_end() < anchor_
                                                  ? walk_->last_crossing_end()
                                                  : 0));
      double цand = -1;
      if (hunt_candidate(lo, &цand)) {
        tau_ = цand;
        // steps 4-5: bound round, window bridging, in-window check
        const auto mi = store_->sample_round_exceedances(anchor_);
        long M = envelope_m0(spec_, *store_);
        for (long v : mi) M = std::max(M, v);
        window_end_ = anchor_ + M;
        double viol = -1;
        if (!window_violation(tau_, anchor_, window_end_, &viol)) {
          return;  // certified
        }
        tau_ = viol;
      } else {
        tau_ = double(anchor_);
      }
    }
  }

  // earliest grid time t in [lo, anchor] with, for every component,
  //   max_{s in [t, anchor]} Z(s) <= Z(t) + eps   and
  //   Z(anchor) + m <= Z(t) + eps
  bool hunt_candidate(double lo, double* out) {
    const double eps = store_->eps();
    const long n_lo = static_cast<long>(std::floor(lo));
    const long n_hi = anchor_;
    walk_->extend_revealed(n_hi);
    std::vector<MatrixXd> vals;
    std::vector<int> levels;
    for (long n = n_lo; n < n_hi; ++n) {
      levels.push_back(interval_level(n));
      vals.push_back(interval_values(n));
    }
    const VectorXd z_anchor = walk_->Zeps(n_hi);
    // backward suffix max, then forward scan
    VectorXd suff = z_anchor;
    std::vector<std::pair<double, VectorXd>> cands;
    for (long n = n_hi - 1; n >= n_lo; --n) {
      const MatrixXd& V = vals[static_cast<std::size_t>(n - n_lo)];
      const long N = V.cols() - 1;
      for (long p = N; p >= 0; --p) {
        const double t = double(n) + double(p) / double(N);
        if (t < lo) break;
        suff = suff.cwiseMax(V.col(p));
        if (t > tau_ || t >= lo) {
          const VectorXd zt = V.col(p);
          const bool corridor = ((suff - zt).array() <= eps).all();
          const bool tail = ((z_anchor.array() + spec_.m) <= (zt.array() + eps)).all();
          if (corridor && tail) cands.push_back({t, zt});
        }
      }
    }
    if (cands.empty()) return false;
    double best = cands.back().first;  // backward scan: last entry is earliest
    for (const auto& c : cands) best = std::min(best, c.first);
    *out = best;
    return true;
  }

  // earliest grid time s in (tau, window_end] with Z_i(s) > Z_i(tau) + eps
  bool window_violation(double tau, long from, long window_end, double* out) {
    const double eps = store_->eps();
    walk_->extend_revealed(window_end);
    const VectorXd z_tau = value_at(tau);
    for (long n = from; n < window_end; ++n) {
      const MatrixXd V = interval_values(n);
      const long N = V.cols() - 1;
      for (long p = 0; p <= N; ++p) {
        const double s = double(n) + double(p) / double(N);
        if (s <= tau) continue;
        if (((V.col(p) - z_tau).array() > eps).any()) {
          *out = s;
          return true;
        }
      }
    }
    return false;
  }

  VectorXd value_at(double t) {
    const long n = std::min<long>(static_cast<long>(std::floor(t)), anchor_ - 1 >= 0 ? anchor_ : 0);
    if (double(n) == t && n >= 0) {
      walk_->extend_revealed(n);
      return walk_->Zeps(n);
    }
    const MatrixXd V = interval_values(n);
    const long N = V.cols() - 1;
    const double x = (t - double(n)) * double(N);
    const long p = std::min<long>(static_cast<long>(std::llround(x)), N);
    return V.col(p);
  }

  // Re-validation of the stored certificate at the current tolerance.
  bool validate_certificate() {
    const double eps = store_->eps();
    const VectorXd z_tau = value_at(tau_);
    // corridor and tail on [tau, anchor]
    walk_->extend_revealed(anchor_);
    const VectorXd z_anchor = walk_->Zeps(anchor_);
    if (!(((z_anchor.array() + spec_.m) <= (z_tau.array() + eps)).all())) return false;
    double dummy;
    if (window_violation(tau_, static_cast<long>(std::floor(tau_)), window_end_, &dummy)) {
      return false;
    }
    return true;
  }

  const RBMSpec& spec_;
  std::shared_ptr<WaveletStore> store_;
  std::shared_ptr<GaussianWalk> walk_;
  double tau_ = 0;
  long anchor_ = 0;
  long window_end_ = 0;
  long rounds_ = 0;
  int refine_depth_ = 0;
};

struct RbmSample {
  VectorXd y;
  double error_bound = 0;
  RbmCounters counters;
};

namespace detail {
// Streams the reversed input X(t) = -Z^eps(tau - t) - z (tau - t) through
// the Skorokhod stepper from a zero start and returns the endpoint.
inline VectorXd solve_reversed(EpsCoalescence& sim, const RBMSpec& spec) {
  const double tau = sim.tau();
  const int d = spec.dim();
  SkorokhodStepper st(spec.reflection.R, VectorXd::Zero(d));
  if (tau <= 0) return VectorXd::Zero(d);
  long n = static_cast<long>(std::floor(tau));
  // partial first interval when tau sits strictly inside [n, n+1)
  for (long блок = n; блок >= 0; --блок) {
    const MatrixXd V = sim.interval_values(блок);
    const long N = V.cols() - 1;
    const double h = 1.0 / double(N);
    long p_hi = N;
    if (блок == n) {
      const double x = (tau - double(n)) * double(N);
      p_hi = static_cast<long>(std::llround(x));
      if (p_hi <= 0) continue;
    }
    for (long p = p_hi; p >= 1; --p) {
      const VectorXd slope = (V.col(p) - V.col(p - 1)) / h + spec.z;
      st.advance(h, slope);
    }
  }
  return st.y();
}
}  // namespace detail

inline RbmSample sample_stationary_eps(const RBMSpec& spec, double eps, std::uint64_t seed) {
  EpsCoalescence sim(spec, eps, seed);
  RbmSample out;
  out.y = detail::solve_reversed(sim, spec);
  out.error_bound = spec.error_factor() * eps;
  out.counters = sim.counters();
  return out;
}

struct UnbiasedEstimate {
  double value = 0;
  double T = 0;
  int refine_depth = 0;
  bool floor_flagged = false;
  RbmCounters counters;
};

// Randomized unbiased estimator of E g(Y(inf)) for positive Lipschitz g:
// draw T ~ f, halve eps until |g(Y_eps) - T| exceeds the Lipschitz-scaled
// output bound, then return 1{g(Y_eps) > T} / f(T).
inline UnbiasedEstimate estimate_unbiased(
    const RBMSpec& spec, const std::function<double(const VectorXd&)>& g, double lipschitz,
    const std::function<double(double)>& f_density,
    const std::function<double(RngStream&)>& f_sampler, std::uint64_t seed, double eps0 = 0.1,
    double eps_floor = 1e-9) {
  auto trng = make_stream(seed, tag::kEstimatorT);
  UnbiasedEstimate est;
  est.T = f_sampler(trng);
  EpsCoalescence sim(spec, eps0, seed);
  double eps = eps0;
  for (;;) {
    const VectorXd y = detail::solve_reversed(sim, spec);
    const double gy = g(y);
    const double slack = lipschitz * spec.error_factor() * eps;
    if (std::fabs(gy - est.T) > slack) {
      est.value = (gy > est.T ? 1.0 : 0.0) / f_density(est.T);
      est.counters = sim.counters();
      est.refine_depth = sim.counters().refine_depth;
      return est;
    }
    if (eps * 0.5 < eps_floor) {
      est.value = (gy > est.T ? 1.0 : 0.0) / f_density(est.T);
      est.floor_flagged = true;
      est.counters = sim.counters();
      est.refine_depth = sim.counters().refine_depth;
      return est;
    }
    eps *= 0.5;
    sim.refine(eps);
  }
}

}  // namespace rbnet
