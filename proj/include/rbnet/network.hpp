#pragma once

// Network primitives: routing/reflection matrices, jump distributions with
// closed-form MGFs and exact tilted samplers, stability validation, and the
// tilting parameters (dominating drift z, Cramer roots theta*, weights w,
// level m, shift vector a) used by the exact sampler.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rbnet/errors.hpp"
#include "rbnet/random.hpp"

namespace rbnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInvTol = 1e-10;
inline constexpr double kRootTol = 1e-9;

struct ReflectionMatrix {
  int dim = 0;
  MatrixXd Q;      // routing proportions, Q_ii = 0, row sums <= 1
  MatrixXd R;      // (I - Q)^T
  MatrixXd R_inv;  // entrywise nonnegative

  // Builds R = (I - Q)^T and its verified inverse. Spectral radius of Q is
  // checked via repeated squaring: Q^(2^k) must vanish entrywise.
  static ReflectionMatrix from_routing(const MatrixXd& Q) {
    const int d = static_cast<int>(Q.rows());
    if (Q.cols() != d) throw Error(Errc::ConfigError, "routing matrix must be square");
    for (int i = 0; i < d; ++i) {
      if (Q(i, i) != 0.0) throw Error(Errc::NonMMatrix, "Q_ii must be zero");
      double row = 0;
      for (int j = 0; j < d; ++j) {
        if (Q(i, j) < 0) throw Error(Errc::NonMMatrix, "Q entries must be nonnegative");
        row += Q(i, j);
      }
      if (row > 1.0 + 1e-12) {
        throw Error(Errc::NonMMatrix, "row sum of Q exceeds 1 at row " + std::to_string(i));
      }
    }
    MatrixXd P = Q;
    bool vanishes = false;
    for (int k = 0; k < 64; ++k) {
      const double mx = P.cwiseAbs().maxCoeff();
      if (mx < 1e-12) {
        vanishes = true;
        break;
      }
      if (mx > 1e50) break;
      P = P * P;
    }
    if (!vanishes) throw Error(Errc::NonMMatrix, "spectral radius of Q is not < 1");
    ReflectionMatrix rm;
    rm.dim = d;
    rm.Q = Q;
    rm.R = (MatrixXd::Identity(d, d) - Q).transpose();
    rm.R_inv = rm.R.inverse();
    const double id_err = (rm.R_inv * rm.R - MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
    if (id_err > kInvTol) throw Error(Errc::NonMMatrix, "inverse verification failed");
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (rm.R_inv(i, j) < -1e-12) {
          throw Error(Errc::NonMMatrix, "R^{-1} has a negative component");
        }
        if (rm.R_inv(i, j) < 0) rm.R_inv(i, j) = 0.0;
      }
    }
    return rm;
  }

  static ReflectionMatrix identity(int d) { return from_routing(MatrixXd::Zero(d, d)); }
};

// Jump distributions: three parametric families with closed-form MGFs and
// closed-form exponentially tilted samplers.
class JumpDistribution {
 public:
  enum class Kind { IndependentExponential, IndependentDeterministic, CommonFactorExponential };

  static JumpDistribution independent_exponential(VectorXd rates) {
    JumpDistribution j;
    j.kind_ = Kind::IndependentExponential;
    j.rates_ = std::move(rates);
    j.dim_ = static_cast<int>(j.rates_.size());
    for (int i = 0; i < j.dim_; ++i) {
      if (j.rates_[i] <= 0) throw Error(Errc::ConfigError, "exponential rates must be > 0");
    }
    return j;
  }

  static JumpDistribution independent_deterministic(VectorXd values) {
    JumpDistribution j;
    j.kind_ = Kind::IndependentDeterministic;
    j.values_ = std::move(values);
    j.dim_ = static_cast<int>(j.values_.size());
    for (int i = 0; i < j.dim_; ++i) {
      if (j.values_[i] < 0) throw Error(Errc::ConfigError, "deterministic jumps must be >= 0");
    }
    return j;
  }

  // W_i = a_i V + E_i with V ~ Exp(nu), E_i ~ Exp(gamma_i), all independent.
  static JumpDistribution common_factor_exponential(double nu, VectorXd loadings, VectorXd rates) {
    JumpDistribution j;
    j.kind_ = Kind::CommonFactorExponential;
    j.nu_ = nu;
    j.loadings_ = std::move(loadings);
    j.rates_ = std::move(rates);
    j.dim_ = static_cast<int>(j.rates_.size());
    if (nu <= 0) throw Error(Errc::ConfigError, "factor rate must be > 0");
    if (j.loadings_.size() != j.dim_) throw Error(Errc::ConfigError, "loadings size mismatch");
    for (int i = 0; i < j.dim_; ++i) {
      if (j.rates_[i] <= 0 || j.loadings_[i] < 0) {
        throw Error(Errc::ConfigError, "bad common-factor parameters");
      }
    }
    return j;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  // Declared per-component supremum of the finite-MGF region. May be capped
  // below the analytic value to model a narrower declared domain.
  void set_domain_caps(const VectorXd& caps) { caps_ = caps; }

  double domain_sup(int i) const {
    double d;
    switch (kind_) {
      case Kind::IndependentExponential: d = rates_[i]; break;
      case Kind::IndependentDeterministic: d = std::numeric_limits<double>::infinity(); break;
      case Kind::CommonFactorExponential: {
        d = rates_[i];
        if (loadings_[i] > 0) d = std::min(d, nu_ / loadings_[i]);
        break;
      }
    }
    if (caps_ && (*caps_)[i] < d) d = (*caps_)[i];
    return d;
  }

  VectorXd mean() const {
    VectorXd m(dim_);
    switch (kind_) {
      case Kind::IndependentExponential:
        for (int i = 0; i < dim_; ++i) m[i] = 1.0 / rates_[i];
        break;
      case Kind::IndependentDeterministic:
        m = values_;
        break;
      case Kind::CommonFactorExponential:
        for (int i = 0; i < dim_; ++i) m[i] = loadings_[i] / nu_ + 1.0 / rates_[i];
        break;
    }
    return m;
  }

  // Joint MGF phi(eta) = E exp(eta^T W); +inf outside the domain.
  double mgf(const VectorXd& eta) const {
    const double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case Kind::IndependentExponential: {
        double p = 1.0;
        for (int i = 0; i < dim_; ++i) {
          if (eta[i] >= rates_[i]) return inf;
          p *= rates_[i] / (rates_[i] - eta[i]);
        }
        return p;
      }
      case Kind::IndependentDeterministic:
        return std::exp(eta.dot(values_));
      case Kind::CommonFactorExponential: {
        const double s = eta.dot(loadings_);
        if (s >= nu_) return inf;
        double p = nu_ / (nu_ - s);
        for (int i = 0; i < dim_; ++i) {
          if (eta[i] >= rates_[i]) return inf;
          p *= rates_[i] / (rates_[i] - eta[i]);
        }
        return p;
      }
    }
    return inf;
  }

  double marginal_mgf(int i, double th) const {
    if (th >= domain_sup(i)) return std::numeric_limits<double>::infinity();
    switch (kind_) {
      case Kind::IndependentExponential:
        return rates_[i] / (rates_[i] - th);
      case Kind::IndependentDeterministic:
        return std::exp(th * values_[i]);
      case Kind::CommonFactorExponential: {
        double p = rates_[i] / (rates_[i] - th);
        if (loadings_[i] > 0) p *= nu_ / (nu_ - loadings_[i] * th);
        return p;
      }
    }
    return std::numeric_limits<double>::infinity();
  }

  double marginal_mgf_deriv(int i, double th) const {
    switch (kind_) {
      case Kind::IndependentExponential:
        return rates_[i] / ((rates_[i] - th) * (rates_[i] - th));
      case Kind::IndependentDeterministic:
        return values_[i] * std::exp(th * values_[i]);
      case Kind::CommonFactorExponential: {
        // product rule over the two exponential factors
        const double fe = rates_[i] / (rates_[i] - th);
        const double fe_d = rates_[i] / ((rates_[i] - th) * (rates_[i] - th));
        if (loadings_[i] == 0) return fe_d;
        const double fv = nu_ / (nu_ - loadings_[i] * th);
        const double fv_d = nu_ * loadings_[i] / ((nu_ - loadings_[i] * th) * (nu_ - loadings_[i] * th));
        return fe_d * fv + fe * fv_d;
      }
    }
    return 0;
  }

  VectorXd sample(RngStream& rng) const {
    VectorXd w(dim_);
    switch (kind_) {
      case Kind::IndependentExponential:
        for (int i = 0; i < dim_; ++i) w[i] = rng.exponential(rates_[i]);
        break;
      case Kind::IndependentDeterministic:
        w = values_;
        break;
      case Kind::CommonFactorExponential: {
        const double v = rng.exponential(nu_);
        for (int i = 0; i < dim_; ++i) w[i] = loadings_[i] * v + rng.exponential(rates_[i]);
        break;
      }
    }
    return w;
  }

  // Exact sampler for the jump law tilted by exp(th * w_k).
  VectorXd sample_tilted(int k, double th, RngStream& rng) const {
    VectorXd w(dim_);
    switch (kind_) {
      case Kind::IndependentExponential:
        for (int i = 0; i < dim_; ++i) {
          w[i] = rng.exponential(i == k ? rates_[i] - th : rates_[i]);
        }
        break;
      case Kind::IndependentDeterministic:
        w = values_;
        break;
      case Kind::CommonFactorExponential: {
        const double vrate = nu_ - loadings_[k] * th;
        const double v = rng.exponential(vrate);
        for (int i = 0; i < dim_; ++i) {
          w[i] = loadings_[i] * v + rng.exponential(i == k ? rates_[i] - th : rates_[i]);
        }
        break;
      }
    }
    return w;
  }

 private:
  Kind kind_ = Kind::IndependentExponential;
  int dim_ = 0;
  VectorXd rates_;
  VectorXd values_;
  VectorXd loadings_;
  double nu_ = 0;
  std::optional<VectorXd> caps_;
};

struct NetworkSpec {
  ReflectionMatrix reflection;
  double lambda = 0;
  VectorXd service_rates;
  JumpDistribution jumps;

  int dim() const { return reflection.dim; }
  // E X(1) = lambda E[W] - R r
  VectorXd mean_input_rate() const {
    return lambda * jumps.mean() - reflection.R * service_rates;
  }
};

struct ValidationItem {
  std::string assumption;
  bool pass;
  double quantity;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool ok() const {
    for (const auto& it : items) {
      if (!it.pass) return false;
    }
    return true;
  }
  void require() const {
    for (const auto& it : items) {
      if (!it.pass) {
        Errc c = Errc::ConfigError;
        if (it.assumption == "A1") c = Errc::NonMMatrix;
        if (it.assumption == "A2") c = Errc::Unstable;
        if (it.assumption == "A3") c = Errc::NoExponentialMoment;
        throw Error(c, it.message);
      }
    }
  }
};

inline ValidationReport validate_network(const NetworkSpec& spec) {
  ValidationReport rep;
  const int d = spec.dim();
  if (spec.lambda <= 0 || (spec.service_rates.array() <= 0).any() ||
      spec.service_rates.size() != d || spec.jumps.dim() != d) {
    rep.items.push_back({"fields", false, 0, "lambda > 0, r > 0 and matching dimensions required"});
    return rep;
  }
  rep.items.push_back({"fields", true, 0, "ok"});

  // A1: M-matrix structure (reconstructed from Q to re-verify)
  try {
    auto rm = ReflectionMatrix::from_routing(spec.reflection.Q);
    const double err = (rm.R_inv - spec.reflection.R_inv).cwiseAbs().maxCoeff();
    rep.items.push_back({"A1", err < 1e-8, err, "R = (I-Q)^T with nonnegative inverse"});
  } catch (const Error& e) {
    rep.items.push_back({"A1", false, 0, e.what()});
    return rep;
  }

  // A2: R^{-1} E X(1) < 0 componentwise
  const VectorXd drift = spec.reflection.R_inv * spec.mean_input_rate();
  const double worst = drift.maxCoeff();
  rep.items.push_back(
      {"A2", worst < 0, worst, "R^{-1} E X(1) must be < 0; max component reported"});

  // A3: finite exponential moments on the declared per-component domain
  bool a3 = true;
  double dmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    const double di = spec.jumps.domain_sup(i);
    dmin = std::min(dmin, di);
    if (!(di > 0)) a3 = false;
    const double probe = std::isfinite(di) ? 0.5 * di : 1.0;
    if (!std::isfinite(spec.jumps.marginal_mgf(i, probe))) a3 = false;
  }
  rep.items.push_back({"A3", a3, dmin, "marginal MGFs finite on a positive domain"});
  return rep;
}

// z = E X(1) + delta 1 with delta = 0.5 min_i (-R^{-1}EX)_i / (R^{-1}1)_i.
// Halves the stability margin; E Z(1) = -delta 1.
inline VectorXd select_dominating_drift(const NetworkSpec& spec) {
  const VectorXd ex = spec.mean_input_rate();
  const VectorXd u = spec.reflection.R_inv * ex;
  const VectorXd w = spec.reflection.R_inv * VectorXd::Ones(spec.dim());
  double delta = std::numeric_limits<double>::infinity();
  for (int i = 0; i < spec.dim(); ++i) {
    delta = std::min(delta, -u[i] / w[i]);
  }
  delta *= 0.5;
  if (!(delta > 0)) {
    throw Error(Errc::Unstable, "no positive drift margin; A2 violated");
  }
  return ex + delta * VectorXd::Ones(spec.dim());
}

// Cumulant of Z_i(1) when Z has jump arrivals at rate lambda and drift -mu_i:
// kappa_i(th) = lambda (phi_i(th) - 1) - mu_i th.
inline double cumulant_z(const NetworkSpec& spec, double mu_i, int i, double th) {
  return spec.lambda * (spec.jumps.marginal_mgf(i, th) - 1.0) - mu_i * th;
}

namespace detail {
// Unique positive root of the convex function kappa with kappa(0) = 0 and
// kappa'(0) < 0, searched inside (0, dsup). Bisection only.
template <typename F>
std::optional<double> convex_root(F&& kappa, double dsup) {
  double lo = 0.0;
  double hi;
  bool bracketed = false;
  if (std::isfinite(dsup)) {
    for (int n = 1; n <= 60; ++n) {
      hi = dsup * (1.0 - std::pow(2.0, -n));
      const double k = kappa(hi);
      if (std::isfinite(k) && k > 0) {
        bracketed = true;
        break;
      }
      if (k < 0) lo = hi;
    }
  } else {
    hi = 1.0;
    for (int n = 0; n < 200; ++n) {
      const double k = kappa(hi);
      if (std::isfinite(k) && k > 0) {
        bracketed = true;
        break;
      }
      if (k < 0) lo = hi;
      hi *= 2.0;
    }
  }
  if (!bracketed) return std::nullopt;
  for (int it = 0; it < 500; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double k = kappa(mid);
    if (std::fabs(k) < kRootTol) return mid;
    if (k < 0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-16 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}
}  // namespace detail

// Root of E exp(th Z_i(1)) = 1 over th > 0. mu is taken from z via
// mu = R r + z. Throws NoRoot when kappa stays negative on the declared
// domain (the A3-only case; the caller then computes a shift vector).
inline double cramer_root_mu(const NetworkSpec& spec, double mu_i, int i) {
  const double drift0 = spec.lambda * spec.jumps.mean()[i] - mu_i;  // kappa'(0)
  if (!(drift0 < 0)) {
    throw Error(Errc::Unstable, "component drift must be negative for a Cramer root");
  }
  const double dsup = spec.jumps.domain_sup(i);
  auto kap = [&](double th) { return cumulant_z(spec, mu_i, i, th); };
  auto root = detail::convex_root(kap, dsup);
  if (!root) {
    throw Error(Errc::NoRoot, "cumulant negative on the declared MGF domain for component " +
                                  std::to_string(i));
  }
  return *root;
}

inline double cramer_root(const NetworkSpec& spec, const VectorXd& z, int i) {
  const VectorXd mu = spec.reflection.R * spec.service_rates + z;
  return cramer_root_mu(spec, mu[i], i);
}

// A3-only fallback: per component, a_i > 0 such that the shifted increment
// Z_i(1) + a_i admits a Cramer root while keeping E Z_i(1) + a_i < 0.
// Downstream samplers run on Z + a t and subtract a t on output.
inline std::pair<VectorXd, VectorXd> compute_shift_vector(const NetworkSpec& spec,
                                                          const VectorXd& z) {
  const int d = spec.dim();
  const VectorXd mu = spec.reflection.R * spec.service_rates + z;
  VectorXd a = VectorXd::Zero(d);
  VectorXd theta(d);
  for (int i = 0; i < d; ++i) {
    const double drift = spec.lambda * spec.jumps.mean()[i] - mu[i];  // E Z_i(1)
    if (!(drift < 0)) {
      throw Error(Errc::NoFeasibleShift, "component " + std::to_string(i) +
                                             " has nonnegative drift; no shift feasible");
    }
    const double dsup = spec.jumps.domain_sup(i);
    auto root_for = [&](double ai) {
      auto kap = [&](double th) { return cumulant_z(spec, mu[i] - ai, i, th); };
      return detail::convex_root(kap, dsup);
    };
    if (auto r0 = root_for(0.0)) {
      theta[i] = *r0;
      continue;
    }
    const double margin = -drift;
    double ai = 0.5 * margin;  // halve the drift margin first
    auto r = root_for(ai);
    if (!r) {
      // bisect a_i upward inside (margin/2, margin)
      double lo = ai, hi = margin * (1.0 - 1e-9);
      if (!root_for(hi)) {
        throw Error(Errc::NoFeasibleShift,
                    "no shift in (0, -E Z_i(1)) admits a Cramer root for component " +
                        std::to_string(i));
      }
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (root_for(mid)) {
          hi = mid;
        } else {
          lo = mid;
        }
        if (hi - lo < 1e-12 * margin) break;
      }
      ai = 0.5 * (hi + margin);  // keep clear of the existence boundary
      r = root_for(ai);
      if (!r) throw Error(Errc::NoFeasibleShift, "shift bisection failed");
    }
    a[i] = ai;
    theta[i] = *r;
  }
  return {a, theta};
}

// m = max(log(2d) / min_i theta*_i, 1). Guarantees sum_i exp(-theta_i m)
// <= 1/2; the floor handles d = 1 where the paper's 2 log d rule degenerates.
inline double choose_level_m(const VectorXd& theta) {
  const int d = static_cast<int>(theta.size());
  const double m = std::max(std::log(2.0 * d) / theta.minCoeff(), 1.0);
  double s = 0;
  for (int i = 0; i < d; ++i) s += std::exp(-theta[i] * m);
  if (s > 0.5 + 1e-12) throw Error(Errc::ConfigError, "level m failed Condition 1 slack");
  return m;
}

struct TiltingProfile {
  VectorXd z;        // dominating drift
  VectorXd mu;       // R r + z (componentwise positive; Z has slope -mu)
  VectorXd theta;    // Cramer roots for the (possibly shifted) increments
  VectorXd weights;  // w_k = exp(-theta_k m) / sum_j exp(-theta_j m)
  double m = 0;
  VectorXd shift_a;  // zero when A3b holds directly

  VectorXd mu_effective() const { return mu - shift_a; }
};

inline TiltingProfile make_tilting_profile(const NetworkSpec& spec) {
  TiltingProfile p;
  p.z = select_dominating_drift(spec);
  p.mu = spec.reflection.R * spec.service_rates + p.z;
  const int d = spec.dim();
  p.shift_a = VectorXd::Zero(d);
  p.theta = VectorXd(d);
  bool need_shift = false;
  for (int i = 0; i < d; ++i) {
    try {
      p.theta[i] = cramer_root_mu(spec, p.mu[i], i);
    } catch (const Error& e) {
      if (e.code() != Errc::NoRoot) throw;
      need_shift = true;
      break;
    }
  }
  if (need_shift) {
    auto [a, th] = compute_shift_vector(spec, p.z);
    p.shift_a = a;
    p.theta = th;
  }
  p.m = choose_level_m(p.theta);
  p.weights = VectorXd(d);
  double s = 0;
  for (int i = 0; i < d; ++i) {
    p.weights[i] = std::exp(-p.theta[i] * p.m);
    s += p.weights[i];
  }
  p.weights /= s;
  return p;
}

}  // namespace rbnet
