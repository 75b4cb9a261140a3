#pragma once

// Exact steady-state sampling of the reflected compound Poisson network by
// dominated coupling from the past. The coalescence loop extends Z by plain
// arrivals; whenever the newest inter-arrival segment drops below -m in
// every component, a single merged acceptance/rejection trial produces both
// the Bernoulli 1{T_m < infinity} and, on acceptance, the conditional path
// to splice. Rejection certifies that Z never returns to the pre-drop level,
// so the arrival epoch preceding the drop satisfies M(tau) = Z(tau).
//
// Proposals are exponentially tilted: K ~ w, arrivals at rate
// lambda phi(theta_K e_K), jumps from the tilted joint law; a proposal is
// accepted with probability 1 / sum_k w_k exp(theta_k Z_k(T_m)).

#include <Eigen/Dense>
#include <cstdint>

#include "rbnet/errors.hpp"
#include "rbnet/network.hpp"
#include "rbnet/path.hpp"
#include "rbnet/random.hpp"
#include "rbnet/skorokhod.hpp"

namespace rbnet {

inline constexpr long kCpEventCap = 100000000;

struct CpCounters {
  long n_arrivals = 0;
  long n_tilted = 0;
  long n_bernoulli = 0;
  long total() const { return n_arrivals + n_tilted + n_bernoulli; }
};

struct TiltedSegment {
  int tilt_component = 0;
  MarkedPath path;  // Z increments over [0, T_m], jumps only, slope -mu_eff
  double duration = 0;
  VectorXd endpoint;
  long n_events = 0;
};

struct CoalescenceRecord {
  double tau = 0;       // certified: max_{s >= tau} Z_i(s) = Z_i(tau) for all i
  double drop_end = 0;  // end of the final drop segment kept for audits
  MarkedPath feed;      // true Z on [0, drop_end] (shift already removed)
  CpCounters counters;
};

// Reuses the profile's weights with a caller-chosen crossing level. The
// acceptance bound requires sum_k exp(-theta_k m) <= 1 (Condition 1).
inline TiltingProfile profile_with_level(TiltingProfile p, double m) {
  const int d = static_cast<int>(p.theta.size());
  double s = 0;
  for (int i = 0; i < d; ++i) s += std::exp(-p.theta[i] * m);
  if (s > 1.0) throw Error(Errc::ConfigError, "Condition 1 fails at the requested level");
  p.m = m;
  p.weights = VectorXd(d);
  double tot = 0;
  for (int i = 0; i < d; ++i) {
    p.weights[i] = std::exp(-p.theta[i] * m);
    tot += p.weights[i];
  }
  p.weights /= tot;
  return p;
}

// One proposal under the tilted measure, run until some component reaches m.
inline TiltedSegment sample_tilted_segment(const TiltingProfile& prof, const NetworkSpec& spec,
                                           std::uint64_t seed, std::uint64_t trial_id) {
  const int d = spec.dim();
  const VectorXd mu_eff = prof.mu_effective();
  auto kstream = make_stream(seed, tag::kCpTilt, trial_id, 0);
  // K ~ w
  int K = d - 1;
  {
    const double u = kstream.u01();
    double acc = 0;
    for (int i = 0; i < d; ++i) {
      acc += prof.weights[i];
      if (u <= acc) {
        K = i;
        break;
      }
    }
  }
  const double th = prof.theta[K];
  VectorXd unit = VectorXd::Zero(d);
  unit[K] = th;
  const double rate = spec.lambda * spec.jumps.mgf(unit);
  TiltedSegment seg;
  seg.tilt_component = K;
  seg.path = MarkedPath(d, 0.0, VectorXd::Zero(d));
  seg.path.append_breakpoint(0.0, VectorXd::Zero(d), -mu_eff);
  VectorXd z = VectorXd::Zero(d);
  double t = 0;
  for (long ev = 1;; ++ev) {
    if (ev > kCpEventCap) {
      throw Error(Errc::RuntimeCap, "tilted proposal exceeded the event cap");
    }
    auto rng = make_stream(seed, tag::kCpTilt, trial_id, static_cast<std::uint64_t>(ev));
    const double u = rng.exponential(rate);
    const VectorXd w = spec.jumps.sample_tilted(K, th, rng);
    z += w - u * mu_eff;
    t += u;
    seg.path.append_breakpoint(t, w, -mu_eff);
    ++seg.n_events;
    if ((z.array() >= prof.m).any()) break;
  }
  seg.duration = t;
  seg.endpoint = z;
  seg.path.set_horizon(t);
  return seg;
}

inline double ar_denominator(const TiltingProfile& prof, const VectorXd& endpoint) {
  double s = 0;
  for (int i = 0; i < static_cast<int>(endpoint.size()); ++i) {
    s += prof.weights[i] * std::exp(prof.theta[i] * endpoint[i]);
  }
  return s;
}

struct ConditionalPathTrial {
  bool accepted = false;
  TiltedSegment segment;
  double acceptance_probability = 0;
};

// One merged trial: the Bernoulli outcome has probability P_0(T_m < inf)
// and, on acceptance, the proposal is an exact draw from the conditional law
// of (Z(t): t <= T_m) given T_m < inf.
inline ConditionalPathTrial sample_conditional_path(const TiltingProfile& prof,
                                                    const NetworkSpec& spec, std::uint64_t seed,
                                                    std::uint64_t trial_id) {
  ConditionalPathTrial out;
  out.segment = sample_tilted_segment(prof, spec, seed, trial_id);
  const double s = ar_denominator(prof, out.segment.endpoint);
  if (s < 1.0 - 1e-9) {
    throw Error(Errc::ConfigError, "likelihood-ratio denominator below 1; Condition 1 violated");
  }
  out.acceptance_probability = 1.0 / s;
  auto bern = make_stream(seed, tag::kCpBernoulli, trial_id);
  out.accepted = bern.u01() <= out.acceptance_probability;
  return out;
}

inline CoalescenceRecord simulate_coalescence(const TiltingProfile& prof, const NetworkSpec& spec,
                                              std::uint64_t seed) {
  const int d = spec.dim();
  const VectorXd mu = prof.mu;               // true Z slope is -mu
  const VectorXd mu_eff = prof.mu_effective();
  CoalescenceRecord rec;
  rec.feed = MarkedPath(d, 0.0, VectorXd::Zero(d));
  rec.feed.append_breakpoint(0.0, VectorXd::Zero(d), -mu);
  double tau = 0;
  std::uint64_t arrival_id = 0, trial_id = 0;
  for (;;) {
    if (rec.counters.n_arrivals + rec.counters.n_tilted > kCpEventCap) {
      throw Error(Errc::RuntimeCap, "coalescence loop exceeded the event cap");
    }
    auto rng = make_stream(seed, tag::kCpArrival, arrival_id++);
    const double u = rng.exponential(spec.lambda);
    const VectorXd w = spec.jumps.sample(rng);
    rec.counters.n_arrivals += 1;
    rec.feed.append_breakpoint(tau + u, w, -mu);
    const bool drop = ((w - u * mu_eff).array() < -prof.m).all();
    if (!drop) {
      tau += u;
      continue;
    }
    // merged Bernoulli / conditional-path call
    rec.counters.n_bernoulli += 1;
    auto trial = sample_conditional_path(prof, spec, seed, trial_id++);
    rec.counters.n_tilted += trial.segment.n_events;
    if (trial.accepted) {
      // splice: the conditional path continues Z after the drop segment
      const double base = tau + u;
      const auto& sp = trial.segment.path;
      for (std::size_t i = 0; i < sp.n_breakpoints(); ++i) {
        if (sp.time(i) == 0.0 && sp.jump(i).isZero()) continue;
        rec.feed.append_breakpoint(base + sp.time(i), sp.jump(i), -mu);
      }
      tau = base + trial.segment.duration;
      continue;
    }
    // I = 0: the future never rises m above Z(tau + u); together with the
    // drop below -m this certifies M(tau) = Z(tau) at the pre-drop epoch.
    rec.tau = tau;
    rec.drop_end = tau + u;
    rec.feed.set_horizon(tau + u);
    return rec;
  }
}

// Reversed input for Algorithm 1 Step 2: X(t) = -Z(tau - t) - z (tau - t),
// zero-based. Upward jumps W at the reversed arrival epochs, slope -R r.
inline MarkedPath reversed_input(const CoalescenceRecord& rec, const NetworkSpec& spec) {
  const int d = spec.dim();
  const double tau = rec.tau;
  const VectorXd slope = -(spec.reflection.R * spec.service_rates);
  MarkedPath x(d, tau, VectorXd::Zero(d));
  // collect feed jumps with epoch <= tau, emit in reversed order
  std::vector<std::pair<double, std::size_t>> eps;
  for (std::size_t i = 0; i < rec.feed.n_breakpoints(); ++i) {
    const double s = rec.feed.time(i);
    if (s > 0 && s <= tau && !rec.feed.jump(i).isZero()) {
      eps.push_back({tau - s, i});
    }
  }
  std::sort(eps.begin(), eps.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  bool have_zero = false;
  for (const auto& [t, idx] : eps) {
    if (t == 0.0) have_zero = true;
    x.append_breakpoint(t, rec.feed.jump(idx), slope);
  }
  if (!have_zero && tau > 0) {
    // no arrival exactly at tau (possible only when tau = 0 handled below)
    MarkedPath x2(d, tau, VectorXd::Zero(d));
    x2.append_breakpoint(0.0, VectorXd::Zero(d), slope);
    for (const auto& [t, idx] : eps) x2.append_breakpoint(t, rec.feed.jump(idx), slope);
    return x2;
  }
  return x;
}

struct StationarySample {
  VectorXd y;
  CoalescenceRecord record;
};

// Algorithm 1: coalescence, reversal, forward Skorokhod solve from zero.
inline StationarySample sample_stationary(const NetworkSpec& spec, const TiltingProfile& prof,
                                          std::uint64_t seed) {
  StationarySample out;
  out.record = simulate_coalescence(prof, spec, seed);
  const int d = spec.dim();
  if (out.record.tau <= 0) {
    out.y = VectorXd::Zero(d);
    return out;
  }
  const MarkedPath x = reversed_input(out.record, spec);
  SkorokhodStepper st(spec.reflection.R, VectorXd::Zero(d));
  const std::size_t n = x.n_breakpoints();
  for (std::size_t i = 0; i < n; ++i) {
    st.jump(x.jump(i));
    const double seg_end = (i + 1 < n) ? x.time(i + 1) : x.horizon();
    st.advance(seg_end - x.time(i), x.slope(i));
  }
  out.y = st.y();
  return out;
}

}  // namespace rbnet
