#pragma once

// Counter-based splittable randomness. Every logical random object in a
// replication draws from its own stream, keyed by (seed, tag, indices).
// Streams are splitmix64 sequences; the key derivation below is frozen and
// test-vectored so other implementations can reproduce runs bit-for-bit.

#include <cmath>
#include <cstdint>
#include <limits>

namespace rbnet {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 output mix (Vigna).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}
  std::uint64_t next() {
    state_ += kGolden;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

// Key folding: fold(h, v) = mix64(h + kGolden + v). Order-sensitive.
inline std::uint64_t key_fold(std::uint64_t h, std::uint64_t v) {
  return mix64(h + kGolden + v);
}

template <typename... Idx>
std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag, Idx... idx) {
  std::uint64_t h = key_fold(seed, tag);
  ((h = key_fold(h, static_cast<std::uint64_t>(idx))), ...);
  return h;
}

// Stream tags. Values are part of the reproducibility contract.
namespace tag {
inline constexpr std::uint64_t kReplication = 0x01;
inline constexpr std::uint64_t kCpArrival = 0x10;
inline constexpr std::uint64_t kCpTilt = 0x11;
inline constexpr std::uint64_t kCpBernoulli = 0x12;
inline constexpr std::uint64_t kWalkPlain = 0x20;
inline constexpr std::uint64_t kWalkTilt = 0x21;
inline constexpr std::uint64_t kWalkBernoulli = 0x22;
inline constexpr std::uint64_t kWalkStretch = 0x23;
inline constexpr std::uint64_t kCoeff = 0x30;
inline constexpr std::uint64_t kCoeffW0 = 0x31;
inline constexpr std::uint64_t kRecordU = 0x32;
inline constexpr std::uint64_t kRecordAR = 0x33;
inline constexpr std::uint64_t kMRoundU = 0x34;
inline constexpr std::uint64_t kMRoundAR = 0x35;
inline constexpr std::uint64_t kEstimatorT = 0x40;
}  // namespace tag

// Standard normal quantile, Wichura's algorithm AS 241 (PPND16).
// Accurate to ~1e-15 over p in (0,1), including far tails.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return (q < 0.0) ? -value : value;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
// P(W > x) for standard normal.
inline double normal_tail(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }
// P(|W| > x), x >= 0.
inline double normal_two_sided_tail(double x) { return std::erfc(x * M_SQRT1_2); }

class RngStream {
 public:
  RngStream() : sm_(0) {}
  explicit RngStream(std::uint64_t key) : sm_(key) {}

  std::uint64_t next_u64() { return sm_.next(); }

  // Uniform on the open interval (0,1); never returns an endpoint.
  double u01() {
    return (static_cast<double>(sm_.next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_quantile(u01()); }

  double exponential(double rate) { return -std::log(u01()) / rate; }

  // Standard normal conditioned on |W| <= b.
  double normal_trunc_sym(double b) {
    if (!std::isfinite(b)) return normal();
    const double pl = normal_cdf(-b);
    return normal_quantile(pl + u01() * (1.0 - 2.0 * pl));
  }

  // Standard normal conditioned on lo < |W| <= hi (record/exceedance draw).
  double normal_band(double lo, double hi) {
    const double sign = (sm_.next() & 1ull) ? 1.0 : -1.0;
    const double th = std::isfinite(hi) ? normal_tail(hi) : 0.0;
    const double tl = normal_tail(lo);
    // magnitude quantile: tail probability uniform on [th, tl)
    const double pp = th + u01() * (tl - th);
    return sign * (-normal_quantile(pp));
  }

 private:
  SplitMix64 sm_;
};

template <typename... Idx>
RngStream make_stream(std::uint64_t seed, std::uint64_t t, Idx... idx) {
  return RngStream(derive_key(seed, t, idx...));
}

}  // namespace rbnet
