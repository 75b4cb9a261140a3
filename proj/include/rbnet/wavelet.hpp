#pragma once

// Tolerance-enforced wavelet construction of Brownian motion. Per unit
// interval and component the Schauder series is truncated at
// K = K0 \/ (last record), where records are the indices with
// |W^k| > eta_k = 4 sqrt(log k). Exceedance indicators are sampled lazily:
// a uniform is compared against the product prod (1 - p(k)) through a
// sandwich whose tail uses p(k) <= k^{-4}; a finite exceedance index is then
// drawn by acceptance/rejection with proposal mass k^{-4} (the target is
// dominated by it pointwise, so the likelihood ratio is <= 1 with c = 1).
//
// The store persists every verdict and every explicitly drawn value; the
// remaining coefficients are deterministic functions of (seed, n, i, k) and
// the constraint state frozen when their interval was first probed, so any
// re-evaluation -- including coupled epsilon-refinement -- reproduces the
// same Brownian path bit for bit.
//
// Bound rounds (registered by the RBM coalescence machinery) certify
// |W_n^k(i)| <= 4 sqrt(log n_rel) + 4 sqrt(log k) over all pairs of a round;
// exceedances are drawn eagerly and stored. Intervals already probed are
// deterministic for later rounds: every non-explicit coefficient obeys
// |W| <= eta_k, which never exceeds the pair envelope for n_rel >= 1.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "rbnet/errors.hpp"
#include "rbnet/random.hpp"

namespace rbnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double eta_k(long k) { return k <= 1 ? 0.0 : 4.0 * std::sqrt(std::log(double(k))); }

inline int level_of(long k) { return 63 - __builtin_clzll(static_cast<unsigned long long>(k)); }

inline double schauder_peak(int j) { return std::pow(2.0, -0.5 * j - 1.0); }

// T(J) = sum_{j >= J} 2^{-j/2} sqrt(j+1), direct summation plus a geometric
// remainder bound.
inline double tail_T(int J) {
  double s = 0;
  int j = J;
  for (; j < J + 220; ++j) s += std::pow(2.0, -0.5 * j) * std::sqrt(j + 1.0);
  s += std::pow(2.0, -0.5 * j) * std::sqrt(j + 1.0) / (1.0 - std::pow(2.0, -0.5)) * 1.05;
  return s;
}

// Certified truncation error of dropping all levels >= J when every dropped
// coefficient obeys |W^k| <= eta_k: sum_{j>=J} 2^{-j/2-1} * 4 sqrt(log 2^{j+1}).
inline double certified_tail_bound(int J) {
  return 2.0 * std::sqrt(std::log(2.0)) * tail_T(J);
}

// Smallest power of two K0 = 2^J whose certified tail bound is below the
// per-component tolerance.
inline std::pair<long, int> choose_K0(double eps_component) {
  if (!(eps_component > 0)) throw Error(Errc::ConfigError, "tolerance must be positive");
  for (int J = 0; J < 63; ++J) {
    if (certified_tail_bound(J) < eps_component) return {1L << J, J};
  }
  throw Error(Errc::ConfigError, "tolerance too small for the dyadic ladder");
}

// P(|W| > eta | |W| <= ub) for a standard normal.
inline double cond_exceed_prob(double eta, double ub) {
  if (!(ub > eta)) return 0.0;
  const double te = normal_two_sided_tail(eta);
  if (!std::isfinite(ub)) return te;
  const double tb = normal_two_sided_tail(ub);
  return (te - tb) / (1.0 - tb);
}

namespace detail {

// zeta(4) minus the first `upto` terms: normalizer of the k^{-4} proposal.
inline double zeta4_tail(long upto) {
  const double z4 = 1.0823232337111382;  // pi^4 / 90
  double s = 0;
  for (long j = 1; j <= upto; ++j) s += 1.0 / (double(j) * j * j * j);
  return z4 - s;
}

// Verdict: does any index k > from carry an exceedance? ptilde(k) must
// satisfy ptilde(k) <= k^{-4}. The verdict equals 1{u > prod (1 - ptilde)},
// resolved by evaluating only as many factors as the comparison needs.
template <typename P>
bool exceedance_exists(double u, long from, P&& ptilde) {
  double logprod = 0.0;  // over (from, cursor]
  long cursor = from;
  for (int rounds = 0; rounds < 8000; ++rounds) {
    const double prod = std::exp(logprod);
    const double tail = cursor >= 1 ? std::min(1.0, std::pow(double(cursor), -3.0)) : 1.0;
    if (u <= prod * (1.0 - tail)) return false;
    if (u > prod) return true;
    const long target = cursor + std::max<long>(1, cursor / 2);
    for (long k = cursor + 1; k <= target; ++k) {
      const double p = ptilde(k);
      if (p >= 1.0) {
        logprod = -std::numeric_limits<double>::infinity();
      } else if (p > 0) {
        logprod += std::log1p(-p);
      }
    }
    cursor = target;
  }
  throw Error(Errc::ConfigError, "exceedance verdict failed to resolve");
}

// Given that an exceedance exists beyond `from`, draw its index by AR with
// proposal mass k^{-4} on {from+1, ...}: the target p(G) prod (1 - p(k)) is
// dominated by G^{-4} pointwise.
template <typename P>
long sample_exceedance_index(long from, P&& ptilde, RngStream& rng) {
  const double c4 = zeta4_tail(from);
  for (int trial = 0; trial < 1000000; ++trial) {
    const double v = rng.u01() * c4;
    long g = from + 1;
    double acc = std::pow(double(g), -4.0);
    while (acc < v) {
      ++g;
      acc += std::pow(double(g), -4.0);
    }
    double num = std::max(0.0, ptilde(g));
    for (long k = from + 1; k < g && num > 0; ++k) {
      const double pk = ptilde(k);
      if (pk >= 1.0) num = 0;
      else if (pk > 0) num *= 1.0 - pk;
    }
    const double lr = num * std::pow(double(g), 4.0);
    if (lr > 1.0 + 1e-9) throw Error(Errc::ConfigError, "exceedance AR ratio above 1");
    if (rng.u01() <= lr) return g;
  }
  throw Error(Errc::RuntimeCap, "exceedance AR did not accept");
}

}  // namespace detail

class WaveletStore {
 public:
  WaveletStore(std::uint64_t seed, int d, MatrixXd A, double eps_total)
      : seed_(seed), d_(d), A_(std::move(A)) {
    a_max_ = A_.cwiseAbs().maxCoeff();
    row_abs_max_ = A_.cwiseAbs().rowwise().sum().maxCoeff();
    set_eps(eps_total);
  }

  int dim() const { return d_; }
  const MatrixXd& A() const { return A_; }
  double a_max() const { return a_max_; }
  double row_abs_max() const { return row_abs_max_; }
  double eps() const { return eps_; }
  double eps_component() const { return eps_comp_; }
  long K0() const { return K0_; }
  int J0() const { return J0_; }
  std::uint64_t seed() const { return seed_; }

  void refine(double new_eps) {
    if (new_eps == eps_) return;  // replaying the same tolerance is a no-op
    if (new_eps > eps_) {
      throw Error(Errc::RefinementOrderViolation, "refinement must decrease the tolerance");
    }
    set_eps(new_eps);
  }

  // ---- walk-level randomness --------------------------------------------
  double w0(long n, int i) {
    const std::uint64_t key = pack_ni(n, i);
    auto it = w0_.find(key);
    if (it != w0_.end()) return it->second;
    const double v = make_stream(seed_, tag::kCoeffW0, n, i).normal();
    w0_.emplace(key, v);
    return v;
  }
  void set_w0(long n, int i, double v) { w0_[pack_ni(n, i)] = v; }

  // ---- bound rounds -------------------------------------------------------
  static double pair_envelope(long n_rel, long k) {
    const double ln = n_rel <= 1 ? 0.0 : std::log(double(n_rel));
    const double lk = k <= 1 ? 0.0 : std::log(double(k));
    return 4.0 * std::sqrt(ln) + 4.0 * std::sqrt(lk);
  }

  // Registers a bound round anchored at `anchor` and samples, per component,
  // the last pair product n_rel * k (n_rel >= 1) whose coefficient exceeds
  // the double envelope. Exceedances are drawn eagerly; every other pair of
  // the round is certified below the envelope from here on.
  std::vector<long> sample_round_exceedances(long anchor) {
    const long round_id = static_cast<long>(rounds_.size());
    std::vector<long> m_i(d_, 0);
    for (int i = 0; i < d_; ++i) {
      m_i[i] = sample_component_round(anchor, round_id, i);
    }
    rounds_.push_back(anchor);
    return m_i;
  }
  long n_rounds() const { return static_cast<long>(rounds_.size()); }

  // Upper bound in force for coefficient (n, i, k) under the first
  // `watermark` rounds. The always-exceeding product-1 pair carries no
  // certificate and is skipped.
  double upper_bound(long n, int /*i*/, long k, long watermark) const {
    double ub = std::numeric_limits<double>::infinity();
    for (long r = 0; r < watermark && r < static_cast<long>(rounds_.size()); ++r) {
      const long n_rel = n - rounds_[r];
      if (n_rel >= 1 && !(n_rel == 1 && k == 1)) {
        ub = std::min(ub, pair_envelope(n_rel, k));
      }
    }
    return ub;
  }
  double upper_bound_now(long n, int i, long k) const {
    return upper_bound(n, i, k, static_cast<long>(rounds_.size()));
  }

  // ---- exceedance state and coefficients ----------------------------------
  struct IntervalState {
    bool probed = false;
    long watermark = 0;  // rounds visible to this interval's draws
    long k_built = 0;    // high-water mark for the complexity counter
    std::vector<std::pair<long, double>> exceeders;  // |W^k| > eta_k, sorted
  };

  const IntervalState& interval_state(long n, int i) {
    IntervalState& st = states_[pack_ni(n, i)];
    if (!st.probed) probe_interval(n, i, st);
    return st;
  }

  // Records in the paper's sense: exceedance indices above K0.
  std::vector<std::pair<long, double>> records(long n, int i) {
    std::vector<std::pair<long, double>> out;
    for (const auto& e : interval_state(n, i).exceeders) {
      if (e.first > K0_) out.push_back(e);
    }
    return out;
  }

  long K_of(long n, int i) {
    const auto& st = interval_state(n, i);
    long K = K0_;
    if (!st.exceeders.empty()) K = std::max(K, st.exceeders.back().first);
    return K;
  }

  // Every coefficient is either an explicitly stored exceedance or a
  // deterministic truncated draw under |W| <= min(eta_k, round bounds).
  double coefficient(long n, int i, long k) {
    const auto& st = interval_state(n, i);
    auto ex = explicit_.find(pack_nik(n, i, k));
    if (ex != explicit_.end()) return ex->second;
    const double ub = std::min(eta_k(k), upper_bound(n, i, k, st.watermark));
    auto rng = make_stream(seed_, tag::kCoeff, n, i, k);
    return rng.normal_trunc_sym(ub);
  }

  // Bridge values sum_k W^k S_k on the dyadic grid of step 2^{-(J+1)},
  // including every kept coefficient of the interval (zeros beyond K).
  std::vector<double> bridge_grid(long n, int i, int J) {
    const long N = 1L << (J + 1);
    std::vector<double> g(static_cast<std::size_t>(N) + 1, 0.0);
    const long K = K_of(n, i);
    count_built(n, i, K);
    for (int j = 0; j <= J; ++j) {
      const long lvl = 1L << j;
      const long width = N >> j;
      const double peak = schauder_peak(j);
      for (long l = 0; l < lvl; ++l) {
        const long k = lvl + l;
        const long left = l * width;
        const long mid = left + width / 2;
        const long right = left + width;
        double w = 0.0;
        if (k <= K) w = coefficient(n, i, k);
        g[static_cast<std::size_t>(mid)] =
            0.5 * (g[static_cast<std::size_t>(left)] + g[static_cast<std::size_t>(right)]) +
            peak * w;
      }
    }
    return g;
  }

  long coefficients_drawn() const { return coeff_counter_; }

 private:
  void set_eps(double eps_total) {
    eps_ = eps_total;
    eps_comp_ = eps_total / (d_ * std::max(a_max_, 1e-300));
    auto [k0, j0] = choose_K0(eps_comp_);
    K0_ = k0;
    J0_ = j0;
  }

  static std::uint64_t pack_ni(long n, int i) {
    return (static_cast<std::uint64_t>(n) << 16) | static_cast<std::uint64_t>(i);
  }
  static std::uint64_t pack_nik(long n, int i, long k) {
    // n < 2^32, i < 2^5, k < 2^27
    return (static_cast<std::uint64_t>(n) << 32) | (static_cast<std::uint64_t>(i) << 27) |
           static_cast<std::uint64_t>(k);
  }

  void count_built(long n, int i, long K) {
    IntervalState& st = states_[pack_ni(n, i)];
    if (K > st.k_built) {
      coeff_counter_ += K - st.k_built;
      st.k_built = K;
    }
  }

  // Samples the full exceedance set {k >= 1: |W^k| > eta_k} of one interval
  // and draws those values eagerly. k = 1 has eta = 0 and always exceeds.
  void probe_interval(long n, int i, IntervalState& st) {
    st.probed = true;
    st.watermark = static_cast<long>(rounds_.size());
    auto ptilde = [&](long k) {
      if (explicit_.count(pack_nik(n, i, k))) return 0.0;
      return cond_exceed_prob(eta_k(k), upper_bound(n, i, k, st.watermark));
    };
    // exceedances drawn by earlier bound rounds are exceeders already
    for (const auto& [key, val] : explicit_) {
      if ((key >> 32) == static_cast<std::uint64_t>(n) &&
          ((key >> 27) & 0x1f) == static_cast<std::uint64_t>(i)) {
        const long k = static_cast<long>(key & ((1L << 27) - 1));
        if (std::fabs(val) > eta_k(k)) st.exceeders.push_back({k, val});
      }
    }
    long cur = 0;
    for (long round = 0;; ++round) {
      auto uver = make_stream(seed_, tag::kRecordU, n, i, round);
      if (!detail::exceedance_exists(uver.u01(), cur, ptilde)) break;
      auto arng = make_stream(seed_, tag::kRecordAR, n, i, round);
      const long g = detail::sample_exceedance_index(cur, ptilde, arng);
      auto vrng = make_stream(seed_, tag::kCoeff, n, i, g);
      const double v = vrng.normal_band(eta_k(g), upper_bound(n, i, g, st.watermark));
      explicit_.emplace(pack_nik(n, i, g), v);
      st.exceeders.push_back({g, v});
      cur = g;
    }
    std::sort(st.exceeders.begin(), st.exceeders.end());
    coeff_counter_ += static_cast<long>(st.exceeders.size());
  }

  // One component of a bound round. Pairs are enumerated by product; the
  // product-level hazard 1 - prod_pairs (1 - p_pair) obeys the p <= idx^{-4}
  // domination, so the same lazy machinery applies. Within an exceeding
  // product the exceeder subset is drawn sequentially-conditionally.
  long sample_component_round(long anchor, long round_id, int i) {
    auto pair_prob = [&](long n_rel, long k) -> double {
      const long n_abs = anchor + n_rel;
      if (explicit_.count(pack_nik(n_abs, i, k))) return -1.0;  // deterministic
      auto stit = states_.find(pack_ni(n_abs, i));
      if (stit != states_.end() && stit->second.probed) return -1.0;
      return cond_exceed_prob(pair_envelope(n_rel, k), upper_bound_now(n_abs, i, k));
    };
    auto prod_prob = [&](long p) -> double {
      double keep = 1.0;
      for (long n_rel = 1; n_rel <= p; ++n_rel) {
        if (p % n_rel) continue;
        const double pp = pair_prob(n_rel, p / n_rel);
        if (pp > 0) keep *= 1.0 - pp;
      }
      return 1.0 - keep;
    };
    // deterministic part: stored values over this round's pair grid
    long m_known = 0;
    for (const auto& [key, val] : explicit_) {
      if (((key >> 27) & 0x1f) != static_cast<std::uint64_t>(i)) continue;
      const long n_abs = static_cast<long>(key >> 32);
      const long k = static_cast<long>(key & ((1L << 27) - 1));
      const long n_rel = n_abs - anchor;
      if (n_rel >= 1 && std::fabs(val) > pair_envelope(n_rel, k)) {
        m_known = std::max(m_known, n_rel * k);
      }
    }
    long cur = 0;  // current product position
    for (long step = 0;; ++step) {
      auto uver = make_stream(seed_, tag::kMRoundU, static_cast<std::uint64_t>(round_id), i, step);
      if (!detail::exceedance_exists(uver.u01(), cur, prod_prob)) break;
      auto arng = make_stream(seed_, tag::kMRoundAR, static_cast<std::uint64_t>(round_id), i, step);
      const long p = detail::sample_exceedance_index(cur, prod_prob, arng);
      // the exceeder subset of product p, conditioned on being nonempty
      std::vector<std::pair<long, double>> cand;  // (n_rel, hazard)
      for (long n_rel = 1; n_rel <= p; ++n_rel) {
        if (p % n_rel) continue;
        const double pp = pair_prob(n_rel, p / n_rel);
        if (pp > 0) cand.push_back({n_rel, pp});
      }
      if (cand.empty()) throw Error(Errc::ConfigError, "empty exceedance product");
      // sequential-conditional first exceeder, then unconditional tail
      std::vector<long> exceed;
      double rest = 1.0;
      for (const auto& c : cand) rest *= 1.0 - c.second;
      const double none = rest;
      double u = arng.u01() * (1.0 - none);
      std::size_t first = cand.size() - 1;
      double pref = 1.0;
      for (std::size_t idx = 0; idx < cand.size(); ++idx) {
        const double mass = pref * cand[idx].second;
        if (u <= mass || idx + 1 == cand.size()) {
          first = idx;
          break;
        }
        u -= mass;
        pref *= 1.0 - cand[idx].second;
      }
      exceed.push_back(cand[first].first);
      for (std::size_t idx = first + 1; idx < cand.size(); ++idx) {
        if (arng.u01() <= cand[idx].second) exceed.push_back(cand[idx].first);
      }
      for (long n_rel : exceed) {
        const long k = p / n_rel;
        const long n_abs = anchor + n_rel;
        auto vrng = make_stream(seed_, tag::kCoeff, n_abs, i, k);
        const double env = pair_envelope(n_rel, k);
        const double v = vrng.normal_band(env, upper_bound_now(n_abs, i, k));
        explicit_.emplace(pack_nik(n_abs, i, k), v);
        ++coeff_counter_;
      }
      cur = p;
    }
    return std::max(cur, m_known);
  }

  std::uint64_t seed_;
  int d_;
  MatrixXd A_;
  double a_max_ = 1, row_abs_max_ = 1;
  double eps_ = 0, eps_comp_ = 0;
  long K0_ = 1;
  int J0_ = 0;
  std::vector<long> rounds_;  // anchors
  std::unordered_map<std::uint64_t, IntervalState> states_;
  std::unordered_map<std::uint64_t, double> explicit_;
  std::unordered_map<std::uint64_t, double> w0_;
  long coeff_counter_ = 0;
};

// Evaluated output path A B-tilde on dyadic grids, one block per unit
// interval. Grid levels can differ across intervals when a record pushes a
// single interval's truncation higher.
struct PolylinePath {
  int d = 0;
  long T = 0;
  double eps = 0;
  struct Block {
    int J;
    MatrixXd vals;  // d x (2^{J+1} + 1)
  };
  std::vector<Block> blocks;

  VectorXd value(double t) const {
    if (t <= 0) return blocks.front().vals.col(0);
    long n = static_cast<long>(std::floor(t));
    double s = t - double(n);
    if (n >= T) {
      n = T - 1;
      s = 1.0;
    }
    const Block& b = blocks[static_cast<std::size_t>(n)];
    const long N = (1L << (b.J + 1));
    const double x = s * double(N);
    const long p = std::min<long>(static_cast<long>(std::floor(x)), N - 1);
    const double frac = x - double(p);
    return b.vals.col(p) * (1.0 - frac) + b.vals.col(p + 1) * frac;
  }

  VectorXd integer_value(long n) const {
    if (n == 0) return blocks.front().vals.col(0);
    const Block& b = blocks[static_cast<std::size_t>(n - 1)];
    return b.vals.col(b.vals.cols() - 1);
  }
};

// Builds the epsilon-approximation over [0, T] (integer horizon) from the
// store's randomness. Repeated calls, including after refinement, evaluate
// the same underlying Brownian path.
inline PolylinePath build_path(WaveletStore& store, long T) {
  const int d = store.dim();
  PolylinePath out;
  out.d = d;
  out.T = T;
  out.eps = store.eps();
  VectorXd base = VectorXd::Zero(d);
  for (long n = 0; n < T; ++n) {
    int J = store.J0();
    for (int i = 0; i < d; ++i) J = std::max(J, level_of(store.K_of(n, i)));
    const long N = 1L << (J + 1);
    MatrixXd btil(d, N + 1);
    for (int i = 0; i < d; ++i) {
      const double w0 = store.w0(n, i);
      const auto g = store.bridge_grid(n, i, J);
      for (long p = 0; p <= N; ++p) {
        btil(i, p) = base[i] + w0 * double(p) / double(N) + g[static_cast<std::size_t>(p)];
      }
    }
    PolylinePath::Block blk;
    blk.J = J;
    blk.vals = store.A() * btil;
    base = btil.col(N);
    out.blocks.push_back(std::move(blk));
  }
  return out;
}

inline PolylinePath refine(WaveletStore& store, double new_eps, long T) {
  store.refine(new_eps);
  return build_path(store, T);
}

// Max gap between two evaluations of the same path at different tolerances,
// probed on the finer grid (polyline extrema sit on grid points).
inline double sup_distance_on_grids(const PolylinePath& coarse, const PolylinePath& fine) {
  double worst = 0;
  for (long n = 0; n < fine.T; ++n) {
    const auto& b = fine.blocks[static_cast<std::size_t>(n)];
    const long N = 1L << (b.J + 1);
    for (long p = 0; p <= N; ++p) {
      const double t = double(n) + double(p) / double(N);
      worst = std::max(worst, (coarse.value(t) - b.vals.col(p)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace rbnet
