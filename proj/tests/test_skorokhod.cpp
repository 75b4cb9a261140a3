#include <catch2/catch_amalgamated.hpp>

#include "rbnet/network.hpp"
#include "rbnet/random.hpp"
#include "rbnet/skorokhod.hpp"

using namespace rbnet;

namespace {

VectorXd v1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}
VectorXd v2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

MatrixXd random_routing(int d, RngStream& rng) {
  MatrixXd Q(d, d);
  for (int i = 0; i < d; ++i) {
    double row = 0;
    for (int j = 0; j < d; ++j) {
      Q(i, j) = (i == j) ? 0.0 : rng.u01();
      row += Q(i, j);
    }
    const double target = 0.85 * rng.u01();
    if (row > 0) {
      for (int j = 0; j < d; ++j) Q(i, j) *= target / row;
    }
  }
  return Q;
}

MarkedPath random_polyline(int d, double horizon, RngStream& rng, bool mixed_jumps) {
  MarkedPath p(d, horizon, VectorXd::Zero(d));
  double t = 0;
  bool first = true;
  while (t < horizon) {
    VectorXd jump(d), slope(d);
    for (int i = 0; i < d; ++i) {
      jump[i] = first ? 0.0 : (mixed_jumps ? rng.normal() : rng.exponential(2.0));
      slope[i] = 2.0 * rng.normal();
    }
    p.append_breakpoint(t, jump, slope);
    t += 0.05 + rng.exponential(4.0);
    first = false;
  }
  return p;
}

// Fine-grid Euler discretization of the Skorokhod map: one instantaneous
// LCP projection per step. Independent oracle for solve().
VectorXd euler_skorokhod_end(const MarkedPath& X, const MatrixXd& R, VectorXd y,
                             double h, const std::function<void(double, const VectorXd&)>& probe) {
  const double T = X.horizon();
  VectorXd x_prev = X.value(0.0) - X.init();
  y += x_prev;  // jump at zero
  {
    VectorXd l = lcp_pgs(R, y);
    y += R * l;
    y = y.cwiseMax(0.0);
  }
  for (double t = h; t <= T + 1e-12; t += h) {
    const VectorXd x = X.value(std::min(t, T)) - X.init();
    y += x - x_prev;
    x_prev = x;
    VectorXd l = lcp_pgs(R, y);
    y += R * l;
    y = y.cwiseMax(0.0);
    if (probe) probe(std::min(t, T), y);
  }
  return y;
}

}  // namespace

TEST_CASE("one-dimensional drain: closed form") {
  MarkedPath X(1, 1.0, v1(0.0));
  X.append_breakpoint(0.0, v1(0.0), v1(-1.0));
  auto sol = solve(X, MatrixXd::Identity(1, 1), v1(0.5));
  for (double t : {0.1, 0.3, 0.5, 0.7, 1.0}) {
    CHECK(sol.Y.value(t)[0] == Catch::Approx(std::max(0.5 - t, 0.0)).margin(1e-12));
    CHECK(sol.L.value(t)[0] == Catch::Approx(std::max(t - 0.5, 0.0)).margin(1e-12));
  }
}

TEST_CASE("two stations pinned at zero push at the LCP rates") {
  MatrixXd R(2, 2);
  R << 1, 0, -0.5, 1;
  MarkedPath X(2, 1.0, v2(0, 0));
  X.append_breakpoint(0.0, v2(0, 0), v2(-1, -1));
  auto sol = solve(X, R, v2(0, 0));
  CHECK(sol.Y.value(0.7).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sol.L.value(1.0)[0] == Catch::Approx(1.0).margin(1e-10));
  CHECK(sol.L.value(1.0)[1] == Catch::Approx(1.5).margin(1e-10));
}

TEST_CASE("orthogonal closed form: pure drain and tent path") {
  MarkedPath Z1(1, 1.0, v1(0.0));
  Z1.append_breakpoint(0.0, v1(0.0), v1(-1.0));
  auto s1 = solve_orthogonal(Z1);
  CHECK(s1.Y.value(1.0)[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(s1.L.value(1.0)[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(s1.L.value(0.4)[0] == Catch::Approx(0.4).margin(1e-12));

  MarkedPath Z2(1, 2.0, v1(0.0));
  Z2.append_breakpoint(0.0, v1(0.0), v1(1.0));
  Z2.append_breakpoint(1.0, v1(0.0), v1(-2.0));
  auto s2 = solve_orthogonal(Z2);
  CHECK(s2.Y.value(2.0)[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(s2.L.value(2.0)[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(s2.Y.value(1.0)[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("orthogonal formula equals the event-driven solver with R = I") {
  auto rng = make_stream(21, tag::kReplication, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + static_cast<int>(rng.u01() * 3);
    const MarkedPath Z = random_polyline(d, 2.0, rng, true);
    auto a = solve_orthogonal(Z);
    auto b = solve(Z, MatrixXd::Identity(d, d), VectorXd::Zero(d));
    for (std::size_t i = 0; i < Z.n_breakpoints(); ++i) {
      const double t = Z.time(i);
      REQUIRE((a.Y.value(t) - b.Y.value(t)).cwiseAbs().maxCoeff() < 1e-12);
      REQUIRE((a.L.value(t) - b.L.value(t)).cwiseAbs().maxCoeff() < 1e-12);
    }
    REQUIRE((a.Y.end_value() - b.Y.end_value()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("negative jump resolves by instantaneous projection") {
  MarkedPath X(1, 1.0, v1(0.0));
  X.append_breakpoint(0.0, v1(0.3), v1(0.0));
  X.append_breakpoint(0.5, v1(-1.0), v1(0.0));
  auto sol = solve(X, MatrixXd::Identity(1, 1), v1(0.0));
  CHECK(sol.Y.value(0.4)[0] == Catch::Approx(0.3).margin(1e-12));
  CHECK(sol.Y.value(0.5)[0] == 0.0);
  CHECK(sol.L.value(0.5)[0] == Catch::Approx(0.7).margin(1e-12));
  auto rep = check_solution(X, MatrixXd::Identity(1, 1), sol);
  CHECK(rep.max_violation() < 1e-10);
}

TEST_CASE("check_solution flags a corrupted regulator") {
  MatrixXd R(2, 2);
  R << 1, -0.2, -0.3, 1;
  auto rng = make_stream(33, tag::kReplication, 0);
  const MarkedPath X = random_polyline(2, 2.0, rng, true);
  auto sol = solve(X, R, v2(0.1, 0.2));
  auto rep = check_solution(X, R, sol);
  CHECK(rep.max_violation() < 1e-10);

  // corrupt: add 0.1 to one L segment slope
  SkorokhodSolution bad = sol;
  MarkedPath L2(2, bad.L.horizon(), bad.L.init());
  for (std::size_t i = 0; i < bad.L.n_breakpoints(); ++i) {
    VectorXd sl = bad.L.slope(i);
    if (i == 1) sl[0] += 0.1;
    L2.append_breakpoint(bad.L.time(i), bad.L.jump(i), sl);
  }
  bad.L = L2;
  auto rep2 = check_solution(X, R, bad);
  CHECK(rep2.identity > 1e-4);
}

TEST_CASE("zero path solves to all zeros") {
  MarkedPath X(2, 1.0, v2(0, 0));
  X.append_breakpoint(0.0, v2(0, 0), v2(0, 0));
  auto sol = solve(X, MatrixXd::Identity(2, 2), v2(0, 0));
  auto rep = check_solution(X, MatrixXd::Identity(2, 2), sol);
  CHECK(rep.max_violation() == 0.0);
  CHECK(sol.Y.end_value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("agrees with fine-grid Euler on random inputs") {
  auto rng = make_stream(55, tag::kReplication, 1);
  for (int trial = 0; trial < 12; ++trial) {
    const int d = 1 + static_cast<int>(rng.u01() * 3);
    const MatrixXd R = ReflectionMatrix::from_routing(random_routing(d, rng)).R;
    const MarkedPath X = random_polyline(d, 1.5, rng, true);
    VectorXd y0(d);
    for (int i = 0; i < d; ++i) y0[i] = rng.u01();
    auto sol = solve(X, R, y0);
    double worst = 0;
    auto probe = [&](double t, const VectorXd& y) {
      worst = std::max(worst, (y - sol.Y.value(t)).cwiseAbs().maxCoeff());
    };
    euler_skorokhod_end(X, R, y0, 1e-4, probe);
    REQUIRE(worst < 1e-2);
    auto rep = check_solution(X, R, sol);
    REQUIRE(rep.max_violation() < 1e-10);
  }
}

TEST_CASE("comparison with the orthogonally reflected dominating process") {
  auto rng = make_stream(77, tag::kReplication, 2);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 2 + static_cast<int>(rng.u01() * 2);
    const auto rm = ReflectionMatrix::from_routing(random_routing(d, rng));
    // compound-Poisson-like input: upward jumps, drain slope -R r; the
    // arrival rate is chosen to keep the network stable
    VectorXd r = VectorXd::Ones(d);
    const VectorXd ew = VectorXd::Constant(d, 0.25);
    const VectorXd load = rm.R_inv * ew;
    double lambda = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) lambda = std::min(lambda, r[i] / load[i]);
    lambda *= 0.5;
    MarkedPath X(d, 4.0, VectorXd::Zero(d));
    double t = 0;
    bool first = true;
    while (t < 4.0) {
      VectorXd jump(d);
      for (int i = 0; i < d; ++i) jump[i] = first ? 0.0 : rng.exponential(4.0);
      X.append_breakpoint(t, jump, -rm.R * r);
      t += rng.exponential(lambda);
      first = false;
    }
    NetworkSpec spec{rm, lambda, r,
                     JumpDistribution::independent_exponential(VectorXd::Constant(d, 4.0))};
    const VectorXd z = select_dominating_drift(spec);
    // Z = X - z t drives the dominating orthogonal problem
    MarkedPath Z(d, X.horizon(), X.init());
    for (std::size_t i = 0; i < X.n_breakpoints(); ++i) {
      Z.append_breakpoint(X.time(i), X.jump(i), X.slope(i) - z);
    }
    auto y = solve(X, rm.R, VectorXd::Zero(d));
    auto yp = solve_orthogonal(Z);
    for (std::size_t i = 0; i < y.Y.n_breakpoints(); ++i) {
      const double tt = y.Y.time(i);
      const VectorXd lhs = rm.R_inv * y.Y.value(tt);
      const VectorXd rhs = rm.R_inv * yp.Y.value(tt);
      REQUIRE((lhs - rhs).maxCoeff() < 1e-10);
      REQUIRE(lhs.minCoeff() > -1e-10);
    }
  }
}

TEST_CASE("monotone in the initial condition") {
  auto rng = make_stream(99, tag::kReplication, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2;
    const MarkedPath X = random_polyline(d, 2.0, rng, true);
    VectorXd y0(d), y0b(d);
    for (int i = 0; i < d; ++i) {
      y0[i] = rng.u01();
      y0b[i] = y0[i] + rng.u01();
    }
    // orthogonal reflection: componentwise order is preserved
    auto a = solve(X, MatrixXd::Identity(d, d), y0);
    auto b = solve(X, MatrixXd::Identity(d, d), y0b);
    for (std::size_t i = 0; i < a.Y.n_breakpoints(); ++i) {
      const double t = a.Y.time(i);
      REQUIRE((b.Y.value(t) - a.Y.value(t)).minCoeff() > -1e-10);
    }
    // general M-matrix: the R^{-1}-weighted order is asserted instead
    const auto rm = ReflectionMatrix::from_routing(random_routing(d, rng));
    auto c = solve(X, rm.R, y0);
    auto e = solve(X, rm.R, y0b);
    for (std::size_t i = 0; i < c.Y.n_breakpoints(); ++i) {
      const double t = c.Y.time(i);
      REQUIRE((rm.R_inv * (e.Y.value(t) - c.Y.value(t))).minCoeff() > -1e-10);
    }
  }
}

TEST_CASE("contraction under uniform perturbation of the input") {
  auto rng = make_stream(111, tag::kReplication, 4);
  const double eta = 1e-3;
  for (int trial = 0; trial < 15; ++trial) {
    const int d = 1 + static_cast<int>(rng.u01() * 3);
    const auto rm = ReflectionMatrix::from_routing(random_routing(d, rng));
    const double bound = lipschitz_bound(rm.R);
    const MarkedPath X = random_polyline(d, 2.0, rng, true);
    // perturb breakpoint values by at most eta, keeping times
    MarkedPath Xp(d, X.horizon(), X.init());
    VectorXd prev_err = VectorXd::Zero(d);
    for (std::size_t i = 0; i < X.n_breakpoints(); ++i) {
      VectorXd err(d);
      for (int c = 0; c < d; ++c) err[c] = eta * (2 * rng.u01() - 1);
      const double t1 = (i + 1 < X.n_breakpoints()) ? X.time(i + 1) : X.horizon();
      VectorXd next_err(d);
      for (int c = 0; c < d; ++c) next_err[c] = eta * (2 * rng.u01() - 1);
      VectorXd slope_adj = (next_err - err) / std::max(t1 - X.time(i), 1e-9);
      Xp.append_breakpoint(X.time(i), X.jump(i) + (err - prev_err), X.slope(i) + slope_adj);
      prev_err = next_err;
    }
    auto a = solve(X, rm.R, VectorXd::Zero(d));
    auto b = solve(Xp, rm.R, VectorXd::Zero(d));
    const double dist = sup_distance(a.Y, b.Y);
    REQUIRE(dist <= bound * eta * (1 + 1e-6));
  }
}
