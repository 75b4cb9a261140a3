#include <catch2/catch_amalgamated.hpp>

#include "rbnet/lcp.hpp"
#include "rbnet/network.hpp"
#include "rbnet/random.hpp"

using namespace rbnet;

namespace {

// Independent oracle: enumerate active sets (d <= 3) and solve each linear
// system; returns the complementarity solution.
Eigen::VectorXd lcp_enumerate(const Eigen::MatrixXd& R, const Eigen::VectorXd& q) {
  const int n = static_cast<int>(q.size());
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) act.push_back(i);
    }
    const int m = static_cast<int>(act.size());
    Eigen::MatrixXd Rs(m, m);
    Eigen::VectorXd qs(m);
    for (int a = 0; a < m; ++a) {
      qs[a] = q[act[a]];
      for (int b = 0; b < m; ++b) Rs(a, b) = R(act[a], act[b]);
    }
    Eigen::VectorXd ls = m ? Rs.fullPivLu().solve(-qs).eval() : Eigen::VectorXd();
    if ((ls.array() < -1e-12).any()) continue;
    Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < m; ++a) l[act[a]] = std::max(0.0, ls[a]);
    Eigen::VectorXd w = q + R * l;
    if ((w.array() < -1e-10).any()) continue;
    return l;
  }
  FAIL("no feasible active set");
  return {};
}

Eigen::MatrixXd random_m_matrix(int d, RngStream& rng) {
  Eigen::MatrixXd Q(d, d);
  for (int i = 0; i < d; ++i) {
    double row = 0;
    for (int j = 0; j < d; ++j) {
      Q(i, j) = (i == j) ? 0.0 : rng.u01();
      row += Q(i, j);
    }
    const double target = 0.9 * rng.u01();
    if (row > 0) {
      for (int j = 0; j < d; ++j) Q(i, j) *= target / row;
    }
  }
  return ReflectionMatrix::from_routing(Q).R;
}

}  // namespace

TEST_CASE("hand LCP case from the two-station example") {
  Eigen::MatrixXd R(2, 2);
  R << 1, 0, -0.5, 1;
  Eigen::VectorXd q(2);
  q << -1, -1;
  const auto l = lcp_pgs(R, q);
  CHECK(l[0] == Catch::Approx(1.0).margin(1e-10));
  CHECK(l[1] == Catch::Approx(1.5).margin(1e-10));
  const Eigen::VectorXd w = q + R * l;
  CHECK(w.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("PGS agrees with active-set enumeration on random M-matrices") {
  auto rng = make_stream(11, tag::kReplication, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 1 + static_cast<int>(rng.u01() * 3);
    const Eigen::MatrixXd R = random_m_matrix(d, rng);
    Eigen::VectorXd q(d);
    for (int i = 0; i < d; ++i) q[i] = 2.0 * rng.normal();
    const auto l = lcp_pgs(R, q);
    const auto l_ref = lcp_enumerate(R, q);
    REQUIRE((l - l_ref).cwiseAbs().maxCoeff() < 1e-8);
    const Eigen::VectorXd w = q + R * l;
    REQUIRE(w.minCoeff() > -1e-10);
    REQUIRE(l.minCoeff() >= 0.0);
    REQUIRE(std::fabs(l.dot(w)) < 1e-8);
  }
}

TEST_CASE("subset solve pushes only on the active set") {
  Eigen::MatrixXd R(3, 3);
  R << 1, 0, 0, -0.3, 1, 0, -0.2, -0.2, 1;
  Eigen::VectorXd v(3);
  v << -1, 0.5, -2;
  const auto l = lcp_pgs_subset(R, v, {0, 2});
  CHECK(l[1] == 0.0);
  CHECK((v + R * l)[0] == Catch::Approx(0.0).margin(1e-10));
  CHECK((v + R * l)[2] == Catch::Approx(0.0).margin(1e-10));
}
