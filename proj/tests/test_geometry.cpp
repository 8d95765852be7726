#include <doctest.h>

#include <cmath>

#include "gdro/geometry.hpp"
#include "gdro/rng.hpp"
#include "support/oracles.hpp"

using namespace gdro;

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

TEST_SUITE("geometry") {

TEST_CASE("init_point is the psi minimizer layout") {
  Geometry g3(3, 2, 1.0);
  Point z = init_point(g3);
  CHECK(z.w.isZero(0.0));
  CHECK(z.q[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(z.q[1] == doctest::Approx(0.5).epsilon(1e-15));

  Geometry g1(1, 4, 5.0);
  Point z4 = init_point(g1);
  CHECK(z4.w.size() == 1);
  for (int i = 0; i < 4; ++i) CHECK(z4.q[i] == doctest::Approx(0.25));
  CHECK(z4.q.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(z4.w.norm() <= 5.0);
}

TEST_CASE("geometry constants and validation") {
  Geometry g(2, 9, 3.0);
  CHECK(g.d_w == doctest::Approx(3.0 / kSqrt2));
  CHECK(g.d_q == doctest::Approx(std::sqrt(std::log(9.0))));
  CHECK(Geometry(2, 1, 1.0).d_q == 0.0);
  CHECK_THROWS_AS(Geometry(0, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Geometry(2, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Geometry(2, 2, 0.0), std::invalid_argument);
}

TEST_CASE("merged_norm closed form and diameter bound") {
  // d_w = 1 via radius sqrt(2); the q-part vanishes for a zero displacement.
  Geometry g(3, 5, kSqrt2);
  Eigen::VectorXd dw = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd dq = Eigen::VectorXd::Zero(5);
  CHECK(merged_norm(g, dw, dq) == 0.0);
  dw[0] = 1.0;
  CHECK(merged_norm(g, dw, dq) == doctest::Approx(1.0 / kSqrt2).epsilon(1e-14));

  SplitMix64 rng(11);
  for (int t = 0; t < 300; ++t) {
    Point a = oracles::random_feasible(g, rng, 8.0);
    Point b = oracles::random_feasible(g, rng, 8.0);
    CHECK(merged_norm(g, a, b) <= 2.0 * kSqrt2 + 1e-12);
  }
}

TEST_CASE("merged_dual_norm closed form and Hoelder") {
  Geometry g(2, 3, kSqrt2);  // d_w = 1
  MergedGradient zero{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)};
  CHECK(merged_dual_norm(g, zero) == 0.0);

  MergedGradient gq_only{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)};
  gq_only.gq << 1.0, -3.0, 0.5;
  CHECK(merged_dual_norm(g, gq_only) ==
        doctest::Approx(3.0 * kSqrt2 * g.d_q).epsilon(1e-14));

  SplitMix64 rng(5);
  for (int t = 0; t < 200; ++t) {
    Point a = oracles::random_feasible(g, rng);
    Point b = oracles::random_feasible(g, rng);
    MergedGradient grad;
    grad.gw.resize(2);
    grad.gq.resize(3);
    for (int i = 0; i < 2; ++i) grad.gw[i] = rng.next_gaussian();
    for (int i = 0; i < 3; ++i) grad.gq[i] = rng.next_gaussian();
    double inner = grad.gw.dot(a.w - b.w) + grad.gq.dot(a.q - b.q);
    CHECK(std::abs(inner) <=
          merged_dual_norm(g, grad) * merged_norm(g, a, b) + 1e-12);
  }
}

TEST_CASE("psi values and range") {
  Geometry g(4, 6, 2.0);
  CHECK(psi(g, init_point(g)) == doctest::Approx(-0.5).epsilon(1e-14));

  Point onehot = init_point(g);
  onehot.q.setZero();
  onehot.q[2] = 1.0;  // 0 ln 0 = 0 on the rest
  CHECK(psi(g, onehot) == doctest::Approx(0.0));

  SplitMix64 rng(3);
  double lo = 1e300, hi = -1e300;
  for (int t = 0; t < 500; ++t) {
    Point z = oracles::random_feasible(g, rng, 10.0);
    double v = psi(g, z);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo <= 1.0 + 1e-12);
}

TEST_CASE("dual_map values, linearity, boundary error") {
  Geometry g(2, 2, kSqrt2);  // d_w = 1
  Point z = init_point(g);
  DualPoint d = dual_map(g, z);
  CHECK(d.dw.isZero(0.0));
  double expected = (1.0 + std::log(0.5)) / (2.0 * std::log(2.0));
  CHECK(d.sq[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(d.sq[1] == doctest::Approx(expected).epsilon(1e-14));

  Point z2 = z;
  z2.w << 0.4, -0.2;
  Point z3 = z;
  z3.w = 2.5 * z2.w;
  CHECK(dual_map(g, z3).dw.isApprox(2.5 * dual_map(g, z2).dw, 1e-14));

  Point bad = z;
  bad.q << 1.0, 0.0;
  CHECK_THROWS_AS(dual_map(g, bad), std::domain_error);
}

TEST_CASE("bregman: self distance, KL reduction, strong convexity") {
  Geometry g(2, 2, 1.0);
  SplitMix64 rng(17);
  for (int t = 0; t < 100; ++t) {
    Point z = oracles::random_feasible(g, rng);
    CHECK(bregman(g, z, make_anchor(g, z)) == doctest::Approx(0.0).epsilon(1e-12));
  }

  // Pure q-part Bregman equals KL(q || anchor) / (2 ln 2).
  Point a = init_point(g);
  Point z = a;
  z.q << 0.3, 0.7;
  double kl = 0.3 * std::log(0.3 / 0.5) + 0.7 * std::log(0.7 / 0.5);
  CHECK(bregman(g, z, make_anchor(g, a)) ==
        doctest::Approx(kl / (2.0 * std::log(2.0))).epsilon(1e-13));

  for (int t = 0; t < 300; ++t) {
    Point z1 = oracles::random_feasible(g, rng);
    Point z2 = oracles::random_feasible(g, rng);
    double b = bregman(g, z1, make_anchor(g, z2));
    double n = merged_norm(g, z1, z2);
    CHECK(b >= 0.5 * n * n - 1e-12);
  }
}

TEST_CASE("weighted_average basics and errors") {
  Geometry g(1, 2, 1.0);
  Point p1{Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Zero(2)};
  p1.q << 1.0, 0.0;
  Point p2{Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Zero(2)};
  p2.q << 0.0, 1.0;

  Point single = weighted_average({p1}, {7.0});
  CHECK(single.q.isApprox(p1.q));
  Point same = weighted_average({p1, p1}, {1.0, 3.0});
  CHECK(same.q.isApprox(p1.q, 1e-15));
  Point mid = weighted_average({p1, p2}, {1.0, 1.0});
  CHECK(mid.q[0] == doctest::Approx(0.5));
  CHECK(mid.q[1] == doctest::Approx(0.5));

  CHECK_THROWS_AS(weighted_average({p1, p2}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(weighted_average({p1}, {0.0}), std::invalid_argument);
}

TEST_CASE("weighted_dual_average identity, normalizer, commutation") {
  Geometry g(2, 3, 1.5);
  SplitMix64 rng(23);
  Point a = oracles::random_feasible(g, rng);
  Point b = oracles::random_feasible(g, rng);
  DualPoint da = dual_map(g, a), db = dual_map(g, b);

  DualPoint one = weighted_dual_average({da}, {1.0}, 1.0);
  CHECK(one.dw.isApprox(da.dw, 1e-15));
  CHECK(one.sq.isApprox(da.sq, 1e-15));

  DualPoint two = weighted_dual_average({da, da}, {1.0, 1.0}, 2.0);
  CHECK(two.sq.isApprox(da.sq, 1e-15));

  // w-part of the dual average commutes with primal averaging (linearity).
  DualPoint avg_dual = weighted_dual_average({da, db}, {2.0, 1.0}, 3.0);
  Point avg_primal = weighted_average({a, b}, {2.0, 1.0});
  CHECK(avg_dual.dw.isApprox(dual_map(g, avg_primal).dw, 1e-12));

  CHECK_THROWS_AS(weighted_dual_average({da, db}, {1.0, 1.0}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_dual_average({da}, {1.0, 1.0}, 1.0),
                  std::invalid_argument);
}

TEST_CASE("prox_step degenerate anchors") {
  Geometry g(3, 3, 1.0);
  SplitMix64 rng(31);
  Point cur = oracles::random_feasible(g, rng);
  Point star = oracles::random_feasible(g, rng);
  MergedGradient zero{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  DualPoint unused{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};

  Point back = prox_step(g, zero, 0.5, 0.0, unused, cur);
  CHECK(back.w.isApprox(cur.w, 1e-13));
  CHECK(back.q.isApprox(cur.q, 1e-13));

  Point jump = prox_step(g, zero, 0.5, 1.0, dual_map(g, star), cur);
  CHECK(jump.w.isApprox(star.w, 1e-12));
  CHECK(jump.q.isApprox(star.q, 1e-12));
}

TEST_CASE("prox_step matches the grid oracle on a small instance") {
  Geometry g(1, 2, 1.0);
  SplitMix64 rng(7);
  Point anchor = oracles::random_feasible(g, rng);
  Point cur = oracles::random_feasible(g, rng);
  MergedGradient grad;
  grad.gw = Eigen::VectorXd::Constant(1, 0.8);
  grad.gq = Eigen::VectorXd::Zero(2);
  grad.gq << -0.6, -0.1;

  Point out = prox_step(g, grad, 0.1, 0.5, dual_map(g, anchor), cur);
  double ours = oracles::prox_objective(g, out.w, out.q, grad, 0.1, 0.5, anchor, cur);
  double best = oracles::prox_grid_min(g, grad, 0.1, 0.5, anchor, cur);
  CHECK(ours <= best + 1e-10);
  CHECK(std::abs(ours - best) <= 1e-6);
}

TEST_CASE("prox_step feasibility for arbitrary finite inputs") {
  SplitMix64 rng(41);
  for (int t = 0; t < 200; ++t) {
    int dim = 1 + static_cast<int>(rng.next_below(3));
    int m = 1 + static_cast<int>(rng.next_below(4));
    Geometry g(dim, m, 0.5 + rng.next_unit());
    Point cur = oracles::random_feasible(g, rng, 6.0);
    Point anc = oracles::random_feasible(g, rng, 6.0);
    MergedGradient grad;
    grad.gw.resize(dim);
    grad.gq.resize(m);
    for (int i = 0; i < dim; ++i) grad.gw[i] = 50.0 * rng.next_gaussian();
    for (int i = 0; i < m; ++i) grad.gq[i] = 50.0 * rng.next_gaussian();
    double eta = 0.001 + 2.0 * rng.next_unit();
    double alpha = rng.next_unit();
    Point out = prox_step(g, grad, eta, alpha, dual_map(g, anc), cur);
    CHECK(out.w.allFinite());
    CHECK(out.w.norm() <= g.radius * (1.0 + 1e-12));
    CHECK(out.q.allFinite());
    CHECK(out.q.minCoeff() >= 0.0);
    CHECK(std::abs(out.q.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("prox_step survives q entries near the underflow edge") {
  Geometry g(1, 3, 1.0);
  Point cur;
  cur.w = Eigen::VectorXd::Zero(1);
  cur.q.resize(3);
  cur.q << 1e-300, 1e-300, 1.0;
  MergedGradient grad{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(3)};
  Point out = prox_step(g, grad, 0.1, 0.25, dual_map(g, cur), cur);
  CHECK(out.q.allFinite());
  CHECK(out.q.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prox_step input validation") {
  Geometry g(1, 2, 1.0);
  Point cur = init_point(g);
  DualPoint anc = dual_map(g, cur);
  MergedGradient grad{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2)};
  CHECK_THROWS_AS(prox_step(g, grad, 0.0, 0.5, anc, cur), std::invalid_argument);
  CHECK_THROWS_AS(prox_step(g, grad, -1.0, 0.5, anc, cur), std::invalid_argument);
  CHECK_THROWS_AS(prox_step(g, grad, 0.1, -0.1, anc, cur), std::invalid_argument);
  CHECK_THROWS_AS(prox_step(g, grad, 0.1, 1.1, anc, cur), std::invalid_argument);
  MergedGradient bad = grad;
  bad.gw[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(prox_step(g, bad, 0.1, 0.5, anc, cur), std::invalid_argument);
}

TEST_CASE("dual round trip through a zero-gradient full-anchor prox") {
  Geometry g(2, 3, 1.0);
  SplitMix64 rng(53);
  for (int t = 0; t < 50; ++t) {
    Point z = oracles::random_feasible(g, rng);
    MergedGradient zero{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)};
    Point back = prox_step(g, zero, 1.0, 1.0, dual_map(g, z), z);
    CHECK(back.w.isApprox(z.w, 1e-12));
    CHECK(back.q.isApprox(z.q, 1e-12));
  }
}

}  // TEST_SUITE
