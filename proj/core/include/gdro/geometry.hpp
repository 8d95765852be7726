#pragma once

#include <Eigen/Core>
#include <vector>

namespace gdro {

// Bregman setup for the product domain Z = W x Delta_m, where W is the
// centered Euclidean ball of the given radius and Delta_m is the probability
// simplex. The distance-generating function is
//
//   psi(z) = (1/2)||w||^2 / (2 d_w^2) + sum_i q_i ln q_i / (2 d_q^2),
//
// with d_w = radius / sqrt(2) and d_q = sqrt(ln m), which makes psi
// 1-strongly convex w.r.t. the merged norm below and bounds its range by 1.
//
// m = 1 degenerates the simplex to the singleton {(1)}: every q-side term is
// identically zero and d_q is stored as 0.
struct Geometry {
  int dim;        // dimension of w
  int m;          // number of groups
  double radius;  // W = { w : ||w||_2 <= radius }
  double d_w;
  double d_q;

  Geometry(int dim, int m, double radius);
};

// Primal iterate z = (w; q).
struct Point {
  Eigen::VectorXd w;
  Eigen::VectorXd q;
};

// Image of a point under grad psi. Only ever produced by dual_map or by dual
// averaging; never inverted back to the primal space.
struct DualPoint {
  Eigen::VectorXd dw;  // w / (2 d_w^2)
  Eigen::VectorXd sq;  // (1 + ln q_i) / (2 d_q^2)
};

// Merged gradient (g_w; g_q) where g_q already stores the negated q-block,
// i.e. full gradients carry g_q = -[R_1, ..., R_m].
struct MergedGradient {
  Eigen::VectorXd gw;
  Eigen::VectorXd gq;
};

// Anchor for Bregman-divergence evaluation: the dual image together with the
// primal point and psi value it was taken at. Prox steps consume only the
// dual part.
struct BregmanAnchor {
  DualPoint dual;
  Point primal;
  double psi_value;
};

// argmin_z psi(z): w = 0, q uniform.
Point init_point(const Geometry& geom);

// ||(dw; dq)|| = sqrt( ||dw||_2^2/(2 d_w^2) + ||dq||_1^2/(2 d_q^2) ).
double merged_norm(const Geometry& geom, const Eigen::VectorXd& dw,
                   const Eigen::VectorXd& dq);
double merged_norm(const Geometry& geom, const Point& a, const Point& b);

// Dual norm: sqrt( 2 d_w^2 ||gw||_2^2 + 2 d_q^2 ||gq||_inf^2 ).
double merged_dual_norm(const Geometry& geom, const MergedGradient& g);

// Distance-generating function value; 0 ln 0 = 0.
double psi(const Geometry& geom, const Point& z);

// grad psi. Throws std::domain_error when any q_i is exactly zero (the
// entropy gradient is undefined on the boundary; callers must not clamp).
DualPoint dual_map(const Geometry& geom, const Point& z);

BregmanAnchor make_anchor(const Geometry& geom, const Point& z);

// B(z, z0) = psi(z) - psi(z0) - <grad psi(z0), z - z0> >= 0.
double bregman(const Geometry& geom, const Point& z, const BregmanAnchor& anchor);

// Convex combination with weights normalized by their sum.
Point weighted_average(const std::vector<Point>& points,
                       const std::vector<double>& weights);

// Weighted sum of dual vectors divided by an explicit normalizer. The
// normalizer is a separate parameter because the snapshot recursion divides
// by the weight sum of the *current* epoch while averaging the *previous*
// epoch's trajectory; under a constant schedule the two coincide.
DualPoint weighted_dual_average(const std::vector<DualPoint>& duals,
                                const std::vector<double>& weights,
                                double normalizer);

// Two-anchor composite prox step
//
//   argmin_z  eta <g, z> + alpha B(z, anchor) + (1 - alpha) B(z, current)
//
// solved in closed form: the w-block is a Euclidean-ball projection of a
// linear combination, the q-block a max-shifted softmax over log-domain
// scores. Requires eta > 0, alpha in [0, 1], finite g.
Point prox_step(const Geometry& geom, const MergedGradient& g, double eta,
                double alpha, const DualPoint& anchor, const Point& current);

}  // namespace gdro
