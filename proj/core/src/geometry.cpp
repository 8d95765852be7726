#include "gdro/geometry.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gdro {

Geometry::Geometry(int dim_, int m_, double radius_)
    : dim(dim_), m(m_), radius(radius_) {
  if (dim < 1) throw std::invalid_argument("Geometry: dim must be >= 1");
  if (m < 1) throw std::invalid_argument("Geometry: m must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("Geometry: radius must be positive");
  d_w = radius / std::sqrt(2.0);
  d_q = m > 1 ? std::sqrt(std::log(static_cast<double>(m))) : 0.0;
}

namespace {

void check_point_shape(const Geometry& geom, const Point& z, const char* who) {
  if (z.w.size() != geom.dim || z.q.size() != geom.m)
    throw std::invalid_argument(std::string(who) + ": point shape mismatch");
}

}  // namespace

Point init_point(const Geometry& geom) {
  Point z;
  z.w = Eigen::VectorXd::Zero(geom.dim);
  z.q = Eigen::VectorXd::Constant(geom.m, 1.0 / geom.m);
  return z;
}

double merged_norm(const Geometry& geom, const Eigen::VectorXd& dw,
                   const Eigen::VectorXd& dq) {
  if (dw.size() != geom.dim || dq.size() != geom.m)
    throw std::invalid_argument("merged_norm: displacement shape mismatch");
  double v = dw.squaredNorm() / (2.0 * geom.d_w * geom.d_w);
  if (geom.m > 1) {
    double l1 = dq.cwiseAbs().sum();
    v += l1 * l1 / (2.0 * geom.d_q * geom.d_q);
  }
  return std::sqrt(v);
}

double merged_norm(const Geometry& geom, const Point& a, const Point& b) {
  return merged_norm(geom, a.w - b.w, a.q - b.q);
}

double merged_dual_norm(const Geometry& geom, const MergedGradient& g) {
  if (g.gw.size() != geom.dim || g.gq.size() != geom.m)
    throw std::invalid_argument("merged_dual_norm: gradient shape mismatch");
  double v = 2.0 * geom.d_w * geom.d_w * g.gw.squaredNorm();
  if (geom.m > 1) {
    double linf = g.gq.cwiseAbs().maxCoeff();
    v += 2.0 * geom.d_q * geom.d_q * linf * linf;
  }
  return std::sqrt(v);
}

double psi(const Geometry& geom, const Point& z) {
  check_point_shape(geom, z, "psi");
  double v = 0.5 * z.w.squaredNorm() / (2.0 * geom.d_w * geom.d_w);
  if (geom.m > 1) {
    double ent = 0.0;
    for (int i = 0; i < geom.m; ++i) {
      double qi = z.q[i];
      if (qi > 0.0) ent += qi * std::log(qi);
    }
    v += ent / (2.0 * geom.d_q * geom.d_q);
  }
  return v;
}

DualPoint dual_map(const Geometry& geom, const Point& z) {
  check_point_shape(geom, z, "dual_map");
  DualPoint d;
  d.dw = z.w / (2.0 * geom.d_w * geom.d_w);
  d.sq = Eigen::VectorXd::Zero(geom.m);
  if (geom.m > 1) {
    const double scale = 1.0 / (2.0 * geom.d_q * geom.d_q);
    for (int i = 0; i < geom.m; ++i) {
      if (!(z.q[i] > 0.0))
        throw std::domain_error("dual_map: q must be strictly positive");
      d.sq[i] = (1.0 + std::log(z.q[i])) * scale;
    }
  }
  return d;
}

BregmanAnchor make_anchor(const Geometry& geom, const Point& z) {
  return BregmanAnchor{dual_map(geom, z), z, psi(geom, z)};
}

double bregman(const Geometry& geom, const Point& z, const BregmanAnchor& anchor) {
  check_point_shape(geom, z, "bregman");
  double v = psi(geom, z) - anchor.psi_value;
  v -= anchor.dual.dw.dot(z.w - anchor.primal.w);
  if (geom.m > 1) v -= anchor.dual.sq.dot(z.q - anchor.primal.q);
  return v > 0.0 ? v : 0.0;
}

Point weighted_average(const std::vector<Point>& points,
                       const std::vector<double>& weights) {
  if (points.empty() || points.size() != weights.size())
    throw std::invalid_argument("weighted_average: length mismatch");
  for (double w : weights)
    if (!(w > 0.0))
      throw std::invalid_argument("weighted_average: weights must be positive");
  Point out;
  out.w = Eigen::VectorXd::Zero(points[0].w.size());
  out.q = Eigen::VectorXd::Zero(points[0].q.size());
  double total = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    out.w += weights[k] * points[k].w;
    out.q += weights[k] * points[k].q;
    total += weights[k];
  }
  out.w /= total;
  out.q /= total;
  return out;
}

DualPoint weighted_dual_average(const std::vector<DualPoint>& duals,
                                const std::vector<double>& weights,
                                double normalizer) {
  if (duals.empty() || duals.size() != weights.size())
    throw std::invalid_argument("weighted_dual_average: length mismatch");
  if (normalizer == 0.0)
    throw std::invalid_argument("weighted_dual_average: zero normalizer");
  for (double w : weights)
    if (!(w > 0.0))
      throw std::invalid_argument("weighted_dual_average: weights must be positive");
  DualPoint out;
  out.dw = Eigen::VectorXd::Zero(duals[0].dw.size());
  out.sq = Eigen::VectorXd::Zero(duals[0].sq.size());
  for (std::size_t k = 0; k < duals.size(); ++k) {
    out.dw += weights[k] * duals[k].dw;
    out.sq += weights[k] * duals[k].sq;
  }
  out.dw /= normalizer;
  out.sq /= normalizer;
  return out;
}

Point prox_step(const Geometry& geom, const MergedGradient& g, double eta,
                double alpha, const DualPoint& anchor, const Point& current) {
  if (!(eta > 0.0)) throw std::invalid_argument("prox_step: eta must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("prox_step: alpha must lie in [0, 1]");
  if (!g.gw.allFinite() || !g.gq.allFinite())
    throw std::invalid_argument("prox_step: nonfinite gradient");
  check_point_shape(geom, current, "prox_step");

  Point out;

  // w-block: unconstrained minimizer of the quadratic, then exact rescaling
  // onto the ball.
  const double tw = 2.0 * geom.d_w * geom.d_w;
  Eigen::VectorXd w = (1.0 - alpha) * current.w - (tw * eta) * g.gw;
  if (alpha > 0.0) w += (alpha * tw) * anchor.dw;
  double nw = w.norm();
  if (nw > geom.radius) w *= geom.radius / nw;
  out.w = std::move(w);

  // q-block: entropic update in the log domain, normalized after subtracting
  // the max score so exp never overflows.
  if (geom.m == 1) {
    out.q = Eigen::VectorXd::Ones(1);
    return out;
  }
  const double tq = 2.0 * geom.d_q * geom.d_q;
  Eigen::VectorXd t(geom.m);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < geom.m; ++i) {
    double ti = -(tq * eta) * g.gq[i];
    if (alpha > 0.0) ti += alpha * tq * anchor.sq[i];
    if (alpha < 1.0) {
      double lq = current.q[i] > 0.0 ? std::log(current.q[i]) : neg_inf;
      ti += (1.0 - alpha) * (1.0 + lq);
    }
    t[i] = ti;
  }
  double tmax = t.maxCoeff();
  if (!(tmax > neg_inf)) {
    // Every score is -inf; only reachable from degenerate inputs.
    out.q = Eigen::VectorXd::Constant(geom.m, 1.0 / geom.m);
    return out;
  }
  Eigen::VectorXd q = (t.array() - tmax).exp();
  q /= q.sum();
  out.q = std::move(q);
  return out;
}

}  // namespace gdro
