#include "gdro/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace gdro {

namespace {

// q-weighted objective and gradient; charges the metric counter.
double weighted_risk(const GroupedDataset& ds, const LossModel& model,
                     const Eigen::VectorXd& q, const Eigen::VectorXd& w,
                     EvalCounter* counter, const GroupShift* shift) {
  double v = 0.0;
  for (int i = 0; i < ds.num_groups(); ++i) {
    double r = group_risk(ds, model, i, w, counter);
    if (shift) r -= (*shift)[i];
    v += q[i] * r;
  }
  return v;
}

Eigen::VectorXd weighted_risk_grad(const GroupedDataset& ds,
                                   const LossModel& model,
                                   const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& w,
                                   EvalCounter* counter) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
  for (int i = 0; i < ds.num_groups(); ++i) {
    const std::int64_t n = ds.group_size(i);
    const double coeff = q[i] / static_cast<double>(n);
    for (std::int64_t j = 0; j < n; ++j)
      sample_loss_and_grad(model, w, ds, i, j, coeff, g);
    if (counter) {
      counter->grad_evals += n;
      counter->loss_evals += n;
    }
  }
  return g;
}

Eigen::VectorXd project_ball(Eigen::VectorXd w, double radius) {
  double n = w.norm();
  if (n > radius) w *= radius / n;
  return w;
}

}  // namespace

ErmResult erm_oracle(const GroupedDataset& ds, const LossModel& model,
                     const Eigen::VectorXd& q_weights, double radius,
                     const ErmOracleConfig& cfg, EvalCounter* metric_counter,
                     const GroupShift* shift) {
  if (q_weights.size() != ds.num_groups())
    throw std::invalid_argument("erm_oracle: weight length mismatch");
  const double diameter = 2.0 * radius;
  const double gm_tol = cfg.tol / diameter;

  ErmResult res;
  res.w = Eigen::VectorXd::Zero(model.weight_dim(ds.dim));
  double f = weighted_risk(ds, model, q_weights, res.w, metric_counter, shift);
  double step = model.smoothness > 0.0 ? 1.0 / model.smoothness : 1.0;

  for (res.iters = 0; res.iters < cfg.max_iters; ++res.iters) {
    Eigen::VectorXd g = weighted_risk_grad(ds, model, q_weights, res.w,
                                           metric_counter);
    Eigen::VectorXd w_next;
    double f_next = 0.0;
    while (true) {
      w_next = project_ball(res.w - step * g, radius);
      f_next = weighted_risk(ds, model, q_weights, w_next, metric_counter, shift);
      Eigen::VectorXd d = w_next - res.w;
      if (f_next <= f + g.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-15)
        break;
      step *= 0.5;
      if (step < 1e-18) break;
    }
    res.grad_map_norm = (res.w - w_next).norm() / step;
    res.w = std::move(w_next);
    f = f_next;
    if (res.grad_map_norm <= gm_tol) {
      res.converged = true;
      ++res.iters;
      break;
    }
  }
  res.value = f;
  return res;
}

std::pair<double, int> max_group_risk(const GroupedDataset& ds,
                                      const LossModel& model,
                                      const Eigen::VectorXd& w,
                                      EvalCounter* metric_counter,
                                      const GroupShift* shift) {
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (int i = 0; i < ds.num_groups(); ++i) {
    double r = group_risk(ds, model, i, w, metric_counter);
    if (shift) r -= (*shift)[i];
    if (r > best) {
      best = r;
      arg = i;
    }
  }
  return {best, arg};
}

GapReport duality_gap(const GroupedDataset& ds, const LossModel& model,
                      const Geometry& geom, const Point& z,
                      const ErmOracleConfig& cfg, EvalCounter* metric_counter,
                      const GroupShift* shift) {
  GapReport rep;
  auto [mx, arg] = max_group_risk(ds, model, z.w, metric_counter, shift);
  rep.max_term = mx;
  rep.argmax_group = arg;
  ErmResult erm =
      erm_oracle(ds, model, z.q, geom.radius, cfg, metric_counter, shift);
  rep.min_term = erm.value;
  rep.gap = rep.max_term - rep.min_term;
  rep.oracle_iters = erm.iters;
  rep.oracle_tol = cfg.tol;
  rep.oracle_converged = erm.converged;
  return rep;
}

double excess_risk_gap(const GroupedDataset& ds, const LossModel& model,
                       const Eigen::VectorXd& w, const Eigen::VectorXd& r_stars,
                       EvalCounter* metric_counter) {
  if (r_stars.size() != ds.num_groups())
    throw std::invalid_argument("excess_risk_gap: r_stars length mismatch");
  GroupShift shift = r_stars;
  return max_group_risk(ds, model, w, metric_counter, &shift).first;
}

}  // namespace gdro
