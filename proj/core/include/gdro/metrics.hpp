#pragma once

#include <cstdint>
#include <utility>

#include "gdro/problem.hpp"

namespace gdro {

// Deterministic reference solver for min_w sum_i q_i (R_i(w) - shift_i) over
// the radius ball: full-gradient projected descent with backtracking from
// step 1/L. Stops once the gradient-mapping norm times the ball diameter
// drops below tol, which bounds the value suboptimality by tol itself.
struct ErmOracleConfig {
  double tol = 1e-8;
  std::int64_t max_iters = 100000;
};

struct ErmResult {
  Eigen::VectorXd w;
  double value = 0.0;
  std::int64_t iters = 0;
  bool converged = false;
  double grad_map_norm = 0.0;
};

ErmResult erm_oracle(const GroupedDataset& ds, const LossModel& model,
                     const Eigen::VectorXd& q_weights, double radius,
                     const ErmOracleConfig& cfg,
                     EvalCounter* metric_counter = nullptr,
                     const GroupShift* shift = nullptr);

struct GapReport {
  double max_term = 0.0;  // max_i R_i(w)
  double min_term = 0.0;  // oracle value of min_w sum_i q_i R_i(w)
  double gap = 0.0;       // max_term - min_term; >= -tol up to oracle error
  int argmax_group = 0;
  std::int64_t oracle_iters = 0;
  double oracle_tol = 0.0;
  bool oracle_converged = false;
};

// Exact max over exact group risks; ties break to the smallest index.
std::pair<double, int> max_group_risk(const GroupedDataset& ds,
                                      const LossModel& model,
                                      const Eigen::VectorXd& w,
                                      EvalCounter* metric_counter = nullptr,
                                      const GroupShift* shift = nullptr);

// Duality gap of z = (w; q): the max term collapses to max_i R_i(w) by
// linearity in q, the min term comes from the ERM oracle at q.
GapReport duality_gap(const GroupedDataset& ds, const LossModel& model,
                      const Geometry& geom, const Point& z,
                      const ErmOracleConfig& cfg = {},
                      EvalCounter* metric_counter = nullptr,
                      const GroupShift* shift = nullptr);

// max_i (R_i(w) - r_stars_i); with oracle r_stars this is the excess-risk
// objective value at w.
double excess_risk_gap(const GroupedDataset& ds, const LossModel& model,
                       const Eigen::VectorXd& w,
                       const Eigen::VectorXd& r_stars,
                       EvalCounter* metric_counter = nullptr);

}  // namespace gdro
