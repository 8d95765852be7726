#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gdro/dataset.hpp"
#include "gdro/geometry.hpp"
#include "gdro/rng.hpp"

namespace gdro {

enum class LossKind { logistic_binary, softmax_multiclass };

// Linear-model loss catalogue. Binary logistic uses labels in {-1, +1};
// softmax flattens a (classes x dim) weight matrix in row-major class order,
// so the model dimension is classes * dim.
struct LossModel {
  LossKind kind = LossKind::logistic_binary;
  int classes = 2;          // softmax only
  double smoothness = 0.0;  // L: per-sample gradient smoothness bound over W
  double lipschitz = 0.0;   // G: per-sample loss Lipschitz bound over W

  int weight_dim(int feature_dim) const {
    return kind == LossKind::softmax_multiclass ? classes * feature_dim
                                                : feature_dim;
  }
};

// Conservative closed-form bounds for (L, G) from the data:
// logistic: G = max ||x||, L = max ||x||^2 / 4;
// softmax:  G = sqrt(2) max ||x||, L = max ||x||^2.
std::pair<double, double> estimate_LG(const GroupedDataset& ds, LossKind kind);

// Picks the loss from the dataset's label kind and fills (L, G).
LossModel make_loss_model(const GroupedDataset& ds);

// Counts individual per-sample evaluations. grad_evals counts gradient
// evaluations only (the comparison axis); loss-only work lands in
// loss_evals. A fused loss+gradient evaluation charges one of each.
struct EvalCounter {
  std::int64_t grad_evals = 0;
  std::int64_t loss_evals = 0;

  EvalCounter& operator+=(const EvalCounter& o) {
    grad_evals += o.grad_evals;
    loss_evals += o.loss_evals;
    return *this;
  }
};

// One uniformly drawn sample index per group.
struct GroupSample {
  std::vector<std::int64_t> per_group;
};

// Single sampled index for the one-level (flattened) formulation.
struct FlatIndex {
  int group = 0;
  std::int64_t item = 0;
};

// Per-sample loss / fused loss+gradient. grad is accumulated as
// grad += coeff * d loss / d w.
double sample_loss(const LossModel& model, const Eigen::VectorXd& w,
                   const GroupedDataset& ds, int group, std::int64_t item);
double sample_loss_and_grad(const LossModel& model, const Eigen::VectorXd& w,
                            const GroupedDataset& ds, int group,
                            std::int64_t item, double coeff,
                            Eigen::VectorXd& grad);

// R_i(w): exact group average of losses; charges n_i loss evaluations.
double group_risk(const GroupedDataset& ds, const LossModel& model, int group,
                  const Eigen::VectorXd& w, EvalCounter* counter = nullptr);

// Optional per-group offsets subtracted from every loss value, realizing the
// excess-risk surrogate R_i(w) - r_i. Gradients in w are unaffected. A null
// pointer means no shift.
using GroupShift = Eigen::VectorXd;

// Full merged gradient: g_w = sum_i q_i grad R_i(w), g_q = -[R_1, ..., R_m].
// Charges sum_i n_i gradient and loss evaluations.
MergedGradient full_gradient(const GroupedDataset& ds, const LossModel& model,
                             const Point& z, EvalCounter& counter,
                             const GroupShift* shift = nullptr);

// Draws one index per group, in group order; consumes exactly m draws.
GroupSample draw_group_sample(const GroupedDataset& ds, SplitMix64& rng);

// Group-sampling stochastic gradient: g_w = sum_i q_i grad l(w; xi_{k,i}),
// g_q = -[l(w; xi_{k,1}), ...]. Charges m gradient and m loss evaluations.
MergedGradient stochastic_gradient(const GroupedDataset& ds,
                                   const LossModel& model, const Point& z,
                                   const GroupSample& sample,
                                   EvalCounter& counter,
                                   const GroupShift* shift = nullptr);

// Variance-reduced estimator g = g_half - g_snap_stoch + g_snap_full, where
// the two stochastic terms share one GroupSample (or FlatIndex).
MergedGradient vr_estimator(const MergedGradient& g_half,
                            const MergedGradient& g_snap_stoch,
                            const MergedGradient& g_snap_full);

// Bijection between the flat one-level index l in [0, sum_i n_i) and the
// two-level pair (group, item).
FlatIndex flat_to_pair(const GroupedDataset& ds, std::int64_t flat);
std::int64_t pair_to_flat(const GroupedDataset& ds, const FlatIndex& idx);

// Uniform / importance single-index draws; uniform consumes one draw,
// importance two (group, then item).
FlatIndex draw_uniform_index(const GroupedDataset& ds, SplitMix64& rng);
FlatIndex draw_importance_index(const GroupedDataset& ds, SplitMix64& rng);

// Single-index stochastic gradients for the flattened formulation, at a
// given index. Uniform weights by (sum_i n_i) / n_group, importance by m.
// Each charges 1 gradient and 1 loss evaluation.
MergedGradient mpvr_uniform_gradient_at(const GroupedDataset& ds,
                                        const LossModel& model, const Point& z,
                                        const FlatIndex& idx,
                                        EvalCounter& counter,
                                        const GroupShift* shift = nullptr);
MergedGradient mpvr_importance_gradient_at(const GroupedDataset& ds,
                                           const LossModel& model,
                                           const Point& z, const FlatIndex& idx,
                                           EvalCounter& counter,
                                           const GroupShift* shift = nullptr);

// Draw-and-evaluate conveniences; return the sampled index alongside.
std::pair<MergedGradient, std::int64_t> mpvr_uniform_gradient(
    const GroupedDataset& ds, const LossModel& model, const Point& z,
    SplitMix64& rng, EvalCounter& counter, const GroupShift* shift = nullptr);
std::pair<MergedGradient, FlatIndex> mpvr_importance_gradient(
    const GroupedDataset& ds, const LossModel& model, const Point& z,
    SplitMix64& rng, EvalCounter& counter, const GroupShift* shift = nullptr);

// Lipschitz constants of the stochastic gradient fields w.r.t. the merged
// norm. Raw forms take ln m (and size ratios) as free parameters; the
// wrappers derive them from the geometry and dataset. All require m >= 2.
double lipschitz_lz_raw(double d_w, double L, double G, double ln_m);
double lipschitz_lu_raw(double d_w, double L, double G, double ln_m, double m,
                        double nbar_over_nmin, double nbar_over_nharm);
double lipschitz_li_raw(double d_w, double L, double G, double ln_m, double m);

double lipschitz_lz(const Geometry& geom, const LossModel& model);
double lipschitz_lu(const Geometry& geom, const LossModel& model,
                    const GroupedDataset& ds);
double lipschitz_li(const Geometry& geom, const LossModel& model);

}  // namespace gdro
