#include "gdro/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace gdro {

namespace {

// log(1 + e^t) without overflow.
double log1p_exp(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double logistic_loss(double margin) { return log1p_exp(-margin); }

// d/dmargin log(1 + e^{-margin}) = -1 / (1 + e^{margin})
double logistic_dmargin(double margin) { return -1.0 / (1.0 + std::exp(margin)); }

struct SoftmaxEval {
  Eigen::VectorXd probs;
  double loss;
};

SoftmaxEval softmax_eval(const LossModel& model, const Eigen::VectorXd& w,
                         const Eigen::Ref<const Eigen::RowVectorXd>& x, int y) {
  const int C = model.classes;
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd scores(C);
  for (int c = 0; c < C; ++c) scores[c] = x.dot(w.segment(c * d, d));
  double smax = scores.maxCoeff();
  Eigen::VectorXd e = (scores.array() - smax).exp();
  double esum = e.sum();
  SoftmaxEval out;
  out.probs = e / esum;
  out.loss = std::log(esum) + smax - scores[y];
  return out;
}

}  // namespace

std::pair<double, double> estimate_LG(const GroupedDataset& ds, LossKind kind) {
  double max_norm = 0.0;
  for (const auto& block : ds.features)
    for (Eigen::Index j = 0; j < block.rows(); ++j)
      max_norm = std::max(max_norm, block.row(j).norm());
  if (kind == LossKind::logistic_binary)
    return {max_norm * max_norm / 4.0, max_norm};
  return {max_norm * max_norm, std::sqrt(2.0) * max_norm};
}

LossModel make_loss_model(const GroupedDataset& ds) {
  LossModel model;
  if (ds.label_kind == LabelKind::binary) {
    model.kind = LossKind::logistic_binary;
    model.classes = 2;
  } else {
    model.kind = LossKind::softmax_multiclass;
    model.classes = ds.classes;
  }
  auto [L, G] = estimate_LG(ds, model.kind);
  model.smoothness = L;
  model.lipschitz = G;
  return model;
}

double sample_loss(const LossModel& model, const Eigen::VectorXd& w,
                   const GroupedDataset& ds, int group, std::int64_t item) {
  const auto x = ds.features[group].row(item);
  const int y = ds.labels[group][item];
  if (model.kind == LossKind::logistic_binary)
    return logistic_loss(y * x.dot(w));
  return softmax_eval(model, w, x, y).loss;
}

double sample_loss_and_grad(const LossModel& model, const Eigen::VectorXd& w,
                            const GroupedDataset& ds, int group,
                            std::int64_t item, double coeff,
                            Eigen::VectorXd& grad) {
  const auto x = ds.features[group].row(item);
  const int y = ds.labels[group][item];
  if (model.kind == LossKind::logistic_binary) {
    double margin = y * x.dot(w);
    grad += (coeff * y * logistic_dmargin(margin)) * x.transpose();
    return logistic_loss(margin);
  }
  SoftmaxEval ev = softmax_eval(model, w, x, y);
  const int d = static_cast<int>(x.size());
  for (int c = 0; c < model.classes; ++c) {
    double p = ev.probs[c] - (c == y ? 1.0 : 0.0);
    grad.segment(c * d, d) += (coeff * p) * x.transpose();
  }
  return ev.loss;
}

double group_risk(const GroupedDataset& ds, const LossModel& model, int group,
                  const Eigen::VectorXd& w, EvalCounter* counter) {
  if (group < 0 || group >= ds.num_groups())
    throw std::out_of_range("group_risk: group index out of range");
  const std::int64_t n = ds.group_size(group);
  double sum = 0.0;
  for (std::int64_t j = 0; j < n; ++j) sum += sample_loss(model, w, ds, group, j);
  if (counter) counter->loss_evals += n;
  return sum / static_cast<double>(n);
}

MergedGradient full_gradient(const GroupedDataset& ds, const LossModel& model,
                             const Point& z, EvalCounter& counter,
                             const GroupShift* shift) {
  const int m = ds.num_groups();
  MergedGradient g;
  g.gw = Eigen::VectorXd::Zero(model.weight_dim(ds.dim));
  g.gq = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    const std::int64_t n = ds.group_size(i);
    const double coeff = z.q[i] / static_cast<double>(n);
    double risk_sum = 0.0;
    for (std::int64_t j = 0; j < n; ++j)
      risk_sum += sample_loss_and_grad(model, z.w, ds, i, j, coeff, g.gw);
    double risk = risk_sum / static_cast<double>(n);
    if (shift) risk -= (*shift)[i];
    g.gq[i] = -risk;
    counter.grad_evals += n;
    counter.loss_evals += n;
  }
  return g;
}

GroupSample draw_group_sample(const GroupedDataset& ds, SplitMix64& rng) {
  GroupSample s;
  s.per_group.resize(ds.num_groups());
  for (int i = 0; i < ds.num_groups(); ++i)
    s.per_group[i] = static_cast<std::int64_t>(
        rng.next_below(static_cast<std::uint64_t>(ds.group_size(i))));
  return s;
}

MergedGradient stochastic_gradient(const GroupedDataset& ds,
                                   const LossModel& model, const Point& z,
                                   const GroupSample& sample,
                                   EvalCounter& counter,
                                   const GroupShift* shift) {
  const int m = ds.num_groups();
  if (static_cast<int>(sample.per_group.size()) != m)
    throw std::invalid_argument("stochastic_gradient: sample size mismatch");
  MergedGradient g;
  g.gw = Eigen::VectorXd::Zero(model.weight_dim(ds.dim));
  g.gq = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    double loss =
        sample_loss_and_grad(model, z.w, ds, i, sample.per_group[i], z.q[i], g.gw);
    if (shift) loss -= (*shift)[i];
    g.gq[i] = -loss;
  }
  counter.grad_evals += m;
  counter.loss_evals += m;
  return g;
}

MergedGradient vr_estimator(const MergedGradient& g_half,
                            const MergedGradient& g_snap_stoch,
                            const MergedGradient& g_snap_full) {
  MergedGradient g;
  g.gw = g_half.gw - g_snap_stoch.gw + g_snap_full.gw;
  g.gq = g_half.gq - g_snap_stoch.gq + g_snap_full.gq;
  return g;
}

FlatIndex flat_to_pair(const GroupedDataset& ds, std::int64_t flat) {
  if (flat < 0 || flat >= ds.total_samples())
    throw std::out_of_range("flat_to_pair: index out of range");
  for (int i = 0; i < ds.num_groups(); ++i) {
    if (flat < ds.group_size(i)) return FlatIndex{i, flat};
    flat -= ds.group_size(i);
  }
  throw std::logic_error("flat_to_pair: unreachable");
}

std::int64_t pair_to_flat(const GroupedDataset& ds, const FlatIndex& idx) {
  if (idx.group < 0 || idx.group >= ds.num_groups() || idx.item < 0 ||
      idx.item >= ds.group_size(idx.group))
    throw std::out_of_range("pair_to_flat: index out of range");
  std::int64_t flat = idx.item;
  for (int i = 0; i < idx.group; ++i) flat += ds.group_size(i);
  return flat;
}

FlatIndex draw_uniform_index(const GroupedDataset& ds, SplitMix64& rng) {
  std::int64_t flat = static_cast<std::int64_t>(
      rng.next_below(static_cast<std::uint64_t>(ds.total_samples())));
  return flat_to_pair(ds, flat);
}

FlatIndex draw_importance_index(const GroupedDataset& ds, SplitMix64& rng) {
  int group = static_cast<int>(
      rng.next_below(static_cast<std::uint64_t>(ds.num_groups())));
  std::int64_t item = static_cast<std::int64_t>(
      rng.next_below(static_cast<std::uint64_t>(ds.group_size(group))));
  return FlatIndex{group, item};
}

namespace {

MergedGradient single_index_gradient(const GroupedDataset& ds,
                                     const LossModel& model, const Point& z,
                                     const FlatIndex& idx, double weight,
                                     EvalCounter& counter,
                                     const GroupShift* shift) {
  MergedGradient g;
  g.gw = Eigen::VectorXd::Zero(model.weight_dim(ds.dim));
  g.gq = Eigen::VectorXd::Zero(ds.num_groups());
  double loss = sample_loss_and_grad(model, z.w, ds, idx.group, idx.item,
                                     weight * z.q[idx.group], g.gw);
  if (shift) loss -= (*shift)[idx.group];
  g.gq[idx.group] = -weight * loss;
  counter.grad_evals += 1;
  counter.loss_evals += 1;
  return g;
}

}  // namespace

MergedGradient mpvr_uniform_gradient_at(const GroupedDataset& ds,
                                        const LossModel& model, const Point& z,
                                        const FlatIndex& idx,
                                        EvalCounter& counter,
                                        const GroupShift* shift) {
  double weight = static_cast<double>(ds.total_samples()) /
                  static_cast<double>(ds.group_size(idx.group));
  return single_index_gradient(ds, model, z, idx, weight, counter, shift);
}

MergedGradient mpvr_importance_gradient_at(const GroupedDataset& ds,
                                           const LossModel& model,
                                           const Point& z, const FlatIndex& idx,
                                           EvalCounter& counter,
                                           const GroupShift* shift) {
  return single_index_gradient(ds, model, z, idx,
                               static_cast<double>(ds.num_groups()), counter,
                               shift);
}

std::pair<MergedGradient, std::int64_t> mpvr_uniform_gradient(
    const GroupedDataset& ds, const LossModel& model, const Point& z,
    SplitMix64& rng, EvalCounter& counter, const GroupShift* shift) {
  FlatIndex idx = draw_uniform_index(ds, rng);
  return {mpvr_uniform_gradient_at(ds, model, z, idx, counter, shift),
          pair_to_flat(ds, idx)};
}

std::pair<MergedGradient, FlatIndex> mpvr_importance_gradient(
    const GroupedDataset& ds, const LossModel& model, const Point& z,
    SplitMix64& rng, EvalCounter& counter, const GroupShift* shift) {
  FlatIndex idx = draw_importance_index(ds, rng);
  return {mpvr_importance_gradient_at(ds, model, z, idx, counter, shift), idx};
}

double lipschitz_lz_raw(double d_w, double L, double G, double ln_m) {
  double a = std::sqrt(2.0 * d_w * d_w * L * L + G * G * ln_m);
  double b = G * std::sqrt(2.0 * ln_m);
  return 2.0 * d_w * std::max(a, b);
}

double lipschitz_lu_raw(double d_w, double L, double G, double ln_m, double m,
                        double nbar_over_nmin, double nbar_over_nharm) {
  double a = std::sqrt(2.0 * d_w * d_w * L * L * m * nbar_over_nmin +
                       G * G * m * m * ln_m * nbar_over_nharm);
  double b = G * std::sqrt(2.0 * m * ln_m * nbar_over_nmin);
  return 2.0 * d_w * std::max(a, b);
}

double lipschitz_li_raw(double d_w, double L, double G, double ln_m, double m) {
  double a = std::sqrt(2.0 * d_w * d_w * L * L * m + G * G * m * m * ln_m);
  double b = G * std::sqrt(2.0 * m * ln_m);
  return 2.0 * d_w * std::max(a, b);
}

namespace {

double require_ln_m(const Geometry& geom, const char* who) {
  if (geom.m < 2)
    throw std::invalid_argument(std::string(who) + ": needs m >= 2");
  return std::log(static_cast<double>(geom.m));
}

}  // namespace

double lipschitz_lz(const Geometry& geom, const LossModel& model) {
  return lipschitz_lz_raw(geom.d_w, model.smoothness, model.lipschitz,
                          require_ln_m(geom, "lipschitz_lz"));
}

double lipschitz_lu(const Geometry& geom, const LossModel& model,
                    const GroupedDataset& ds) {
  double ln_m = require_ln_m(geom, "lipschitz_lu");
  double nbar = ds.n_bar();
  return lipschitz_lu_raw(geom.d_w, model.smoothness, model.lipschitz, ln_m,
                          static_cast<double>(geom.m),
                          nbar / static_cast<double>(ds.min_group_size()),
                          nbar / ds.harmonic_mean_group_size());
}

double lipschitz_li(const Geometry& geom, const LossModel& model) {
  return lipschitz_li_raw(geom.d_w, model.smoothness, model.lipschitz,
                          require_ln_m(geom, "lipschitz_li"),
                          static_cast<double>(geom.m));
}

}  // namespace gdro
