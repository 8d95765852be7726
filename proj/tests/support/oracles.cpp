#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracles {

namespace {

double entropy_term(const Eigen::VectorXd& q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) s += q[i] * std::log(q[i]);
  return s;
}

double psi_ref(const gdro::Geometry& geom, const Eigen::VectorXd& w,
               const Eigen::VectorXd& q) {
  double v = 0.5 * w.squaredNorm() / (2.0 * geom.d_w * geom.d_w);
  if (geom.m > 1) v += entropy_term(q) / (2.0 * geom.d_q * geom.d_q);
  return v;
}

double bregman_ref(const gdro::Geometry& geom, const Eigen::VectorXd& w,
                   const Eigen::VectorXd& q, const gdro::Point& at) {
  double v = psi_ref(geom, w, q) - psi_ref(geom, at.w, at.q);
  v -= (at.w / (2.0 * geom.d_w * geom.d_w)).dot(w - at.w);
  if (geom.m > 1) {
    const double scale = 1.0 / (2.0 * geom.d_q * geom.d_q);
    for (int i = 0; i < geom.m; ++i)
      v -= (1.0 + std::log(at.q[i])) * scale * (q[i] - at.q[i]);
  }
  return v;
}

}  // namespace

double prox_objective(const gdro::Geometry& geom, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& q, const gdro::MergedGradient& g,
                      double eta, double alpha, const gdro::Point& anchor,
                      const gdro::Point& current) {
  double v = eta * (g.gw.dot(w) + g.gq.dot(q));
  if (alpha > 0.0) v += alpha * bregman_ref(geom, w, q, anchor);
  if (alpha < 1.0) v += (1.0 - alpha) * bregman_ref(geom, w, q, current);
  return v;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  int rho = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cum += u[j];
    double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      rho = static_cast<int>(j + 1);
      tau = t;
    }
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = std::max(0.0, v[i] - tau);
  return out;
}

namespace {

// Projected gradient refinement for the separable prox objective. The w and
// q blocks are refined independently (the objective has no cross terms).
void refine_w(const gdro::Geometry& geom, const gdro::MergedGradient& g,
              double eta, double alpha, const gdro::Point& anchor,
              const gdro::Point& current, Eigen::VectorXd& w) {
  const double tw = 2.0 * geom.d_w * geom.d_w;
  Eigen::VectorXd target = Eigen::VectorXd::Zero(w.size());
  if (alpha > 0.0) target += alpha * anchor.w / tw;
  if (alpha < 1.0) target += (1.0 - alpha) * current.w / tw;
  double step = 0.9 * tw;  // gradient of the quadratic has modulus 1/tw
  for (int it = 0; it < 400; ++it) {
    Eigen::VectorXd grad = eta * g.gw + w / tw - target;
    w -= step * grad;
    double n = w.norm();
    if (n > geom.radius) w *= geom.radius / n;
  }
}

void refine_q(const gdro::Geometry& geom, const gdro::MergedGradient& g,
              double eta, double alpha, const gdro::Point& anchor,
              const gdro::Point& current, Eigen::VectorXd& q) {
  const int m = geom.m;
  const double tq = 2.0 * geom.d_q * geom.d_q;
  Eigen::VectorXd lin = eta * g.gq;
  for (int i = 0; i < m; ++i) {
    if (alpha > 0.0) lin[i] -= alpha * (1.0 + std::log(anchor.q[i])) / tq;
    if (alpha < 1.0) lin[i] -= (1.0 - alpha) * (1.0 + std::log(current.q[i])) / tq;
  }
  auto value = [&](const Eigen::VectorXd& p) {
    return lin.dot(p) + entropy_term(p) / tq;
  };

  // Equality-constrained damped Newton on the simplex interior. The entropy
  // Hessian is diagonal, so the KKT system solves in closed form; damping
  // keeps iterates strictly positive.
  for (int i = 0; i < m; ++i) q[i] = std::max(q[i], 1e-12);
  q /= q.sum();
  double best = value(q);
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd grad(m), hinv(m);
    for (int i = 0; i < m; ++i) {
      grad[i] = lin[i] + (1.0 + std::log(q[i])) / tq;
      hinv[i] = tq * q[i];
    }
    double lambda = -hinv.dot(grad) / hinv.sum();
    Eigen::VectorXd dir = -hinv.cwiseProduct((grad.array() + lambda).matrix());
    double tau = 1.0;
    for (int i = 0; i < m; ++i)
      if (dir[i] < 0.0) tau = std::min(tau, -0.99 * q[i] / dir[i]);
    bool improved = false;
    while (tau > 1e-16) {
      Eigen::VectorXd cand = q + tau * dir;
      cand /= cand.sum();
      double v = value(cand);
      if (v < best - 1e-18) {
        q = cand;
        best = v;
        improved = true;
        break;
      }
      tau *= 0.5;
    }
    if (!improved) break;
  }
}

void simplex_grid(int m, int ticks, int coord, Eigen::VectorXd& point,
                  int remaining, const std::function<void(const Eigen::VectorXd&)>& visit) {
  if (coord == m - 1) {
    point[coord] = static_cast<double>(remaining) / ticks;
    visit(point);
    return;
  }
  for (int t = 0; t <= remaining; ++t) {
    point[coord] = static_cast<double>(t) / ticks;
    simplex_grid(m, ticks, coord + 1, point, remaining - t, visit);
  }
}

}  // namespace

double prox_grid_min(const gdro::Geometry& geom, const gdro::MergedGradient& g,
                     double eta, double alpha, const gdro::Point& anchor,
                     const gdro::Point& current) {
  // w block: box grid clipped to the ball, then projected-gradient polish.
  const int dim = geom.dim;
  const int ticks_w = 9;
  Eigen::VectorXd best_w = Eigen::VectorXd::Zero(dim);
  const double tw = 2.0 * geom.d_w * geom.d_w;
  auto w_value = [&](const Eigen::VectorXd& w) {
    double v = eta * g.gw.dot(w) + 0.5 * w.squaredNorm() / tw;
    if (alpha > 0.0) v -= alpha * anchor.w.dot(w) / tw;
    if (alpha < 1.0) v -= (1.0 - alpha) * current.w.dot(w) / tw;
    return v;
  };
  double best_w_val = w_value(best_w);
  std::vector<int> idx(dim, 0);
  while (true) {
    Eigen::VectorXd w(dim);
    for (int d = 0; d < dim; ++d)
      w[d] = -geom.radius + 2.0 * geom.radius * idx[d] / ticks_w;
    double n = w.norm();
    if (n > geom.radius) w *= geom.radius / n;
    double v = w_value(w);
    if (v < best_w_val) {
      best_w_val = v;
      best_w = w;
    }
    int d = 0;
    while (d < dim && ++idx[d] > ticks_w) idx[d++] = 0;
    if (d == dim) break;
  }
  refine_w(geom, g, eta, alpha, anchor, current, best_w);

  // q block: barycentric grid, then projected-gradient polish.
  Eigen::VectorXd best_q;
  if (geom.m > 1) {
    const int m = geom.m;
    const double tq = 2.0 * geom.d_q * geom.d_q;
    Eigen::VectorXd lin = eta * g.gq;
    for (int i = 0; i < m; ++i) {
      if (alpha > 0.0) lin[i] -= alpha * (1.0 + std::log(anchor.q[i])) / tq;
      if (alpha < 1.0) lin[i] -= (1.0 - alpha) * (1.0 + std::log(current.q[i])) / tq;
    }
    auto q_value = [&](const Eigen::VectorXd& p) {
      return lin.dot(p) + entropy_term(p) / tq;
    };
    best_q = Eigen::VectorXd::Constant(m, 1.0 / m);
    double best_q_val = q_value(best_q);
    Eigen::VectorXd point(m);
    const int ticks_q = 16;
    simplex_grid(m, ticks_q, 0, point, ticks_q, [&](const Eigen::VectorXd& p) {
      double v = q_value(p);
      if (v < best_q_val) {
        best_q_val = v;
        best_q = p;
      }
    });
    refine_q(geom, g, eta, alpha, anchor, current, best_q);
  } else {
    best_q = Eigen::VectorXd::Ones(1);
  }
  return prox_objective(geom, best_w, best_q, g, eta, alpha, anchor, current);
}

double naive_sample_loss(const gdro::LossModel& model, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& x, int label) {
  if (model.kind == gdro::LossKind::logistic_binary) {
    double margin = label * w.dot(x);
    if (-margin > 500.0) return -margin;
    return std::log(1.0 + std::exp(-margin));
  }
  const int C = model.classes;
  const int d = static_cast<int>(x.size());
  double denom = 0.0;
  double smax = -1e300;
  Eigen::VectorXd scores(C);
  for (int c = 0; c < C; ++c) {
    scores[c] = w.segment(c * d, d).dot(x);
    smax = std::max(smax, scores[c]);
  }
  for (int c = 0; c < C; ++c) denom += std::exp(scores[c] - smax);
  return std::log(denom) + smax - scores[label];
}

Eigen::VectorXd naive_sample_grad(const gdro::LossModel& model,
                                  const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& x, int label) {
  if (model.kind == gdro::LossKind::logistic_binary) {
    double margin = label * w.dot(x);
    double sigma = 1.0 / (1.0 + std::exp(margin));
    return (-label * sigma) * x;
  }
  const int C = model.classes;
  const int d = static_cast<int>(x.size());
  Eigen::VectorXd scores(C);
  double smax = -1e300;
  for (int c = 0; c < C; ++c) {
    scores[c] = w.segment(c * d, d).dot(x);
    smax = std::max(smax, scores[c]);
  }
  Eigen::VectorXd p = (scores.array() - smax).exp();
  p /= p.sum();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(C * d);
  for (int c = 0; c < C; ++c)
    grad.segment(c * d, d) = (p[c] - (c == label ? 1.0 : 0.0)) * x;
  return grad;
}

gdro::MergedGradient naive_full_gradient(const gdro::GroupedDataset& ds,
                                         const gdro::LossModel& model,
                                         const gdro::Point& z) {
  gdro::MergedGradient g;
  g.gw = Eigen::VectorXd::Zero(model.weight_dim(ds.dim));
  g.gq = Eigen::VectorXd::Zero(ds.num_groups());
  for (int i = 0; i < ds.num_groups(); ++i) {
    const std::int64_t n = ds.group_size(i);
    double risk = 0.0;
    Eigen::VectorXd gi = Eigen::VectorXd::Zero(g.gw.size());
    for (std::int64_t j = 0; j < n; ++j) {
      Eigen::VectorXd x = ds.features[i].row(j).transpose();
      risk += naive_sample_loss(model, z.w, x, ds.labels[i][j]);
      gi += naive_sample_grad(model, z.w, x, ds.labels[i][j]);
    }
    g.gw += z.q[i] / static_cast<double>(n) * gi;
    g.gq[i] = -risk / static_cast<double>(n);
  }
  return g;
}

gdro::Point random_feasible(const gdro::Geometry& geom, gdro::SplitMix64& rng,
                            double spread) {
  gdro::Point z;
  z.w.resize(geom.dim);
  for (int d = 0; d < geom.dim; ++d) z.w[d] = rng.next_gaussian();
  double scale = geom.radius * rng.next_unit() / std::max(z.w.norm(), 1e-12);
  z.w *= scale;
  z.q.resize(geom.m);
  if (geom.m == 1) {
    z.q[0] = 1.0;
    return z;
  }
  Eigen::VectorXd score(geom.m);
  for (int i = 0; i < geom.m; ++i)
    score[i] = spread * (2.0 * rng.next_unit() - 1.0);
  double smax = score.maxCoeff();
  z.q = (score.array() - smax).exp();
  z.q /= z.q.sum();
  return z;
}

gdro::GroupedDataset random_binary_dataset(int m,
                                           const std::vector<std::int64_t>& n,
                                           int dim, std::uint64_t seed) {
  gdro::GroupedDataset ds;
  ds.dim = dim;
  ds.label_kind = gdro::LabelKind::binary;
  gdro::SplitMix64 rng(seed);
  for (int i = 0; i < m; ++i) {
    gdro::FeatureMatrix x(n[i], dim);
    Eigen::VectorXi y(n[i]);
    for (std::int64_t j = 0; j < n[i]; ++j) {
      for (int d = 0; d < dim; ++d) x(j, d) = rng.next_gaussian();
      y[j] = rng.next_unit() < 0.5 ? -1 : 1;
    }
    ds.features.push_back(std::move(x));
    ds.labels.push_back(std::move(y));
  }
  ds.validate();
  return ds;
}

gdro::Point mirror_prox_saddle(const gdro::GroupedDataset& ds,
                               const gdro::LossModel& model,
                               const gdro::Geometry& geom, std::int64_t iters) {
  double lip = geom.m > 1 ? gdro::lipschitz_lz(geom, model) : model.smoothness;
  double eta = lip > 0.0 ? 0.5 / lip : 1.0;
  gdro::EvalCounter scratch;
  gdro::DualPoint unused{Eigen::VectorXd::Zero(geom.dim),
                         Eigen::VectorXd::Zero(geom.m)};
  gdro::Point z = gdro::init_point(geom);
  Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(geom.dim);
  Eigen::VectorXd q_sum = Eigen::VectorXd::Zero(geom.m);
  for (std::int64_t t = 0; t < iters; ++t) {
    gdro::MergedGradient g1 = gdro::full_gradient(ds, model, z, scratch);
    gdro::Point half = gdro::prox_step(geom, g1, eta, 0.0, unused, z);
    gdro::MergedGradient g2 = gdro::full_gradient(ds, model, half, scratch);
    z = gdro::prox_step(geom, g2, eta, 0.0, unused, z);
    w_sum += half.w;
    q_sum += half.q;
  }
  return gdro::Point{w_sum / static_cast<double>(iters),
                     q_sum / static_cast<double>(iters)};
}

std::vector<gdro::GroupSample> all_group_samples(const gdro::GroupedDataset& ds) {
  std::vector<gdro::GroupSample> out;
  gdro::GroupSample cur;
  cur.per_group.assign(ds.num_groups(), 0);
  while (true) {
    out.push_back(cur);
    int i = 0;
    while (i < ds.num_groups() && ++cur.per_group[i] >= ds.group_size(i))
      cur.per_group[i++] = 0;
    if (i == ds.num_groups()) break;
  }
  return out;
}

}  // namespace oracles
