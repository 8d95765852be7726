#include "gdro/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gdro/rng.hpp"

namespace gdro {

namespace {

constexpr double kDiameterBound = 2.0 * 1.41421356237309504880168872420969808 + 1e-6;

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0)
      .count();
}

// Numerics tripwire: every prox output must stay feasible and within the
// domain diameter of the initial point; violations indicate a bug or a
// nonfinite blow-up, so the run aborts.
void check_iterate(const Geometry& geom, const Point& z, const Point& z0,
                   const char* algo, int s, int k) {
  auto fail = [&](const char* what) {
    throw std::runtime_error(std::string(algo) + ": " + what + " at epoch " +
                             std::to_string(s) + ", inner " + std::to_string(k));
  };
  if (!z.w.allFinite() || !z.q.allFinite()) fail("nonfinite iterate");
  if (z.w.norm() > geom.radius * (1.0 + 1e-9)) fail("iterate left the ball");
  double qsum = 0.0;
  for (int i = 0; i < geom.m; ++i) {
    if (z.q[i] < 0.0) fail("negative simplex weight");
    qsum += z.q[i];
  }
  if (std::abs(qsum - 1.0) > 1e-12) fail("simplex weight sum drifted");
  if (merged_norm(geom, z, z0) > kDiameterBound) fail("iterate outside domain diameter");
}

struct RunningAverage {
  Eigen::VectorXd w_sum;
  Eigen::VectorXd q_sum;
  double weight = 0.0;

  RunningAverage(int dim, int m)
      : w_sum(Eigen::VectorXd::Zero(dim)), q_sum(Eigen::VectorXd::Zero(m)) {}

  void add(const Point& z, double wgt) {
    w_sum += wgt * z.w;
    q_sum += wgt * z.q;
    weight += wgt;
  }

  Point value() const {
    return Point{w_sum / weight, q_sum / weight};
  }
};

struct Recorder {
  int record_every;
  Clock::time_point t0 = Clock::now();
  std::vector<TrajectoryRow> rows;

  explicit Recorder(int every) : record_every(every) {}

  bool due(std::int64_t inner_done) const {
    return record_every > 0 && inner_done % record_every == 0;
  }

  void push(std::int64_t grad_evals, double risk) {
    if (!rows.empty() && rows.back().grad_evals == grad_evals) return;
    rows.push_back({grad_evals, risk, elapsed_ns(t0)});
  }
};

int resolve_inner(double n_bar, int requested) {
  if (requested > 0) return requested;
  return std::max<int>(1, static_cast<int>(std::llround(n_bar)));
}

struct AlegResolved {
  int inner;
  double alpha;
  double eta;
  double lip;
};

AlegResolved resolve_aleg(const GroupedDataset& ds, const LossModel& model,
                          const Geometry& geom, const AlegConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("aleg: epochs must be >= 1");
  if (cfg.inner < 0) throw std::invalid_argument("aleg: inner must be >= 0");
  if (!(cfg.theta > 0.8 && cfg.theta < 0.99))
    throw std::invalid_argument("aleg: theta must lie in (0.8, 0.99)");
  AlegResolved r;
  r.inner = resolve_inner(ds.n_bar(), cfg.inner);
  r.alpha = 1.0 / r.inner;
  r.lip = geom.m == 1 ? model.smoothness : lipschitz_lz(geom, model);
  if (cfg.eta_override) {
    r.eta = *cfg.eta_override;
    if (!(r.eta > 0.0))
      throw std::invalid_argument("aleg: eta override must be positive");
    if (r.lip > 0.0) {
      double lo = 1.0 / (10.0 * r.lip * std::sqrt(static_cast<double>(r.inner)));
      double hi = 1.0 / (r.lip * std::sqrt(5.0 * r.inner));
      if (r.eta < lo * (1.0 - 1e-12) || r.eta > hi * (1.0 + 1e-12))
        throw std::invalid_argument(
            "aleg: eta override outside the admissible band "
            "[1/(10 L sqrt(K)), 1/(L sqrt(5K))]");
    }
  } else {
    r.eta = r.lip > 0.0 ? std::sqrt(r.alpha * (1.0 - cfg.theta)) / r.lip : 1.0;
  }
  return r;
}

}  // namespace

std::int64_t aleg_epoch_cost(const GroupedDataset& ds, int inner) {
  return ds.total_samples() +
         2 * static_cast<std::int64_t>(ds.num_groups()) * inner;
}

std::int64_t mpvr_epoch_cost(const GroupedDataset& ds, int inner) {
  return ds.total_samples() + 2 * static_cast<std::int64_t>(inner);
}

RunRecord aleg(const GroupedDataset& ds, const LossModel& model,
               const Geometry& geom, const AlegConfig& cfg, int record_every,
               const GroupShift* risk_shift, EvalCounter start_counter) {
  ds.validate();
  const int m = ds.num_groups();
  if (m != geom.m) throw std::invalid_argument("aleg: geometry group count mismatch");
  const AlegResolved res = resolve_aleg(ds, model, geom, cfg);
  const int S = cfg.epochs;
  const int K = res.inner;

  SplitMix64 rng(cfg.seed);
  EvalCounter counter = start_counter;
  EvalCounter metric_counter;
  Recorder rec(record_every);

  const Point z0 = init_point(geom);
  Point z = z0;
  // Virtual epoch s = -1: all its iterates equal z_0, so the first snapshot
  // is z_0 and the first mirror snapshot is its dual image.
  Point snap = z0;
  DualPoint mirror_snap = dual_map(geom, z0);

  RunningAverage out_avg(geom.dim, m);
  RunningAverage snap_primal(geom.dim, m);
  RunningAverage snap_dual(geom.dim, m);

  std::int64_t inner_done = 0;
  auto record_metric = [&]() {
    Point avg = out_avg.value();
    double risk =
        max_group_risk(ds, model, avg.w, &metric_counter, risk_shift).first;
    rec.push(counter.grad_evals, risk);
  };

  for (int s = 0; s < S; ++s) {
    if (s > 0) {
      // One-index-shifted weighted averages of the previous epoch's
      // trajectory; with the constant schedule the alpha weights sum to 1.
      snap = snap_primal.value();
      mirror_snap.dw = snap_dual.w_sum / snap_dual.weight;
      mirror_snap.sq = snap_dual.q_sum / snap_dual.weight;
      snap_primal = RunningAverage(geom.dim, m);
      snap_dual = RunningAverage(geom.dim, m);
    }
    MergedGradient g_full = full_gradient(ds, model, snap, counter, risk_shift);

    for (int k = 0; k < K; ++k) {
      Point z_half = prox_step(geom, g_full, res.eta, res.alpha, mirror_snap, z);
      check_iterate(geom, z_half, z0, "aleg", s, k);

      GroupSample sample = draw_group_sample(ds, rng);
      MergedGradient g_half =
          stochastic_gradient(ds, model, z_half, sample, counter, risk_shift);
      MergedGradient g_snap =
          stochastic_gradient(ds, model, snap, sample, counter, risk_shift);
      MergedGradient g = vr_estimator(g_half, g_snap, g_full);

      z = prox_step(geom, g, res.eta, res.alpha, mirror_snap, z);
      check_iterate(geom, z, z0, "aleg", s, k);

      snap_primal.add(z, res.alpha);
      DualPoint dz = dual_map(geom, z);
      snap_dual.add(Point{dz.dw, dz.sq}, res.alpha);

      out_avg.add(z_half, res.eta);
      ++inner_done;
      if (rec.due(inner_done)) record_metric();
    }
  }
  record_metric();

  RunRecord out;
  out.solution = out_avg.value();
  out.trajectory = std::move(rec.rows);
  out.final_counter = counter;
  out.metric_counter = metric_counter;
  out.config_echo.algo = "aleg";
  out.config_echo.epochs = S;
  out.config_echo.inner = K;
  out.config_echo.alpha = res.alpha;
  out.config_echo.eta = res.eta;
  out.config_echo.theta = cfg.theta;
  out.config_echo.smoothness = model.smoothness;
  out.config_echo.lipschitz_g = model.lipschitz;
  out.config_echo.lipschitz_const = res.lip;
  out.config_echo.seed = cfg.seed;
  return out;
}

ErmEstimate aleg_erm(const GroupedDataset& group, const LossModel& model,
                     const Geometry& geom, const AlegConfig& cfg) {
  if (group.num_groups() != 1)
    throw std::invalid_argument("aleg_erm: expects a one-group dataset");
  if (geom.m != 1)
    throw std::invalid_argument("aleg_erm: expects the degenerate m = 1 geometry");
  RunRecord rec = aleg(group, model, geom, cfg, 0);
  ErmEstimate est;
  est.w = rec.solution.w;
  est.counter = rec.final_counter;
  est.r_hat = group_risk(group, model, 0, est.w, &est.counter);
  return est;
}

AlemResult alem(const GroupedDataset& ds, const LossModel& model,
                const Geometry& geom, const AlemConfig& cfg, int record_every) {
  ds.validate();
  if (cfg.budget < 1) throw std::invalid_argument("alem: budget must be >= 1");
  const double n_bar = ds.n_bar();
  const int K = std::max<int>(1, static_cast<int>(std::llround(n_bar)));
  const int S = std::max<int>(
      1, static_cast<int>(std::ceil(static_cast<double>(cfg.budget) /
                                    std::sqrt(n_bar))));

  AlemResult result;
  EvalCounter stage1_total;
  Geometry group_geom(geom.dim, 1, geom.radius);
  for (int i = 0; i < ds.num_groups(); ++i) {
    GroupedDataset sub = single_group(ds, i);
    AlegConfig c1 = cfg.stage1;
    c1.epochs = S;
    c1.inner = K;
    c1.seed = SplitMix64::mix(cfg.seed, static_cast<std::uint64_t>(i) + 1);
    ErmEstimate est = aleg_erm(sub, model, group_geom, c1);
    stage1_total += est.counter;
    result.r_hats.push_back(est.r_hat);
    result.stage1_ws.push_back(std::move(est.w));
  }

  GroupShift shift =
      Eigen::Map<const Eigen::VectorXd>(result.r_hats.data(), ds.num_groups());
  AlegConfig c2 = cfg.stage2;
  c2.epochs = S;
  c2.inner = K;
  c2.seed = cfg.seed;
  result.record = aleg(ds, model, geom, c2, record_every, &shift, stage1_total);
  result.record.config_echo.algo = "alem";
  result.record.config_echo.budget = cfg.budget;
  result.record.config_echo.stage1_r_hat = result.r_hats;
  return result;
}

double smd_default_eta0(const GroupedDataset& ds, const LossModel& model,
                        const Geometry& geom) {
  // Dual-norm bound on the group-sampling gradient over W: the w-block is a
  // convex combination of per-sample gradients (norm <= G), each q-block
  // entry a loss value (|loss| <= loss at 0 plus G R).
  double loss_at_zero = model.kind == LossKind::logistic_binary
                            ? std::log(2.0)
                            : std::log(static_cast<double>(model.classes));
  double q_bound = loss_at_zero + model.lipschitz * geom.radius;
  double M = std::sqrt(2.0 * geom.d_w * geom.d_w * model.lipschitz *
                           model.lipschitz +
                       2.0 * geom.d_q * geom.d_q * q_bound * q_bound);
  return M > 0.0 ? std::sqrt(2.0) / M : 1.0;
}

RunRecord smd(const GroupedDataset& ds, const LossModel& model,
              const Geometry& geom, std::int64_t steps, double eta0,
              std::uint64_t seed, int record_every,
              const GroupShift* risk_shift) {
  ds.validate();
  if (steps < 1) throw std::invalid_argument("smd: steps must be >= 1");
  if (ds.num_groups() != geom.m)
    throw std::invalid_argument("smd: geometry group count mismatch");
  if (eta0 <= 0.0) eta0 = smd_default_eta0(ds, model, geom);

  SplitMix64 rng(seed);
  EvalCounter counter;
  EvalCounter metric_counter;
  Recorder rec(record_every);

  const Point z0 = init_point(geom);
  Point z = z0;
  RunningAverage avg(geom.dim, geom.m);
  DualPoint unused_anchor{Eigen::VectorXd::Zero(geom.dim),
                          Eigen::VectorXd::Zero(geom.m)};

  auto record_metric = [&]() {
    Point a = avg.value();
    double risk =
        max_group_risk(ds, model, a.w, &metric_counter, risk_shift).first;
    rec.push(counter.grad_evals, risk);
  };

  for (std::int64_t t = 0; t < steps; ++t) {
    avg.add(z, 1.0);
    GroupSample sample = draw_group_sample(ds, rng);
    MergedGradient g =
        stochastic_gradient(ds, model, z, sample, counter, risk_shift);
    double eta_t = eta0 / std::sqrt(static_cast<double>(t + 1));
    z = prox_step(geom, g, eta_t, 0.0, unused_anchor, z);
    check_iterate(geom, z, z0, "smd", 0, static_cast<int>(t));
    if (rec.due(t + 1)) record_metric();
  }
  record_metric();

  RunRecord out;
  out.solution = avg.value();
  out.trajectory = std::move(rec.rows);
  out.final_counter = counter;
  out.metric_counter = metric_counter;
  out.config_echo.algo = "smd";
  out.config_echo.epochs = static_cast<int>(std::min<std::int64_t>(
      steps, std::numeric_limits<int>::max()));
  out.config_echo.eta = eta0;
  out.config_echo.smoothness = model.smoothness;
  out.config_echo.lipschitz_g = model.lipschitz;
  out.config_echo.seed = seed;
  return out;
}

RunRecord mpvr(const GroupedDataset& ds, const LossModel& model,
               const Geometry& geom, const MpvrConfig& cfg, int record_every,
               const GroupShift* risk_shift) {
  ds.validate();
  const int m = ds.num_groups();
  if (m < 2) throw std::invalid_argument("mpvr: needs m >= 2");
  if (m != geom.m) throw std::invalid_argument("mpvr: geometry group count mismatch");
  if (cfg.epochs < 1) throw std::invalid_argument("mpvr: epochs must be >= 1");
  const int S = cfg.epochs;
  const int K = cfg.inner > 0
                    ? cfg.inner
                    : std::max<int>(1, static_cast<int>(std::llround(
                                           m * ds.n_bar())));
  // Default anchor weight 1/K, one snapshot contribution per epoch; mirrors
  // the constant schedule the variance-reduced group-sampling solver uses.
  // K = 1 drops the anchor entirely to stay inside [0, 1).
  const double alpha = cfg.alpha < 0.0 ? (K > 1 ? 1.0 / K : 0.0) : cfg.alpha;
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("mpvr: alpha must lie in [0, 1)");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0))
    throw std::invalid_argument("mpvr: gamma must lie in (0, 1)");
  const bool uniform = cfg.sampling == MpvrConfig::Sampling::uniform;
  const double lc = uniform ? lipschitz_lu(geom, model, ds)
                            : lipschitz_li(geom, model);
  const double eta = lc > 0.0 ? cfg.gamma * std::sqrt(1.0 - alpha) / lc : 1.0;

  SplitMix64 rng(cfg.seed);
  EvalCounter counter;
  EvalCounter metric_counter;
  Recorder rec(record_every);

  const Point z0 = init_point(geom);
  Point z = z0;
  Point snap = z0;
  DualPoint mirror_snap = dual_map(geom, z0);
  MergedGradient g_full = full_gradient(ds, model, snap, counter, risk_shift);

  RunningAverage out_avg(geom.dim, m);
  std::int64_t inner_done = 0;
  auto record_metric = [&]() {
    Point avg = out_avg.value();
    double risk =
        max_group_risk(ds, model, avg.w, &metric_counter, risk_shift).first;
    rec.push(counter.grad_evals, risk);
  };

  for (int s = 0; s < S; ++s) {
    RunningAverage erg_primal(geom.dim, m);
    RunningAverage erg_dual(geom.dim, m);
    for (int k = 0; k < K; ++k) {
      erg_primal.add(z, 1.0);
      DualPoint dz = dual_map(geom, z);
      erg_dual.add(Point{dz.dw, dz.sq}, 1.0);

      Point z_half = prox_step(geom, g_full, eta, alpha, mirror_snap, z);
      check_iterate(geom, z_half, z0, "mpvr", s, k);

      FlatIndex idx = uniform ? draw_uniform_index(ds, rng)
                              : draw_importance_index(ds, rng);
      MergedGradient g_half, g_snap;
      if (uniform) {
        g_half = mpvr_uniform_gradient_at(ds, model, z_half, idx, counter,
                                          risk_shift);
        g_snap =
            mpvr_uniform_gradient_at(ds, model, snap, idx, counter, risk_shift);
      } else {
        g_half = mpvr_importance_gradient_at(ds, model, z_half, idx, counter,
                                             risk_shift);
        g_snap = mpvr_importance_gradient_at(ds, model, snap, idx, counter,
                                             risk_shift);
      }
      MergedGradient g = vr_estimator(g_half, g_snap, g_full);

      z = prox_step(geom, g, eta, alpha, mirror_snap, z);
      check_iterate(geom, z, z0, "mpvr", s, k);

      out_avg.add(z_half, 1.0);
      ++inner_done;
      if (rec.due(inner_done)) record_metric();
    }
    // Epoch-end snapshot refresh: ergodic means of this epoch's pre-update
    // iterates. The last epoch's refresh would never be consumed, so it is
    // skipped and one full gradient is charged per epoch.
    if (s + 1 < S) {
      snap = erg_primal.value();
      mirror_snap.dw = erg_dual.w_sum / erg_dual.weight;
      mirror_snap.sq = erg_dual.q_sum / erg_dual.weight;
      g_full = full_gradient(ds, model, snap, counter, risk_shift);
    }
  }
  record_metric();

  RunRecord out;
  out.solution = out_avg.value();
  out.trajectory = std::move(rec.rows);
  out.final_counter = counter;
  out.metric_counter = metric_counter;
  out.config_echo.algo = uniform ? "mpvr-uniform" : "mpvr-importance";
  out.config_echo.epochs = S;
  out.config_echo.inner = K;
  out.config_echo.alpha = alpha;
  out.config_echo.eta = eta;
  out.config_echo.gamma = cfg.gamma;
  out.config_echo.smoothness = model.smoothness;
  out.config_echo.lipschitz_g = model.lipschitz;
  out.config_echo.lipschitz_const = lc;
  out.config_echo.sampling = uniform ? "uniform" : "importance";
  out.config_echo.seed = cfg.seed;
  return out;
}

}  // namespace gdro
