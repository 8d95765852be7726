#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gdro/metrics.hpp"
#include "gdro/problem.hpp"

namespace gdro {

// Variance-reduced stochastic mirror prox configuration. The constant
// schedule is used throughout: K_s = K, alpha_k^s = 1/K, and a constant step
// eta = sqrt(alpha (1 - theta)) / L_z, which lands inside the admissible band
// [1/(10 L_z sqrt(K)), 1/(L_z sqrt(5 K))] for theta in (0.8, 0.99). An
// explicit eta must itself lie in that band. One-group problems replace L_z
// by the loss smoothness L.
struct AlegConfig {
  int epochs = 1;                     // S
  int inner = 0;                      // K; 0 resolves to round(n_bar)
  double theta = 0.9;                 // (0.8, 0.99)
  std::optional<double> eta_override;
  std::uint64_t seed = 0;
};

struct MpvrConfig {
  enum class Sampling { uniform, importance };
  int epochs = 1;            // S
  int inner = 0;             // K; 0 resolves to round(m * n_bar)
  double alpha = -1.0;       // [0, 1); negative resolves to 1/K
  double gamma = 0.9;        // (0, 1); eta = gamma sqrt(1 - alpha) / L_c
  Sampling sampling = Sampling::uniform;
  std::uint64_t seed = 0;
};

// Two-stage configuration: stage 1 estimates each group's minimal empirical
// risk with one-group runs at S = ceil(T / sqrt(n_bar)), K = round(n_bar);
// stage 2 solves the shifted problem with the same S and K. Stage templates
// contribute theta / eta_override; their S and K are resolved from T.
// Stage-1 group i draws from substream mix(seed, i + 1); stage 2 uses seed
// itself.
struct AlemConfig {
  std::int64_t budget = 1;  // T
  AlegConfig stage1;
  AlegConfig stage2;
  std::uint64_t seed = 0;
};

struct TrajectoryRow {
  std::int64_t grad_evals = 0;
  double max_risk = 0.0;
  std::int64_t wallclock_ns = 0;
};

// Resolved hyperparameters echoed into results and summaries.
struct ResolvedParams {
  std::string algo;
  int epochs = 0;
  int inner = 0;
  double alpha = 0.0;
  double eta = 0.0;
  double theta = 0.0;
  double gamma = 0.0;
  double smoothness = 0.0;       // L
  double lipschitz_g = 0.0;      // G
  double lipschitz_const = 0.0;  // L_z, L_u, L_i, or L for one-group runs
  std::string sampling;
  std::uint64_t seed = 0;
  std::int64_t budget = 0;                // ALEM
  std::vector<double> stage1_r_hat;       // ALEM
};

struct RunRecord {
  Point solution;                       // weighted average of half points
  std::vector<TrajectoryRow> trajectory;
  EvalCounter final_counter;            // the algorithm's own evaluations
  EvalCounter metric_counter;           // trajectory metric evaluations
  ResolvedParams config_echo;
};

// ALEG. record_every > 0 appends a trajectory row every that many inner
// iterations (plus a final row); the metric is max_i R_i at the running
// eta-weighted average, evaluated on the metric counter. risk_shift, when
// set, turns the run into the shifted (excess-risk) problem. start_counter
// offsets the evaluation axis, e.g. by a preceding stage's cost.
RunRecord aleg(const GroupedDataset& ds, const LossModel& model,
               const Geometry& geom, const AlegConfig& cfg, int record_every,
               const GroupShift* risk_shift = nullptr,
               EvalCounter start_counter = {});

// One-group ERM via ALEG; returns the averaged weights and the empirical
// risk evaluated there.
struct ErmEstimate {
  Eigen::VectorXd w;
  double r_hat = 0.0;
  EvalCounter counter;
};
ErmEstimate aleg_erm(const GroupedDataset& group, const LossModel& model,
                     const Geometry& geom, const AlegConfig& cfg);

struct AlemResult {
  RunRecord record;
  std::vector<double> r_hats;
  std::vector<Eigen::VectorXd> stage1_ws;
};
AlemResult alem(const GroupedDataset& ds, const LossModel& model,
                const Geometry& geom, const AlemConfig& cfg, int record_every);

// Stochastic mirror descent baseline: per step one group sample, the
// group-sampling gradient at the current iterate, and a single-anchor mirror
// step with eta_t = eta0 / sqrt(t + 1); returns the uniform average of the
// query points. eta0 <= 0 resolves to sqrt(2) / M, where M bounds the dual
// norm of the stochastic gradient over W.
RunRecord smd(const GroupedDataset& ds, const LossModel& model,
              const Geometry& geom, std::int64_t steps, double eta0,
              std::uint64_t seed, int record_every,
              const GroupShift* risk_shift = nullptr);

double smd_default_eta0(const GroupedDataset& ds, const LossModel& model,
                        const Geometry& geom);

// Mirror prox with variance reduction on the flattened one-level sum;
// snapshots are plain ergodic means of each epoch's pre-update iterates,
// refreshed at epoch end. Requires m >= 2.
RunRecord mpvr(const GroupedDataset& ds, const LossModel& model,
               const Geometry& geom, const MpvrConfig& cfg, int record_every,
               const GroupShift* risk_shift = nullptr);

// Exact per-run gradient-evaluation costs; used for budget resolution.
std::int64_t aleg_epoch_cost(const GroupedDataset& ds, int inner);  // m n_bar + 2mK
std::int64_t mpvr_epoch_cost(const GroupedDataset& ds, int inner);  // m n_bar + 2K

}  // namespace gdro
