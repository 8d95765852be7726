// Benchmark CLI for empirical group-robust optimization: dataset generation,
// solver runs, duality-gap evaluation, and budgeted multi-seed comparisons.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gdro/datagen.hpp"
#include "gdro/dataset.hpp"
#include "gdro/metrics.hpp"
#include "gdro/problem.hpp"
#include "gdro/solvers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

unsigned max_worker_threads() {
  if (const char* env = std::getenv("GDRO_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(0..jobs-1) on up to GDRO_THREADS workers; rethrows the first
// worker exception.
void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  unsigned workers = std::min<std::size_t>(max_worker_threads(), jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= jobs) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string trajectory_csv(const std::vector<gdro::TrajectoryRow>& rows) {
  std::string out = "grad_evals,max_risk,wallclock_ns\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%lld\n",
                  static_cast<long long>(r.grad_evals), r.max_risk,
                  static_cast<long long>(r.wallclock_ns));
    out += buf;
  }
  return out;
}

std::string solution_json(const gdro::Point& z, double radius) {
  std::string out = "{\"radius\":" + fmt17(radius) + ",\"w\":[";
  for (Eigen::Index i = 0; i < z.w.size(); ++i) {
    if (i) out += ',';
    out += fmt17(z.w[i]);
  }
  out += "],\"q\":[";
  for (Eigen::Index i = 0; i < z.q.size(); ++i) {
    if (i) out += ',';
    out += fmt17(z.q[i]);
  }
  out += "]}\n";
  return out;
}

json resolved_json(const gdro::ResolvedParams& p) {
  json j;
  j["algo"] = p.algo;
  j["epochs"] = p.epochs;
  j["inner"] = p.inner;
  j["alpha"] = p.alpha;
  j["eta"] = p.eta;
  j["theta"] = p.theta;
  j["gamma"] = p.gamma;
  j["L"] = p.smoothness;
  j["G"] = p.lipschitz_g;
  j["lipschitz_const"] = p.lipschitz_const;
  if (!p.sampling.empty()) j["sampling"] = p.sampling;
  if (p.budget > 0) j["budget"] = p.budget;
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- gen ----

struct GenArgs {
  std::string kind = "gdro";
  int m = 1;
  int dim = 1;
  std::int64_t n = 200;
  std::uint64_t seed = 0;
  std::string out;
  std::string test_out;
  std::string format = "text";
  double flip_prob = 0.1;
};

int run_gen(const GenArgs& a) {
  gdro::SynthSpec spec;
  spec.kind = a.kind == "mero" ? gdro::SynthSpec::Kind::mero
                               : gdro::SynthSpec::Kind::gdro;
  spec.m = a.m;
  spec.dim = a.dim;
  spec.n_per_group = {a.n};
  spec.seed = a.seed;
  spec.flip_prob = a.flip_prob;

  gdro::GroupedDataset heldout;
  gdro::GroupedDataset* heldout_ptr = a.test_out.empty() ? nullptr : &heldout;
  gdro::GroupedDataset ds = spec.kind == gdro::SynthSpec::Kind::mero
                                ? gdro::gen_mero(spec, heldout_ptr)
                                : gdro::gen_gdro(spec, heldout_ptr);

  gdro::DatasetFormat format = a.format == "binary" ? gdro::DatasetFormat::binary
                                                    : gdro::DatasetFormat::text;
  gdro::save_dataset(ds, a.out, format);
  if (heldout_ptr) gdro::save_dataset(heldout, a.test_out, format);

  json summary;
  summary["m"] = ds.num_groups();
  summary["dim"] = ds.dim;
  summary["n_bar"] = ds.n_bar();
  summary["bytes"] = static_cast<std::int64_t>(fs::file_size(a.out));
  std::cout << summary.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------- run ----

struct Experiment {
  std::string algo;
  std::string dataset;
  double radius = 1.0;
  std::vector<std::uint64_t> seeds;
  int record_every = 0;
  std::string output;
  json block;  // the one algorithm block
};

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
  throw std::runtime_error("config error at '" + field + "': " + why);
}

template <typename T>
T get_field(const json& j, const std::string& field) {
  if (!j.contains(field)) config_error(field, "missing");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    config_error(field, e.what());
  }
}

Experiment parse_experiment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config parse error: ") + e.what());
  }

  Experiment ex;
  ex.algo = get_field<std::string>(j, "algo");
  ex.dataset = get_field<std::string>(j, "dataset");
  ex.output = get_field<std::string>(j, "output");
  ex.seeds = get_field<std::vector<std::uint64_t>>(j, "seeds");
  if (ex.seeds.empty()) config_error("seeds", "must list at least one seed");
  if (j.contains("record_every"))
    ex.record_every = get_field<int>(j, "record_every");
  if (j.contains("geometry"))
    ex.radius = get_field<double>(j.at("geometry"), "radius");

  static const std::vector<std::string> algos = {
      "aleg", "alem", "smd", "mpvr-uniform", "mpvr-importance"};
  if (std::find(algos.begin(), algos.end(), ex.algo) == algos.end())
    config_error("algo", "unknown algorithm '" + ex.algo + "'");

  std::string want_block = ex.algo.rfind("mpvr", 0) == 0 ? "mpvr" : ex.algo;
  int blocks = 0;
  for (const std::string& b : {"aleg", "alem", "smd", "mpvr"})
    if (j.contains(b)) ++blocks;
  if (blocks != 1 || !j.contains(want_block))
    config_error(want_block,
                 "exactly one algorithm block matching 'algo' is required");
  ex.block = j.at(want_block);

  if (want_block == "mpvr" && ex.block.contains("sampling")) {
    std::string s = get_field<std::string>(ex.block, "sampling");
    if ("mpvr-" + s != ex.algo)
      config_error("mpvr.sampling", "inconsistent with algo '" + ex.algo + "'");
  }
  return ex;
}

gdro::AlegConfig parse_aleg_block(const json& b) {
  gdro::AlegConfig cfg;
  cfg.epochs = get_field<int>(b, "epochs");
  if (b.contains("inner")) cfg.inner = get_field<int>(b, "inner");
  if (b.contains("theta")) cfg.theta = get_field<double>(b, "theta");
  if (b.contains("eta") && !b.at("eta").is_null()) {
    double eta = get_field<double>(b, "eta");
    if (eta > 0) cfg.eta_override = eta;
  }
  return cfg;
}

struct SeedOutput {
  gdro::RunRecord record;
  std::vector<double> r_hats;  // alem only
};

SeedOutput run_one_seed(const Experiment& ex, const gdro::GroupedDataset& ds,
                        const gdro::LossModel& model, const gdro::Geometry& geom,
                        std::uint64_t seed) {
  SeedOutput out;
  if (ex.algo == "aleg") {
    gdro::AlegConfig cfg = parse_aleg_block(ex.block);
    cfg.seed = seed;
    out.record = gdro::aleg(ds, model, geom, cfg, ex.record_every);
  } else if (ex.algo == "alem") {
    gdro::AlemConfig cfg;
    cfg.budget = get_field<std::int64_t>(ex.block, "budget");
    if (ex.block.contains("theta")) {
      cfg.stage1.theta = get_field<double>(ex.block, "theta");
      cfg.stage2.theta = cfg.stage1.theta;
    }
    cfg.seed = seed;
    gdro::AlemResult res = gdro::alem(ds, model, geom, cfg, ex.record_every);
    out.record = std::move(res.record);
    out.r_hats = std::move(res.r_hats);
  } else if (ex.algo == "smd") {
    std::int64_t steps = get_field<std::int64_t>(ex.block, "steps");
    double eta0 = ex.block.contains("eta0") && !ex.block.at("eta0").is_null()
                      ? get_field<double>(ex.block, "eta0")
                      : 0.0;
    out.record =
        gdro::smd(ds, model, geom, steps, eta0, seed, ex.record_every);
  } else {
    gdro::MpvrConfig cfg;
    cfg.epochs = get_field<int>(ex.block, "epochs");
    if (ex.block.contains("inner")) cfg.inner = get_field<int>(ex.block, "inner");
    if (ex.block.contains("alpha")) cfg.alpha = get_field<double>(ex.block, "alpha");
    if (ex.block.contains("gamma")) cfg.gamma = get_field<double>(ex.block, "gamma");
    cfg.sampling = ex.algo == "mpvr-uniform"
                       ? gdro::MpvrConfig::Sampling::uniform
                       : gdro::MpvrConfig::Sampling::importance;
    cfg.seed = seed;
    out.record = gdro::mpvr(ds, model, geom, cfg, ex.record_every);
  }
  return out;
}

int run_run(const std::string& config_path) {
  Experiment ex = parse_experiment(config_path);
  gdro::GroupedDataset ds = gdro::load_dataset(ex.dataset);
  gdro::LossModel model = gdro::make_loss_model(ds);
  gdro::Geometry geom(model.weight_dim(ds.dim), ds.num_groups(), ex.radius);

  std::vector<SeedOutput> outputs(ex.seeds.size());
  parallel_for(ex.seeds.size(), [&](std::size_t i) {
    outputs[i] = run_one_seed(ex, ds, model, geom, ex.seeds[i]);
  });

  fs::create_directories(ex.output);
  json seeds_summary = json::array();
  for (std::size_t i = 0; i < ex.seeds.size(); ++i) {
    const auto& rec = outputs[i].record;
    std::string stem = ex.algo + "-seed" + std::to_string(ex.seeds[i]);
    write_file(fs::path(ex.output) / (stem + ".csv"),
               trajectory_csv(rec.trajectory));
    write_file(fs::path(ex.output) / (stem + "-solution.json"),
               solution_json(rec.solution, geom.radius));

    json s;
    s["seed"] = ex.seeds[i];
    s["final_grad_evals"] = rec.final_counter.grad_evals;
    s["final_loss_evals"] = rec.final_counter.loss_evals;
    s["final_max_risk"] =
        rec.trajectory.empty() ? 0.0 : rec.trajectory.back().max_risk;
    s["solution_w_norm"] = rec.solution.w.norm();
    if (!outputs[i].r_hats.empty()) s["stage1_r_hat"] = outputs[i].r_hats;
    seeds_summary.push_back(std::move(s));
  }

  json summary;
  summary["algo"] = ex.algo;
  summary["dataset"] = ex.dataset;
  summary["m"] = ds.num_groups();
  summary["dim"] = ds.dim;
  summary["n_bar"] = ds.n_bar();
  summary["geometry"] = {{"radius", geom.radius},
                         {"d_w", geom.d_w},
                         {"d_q", geom.d_q}};
  summary["resolved"] = resolved_json(outputs[0].record.config_echo);
  summary["seeds"] = std::move(seeds_summary);
  write_file(fs::path(ex.output) / "summary.json", summary.dump(2) + "\n");
  std::cout << "wrote " << ex.seeds.size() << " run(s) to " << ex.output << "\n";
  return 0;
}

// ---------------------------------------------------------------- gap ----

int run_gap(const std::string& data_path, const std::string& solution_path,
            double tol, std::int64_t max_iters, double radius_override) {
  gdro::GroupedDataset ds = gdro::load_dataset(data_path);
  gdro::LossModel model = gdro::make_loss_model(ds);

  std::ifstream is(solution_path);
  if (!is) throw std::runtime_error("cannot open solution: " + solution_path);
  json j = json::parse(is);
  std::vector<double> w = get_field<std::vector<double>>(j, "w");
  std::vector<double> q = get_field<std::vector<double>>(j, "q");
  double radius = radius_override > 0.0
                      ? radius_override
                      : (j.contains("radius") ? j.at("radius").get<double>() : 1.0);

  gdro::Point z;
  z.w = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
  z.q = Eigen::Map<const Eigen::VectorXd>(q.data(), q.size());
  if (static_cast<int>(q.size()) != ds.num_groups())
    throw std::runtime_error("solution q length does not match group count");
  if (static_cast<int>(w.size()) != model.weight_dim(ds.dim))
    throw std::runtime_error("solution w length does not match model dimension");
  if (std::abs(z.q.sum() - 1.0) > 1e-9 || z.q.minCoeff() < -1e-9)
    throw std::runtime_error("infeasible solution: q is off the simplex");
  if (z.w.norm() > radius * (1.0 + 1e-9))
    throw std::runtime_error("infeasible solution: w outside the radius ball");

  gdro::Geometry geom(model.weight_dim(ds.dim), ds.num_groups(), radius);
  gdro::ErmOracleConfig cfg;
  cfg.tol = tol;
  cfg.max_iters = max_iters;
  gdro::GapReport rep = gdro::duality_gap(ds, model, geom, z, cfg);

  json out;
  out["max_term"] = rep.max_term;
  out["min_term"] = rep.min_term;
  out["gap"] = rep.gap;
  out["argmax_group"] = rep.argmax_group;
  out["oracle_iters"] = rep.oracle_iters;
  out["oracle_tol"] = rep.oracle_tol;
  out["oracle_converged"] = rep.oracle_converged;
  std::cout << out.dump() << "\n";
  return 0;
}

// ------------------------------------------------------------- compare ----

struct CompareJob {
  std::string algo;
  std::uint64_t seed;
  gdro::RunRecord record;
};

gdro::RunRecord compare_run(const std::string& algo,
                            const gdro::GroupedDataset& ds,
                            const gdro::LossModel& model,
                            const gdro::Geometry& geom, std::int64_t budget,
                            std::uint64_t seed, int grid) {
  if (algo == "aleg") {
    gdro::AlegConfig cfg;
    cfg.inner = std::max<int>(1, static_cast<int>(std::llround(ds.n_bar())));
    std::int64_t cost = gdro::aleg_epoch_cost(ds, cfg.inner);
    cfg.epochs = static_cast<int>(budget / cost);
    if (cfg.epochs < 1)
      throw std::runtime_error("budget below minimum epoch cost (" +
                               std::to_string(cost) + " grad evals)");
    cfg.seed = seed;
    int record_every =
        std::max<int>(1, static_cast<int>(static_cast<std::int64_t>(cfg.epochs) *
                                          cfg.inner / grid));
    return gdro::aleg(ds, model, geom, cfg, record_every);
  }
  if (algo == "smd") {
    std::int64_t steps = budget / ds.num_groups();
    if (steps < 1)
      throw std::runtime_error("budget below minimum epoch cost (" +
                               std::to_string(ds.num_groups()) + " grad evals)");
    int record_every = std::max<int>(1, static_cast<int>(steps / grid));
    return gdro::smd(ds, model, geom, steps, 0.0, seed, record_every);
  }
  if (algo == "mpvr-uniform" || algo == "mpvr-importance") {
    gdro::MpvrConfig cfg;
    cfg.inner = std::max<int>(
        1, static_cast<int>(std::llround(ds.num_groups() * ds.n_bar())));
    std::int64_t cost = gdro::mpvr_epoch_cost(ds, cfg.inner);
    cfg.epochs = static_cast<int>(budget / cost);
    if (cfg.epochs < 1)
      throw std::runtime_error("budget below minimum epoch cost (" +
                               std::to_string(cost) + " grad evals)");
    cfg.sampling = algo == "mpvr-uniform"
                       ? gdro::MpvrConfig::Sampling::uniform
                       : gdro::MpvrConfig::Sampling::importance;
    cfg.seed = seed;
    int record_every =
        std::max<int>(1, static_cast<int>(static_cast<std::int64_t>(cfg.epochs) *
                                          cfg.inner / grid));
    return gdro::mpvr(ds, model, geom, cfg, record_every);
  }
  throw std::runtime_error("unknown algo name '" + algo + "'");
}

int run_compare(const std::string& data_path, const std::string& algos_csv,
                std::int64_t budget, int num_seeds, const std::string& out_dir,
                double radius, int grid) {
  std::vector<std::string> algos;
  std::string token;
  for (char c : algos_csv + ",") {
    if (c == ',') {
      if (!token.empty()) algos.push_back(token);
      token.clear();
    } else {
      token += c;
    }
  }
  if (algos.empty()) throw std::runtime_error("no algorithms requested");
  for (const auto& a : algos)
    if (a != "aleg" && a != "smd" && a != "mpvr-uniform" &&
        a != "mpvr-importance")
      throw std::runtime_error("unknown algo name '" + a + "'");
  if (num_seeds < 1) throw std::runtime_error("need at least one seed");

  gdro::GroupedDataset ds = gdro::load_dataset(data_path);
  gdro::LossModel model = gdro::make_loss_model(ds);
  gdro::Geometry geom(model.weight_dim(ds.dim), ds.num_groups(), radius);

  std::vector<CompareJob> jobs;
  for (const auto& a : algos)
    for (int k = 0; k < num_seeds; ++k)
      jobs.push_back({a, static_cast<std::uint64_t>(k), {}});
  parallel_for(jobs.size(), [&](std::size_t i) {
    jobs[i].record = compare_run(jobs[i].algo, ds, model, geom, budget,
                                 jobs[i].seed, grid);
  });

  // Median curves on a shared grad-evals grid via step interpolation.
  fs::create_directories(out_dir);
  std::string csv = "grad_evals";
  for (const auto& a : algos) csv += "," + a;
  csv += "\n";
  for (int gidx = 0; gidx < grid; ++gidx) {
    std::int64_t x = budget * static_cast<std::int64_t>(gidx + 1) / grid;
    csv += std::to_string(x);
    for (const auto& a : algos) {
      std::vector<double> vals;
      for (const auto& job : jobs) {
        if (job.algo != a) continue;
        double last = std::numeric_limits<double>::quiet_NaN();
        for (const auto& row : job.record.trajectory) {
          if (row.grad_evals > x) break;
          last = row.max_risk;
        }
        if (!std::isnan(last)) vals.push_back(last);
      }
      csv += ",";
      if (!vals.empty()) csv += fmt17(median(vals));
    }
    csv += "\n";
  }
  write_file(fs::path(out_dir) / "compare.csv", csv);

  json finals;
  std::vector<std::pair<double, std::string>> order;
  for (const auto& a : algos) {
    std::vector<double> vals;
    for (const auto& job : jobs)
      if (job.algo == a && !job.record.trajectory.empty())
        vals.push_back(job.record.trajectory.back().max_risk);
    double med = median(vals);
    finals[a] = med;
    order.emplace_back(med, a);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  json verdict;
  verdict["budget"] = budget;
  verdict["seeds"] = num_seeds;
  verdict["final_median_max_risk"] = finals;
  json ranking = json::array();
  for (const auto& [v, a] : order) ranking.push_back(a);
  verdict["ranking"] = ranking;
  write_file(fs::path(out_dir) / "verdict.json", verdict.dump(2) + "\n");
  std::cout << verdict.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical group-robust optimization benchmark"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--kind", gen_args.kind, "gdro|mero")
      ->check(CLI::IsMember({"gdro", "mero"}));
  gen->add_option("--m", gen_args.m, "number of groups")->required();
  gen->add_option("--dim", gen_args.dim, "feature dimension")->required();
  gen->add_option("--n", gen_args.n, "samples per group")->required();
  gen->add_option("--seed", gen_args.seed, "generator seed")->required();
  gen->add_option("--out", gen_args.out, "output path")->required();
  gen->add_option("--test-out", gen_args.test_out, "held-out set path");
  gen->add_option("--format", gen_args.format, "text|binary")
      ->check(CLI::IsMember({"text", "binary"}));
  gen->add_option("--flip-prob", gen_args.flip_prob,
                  "label flip probability (gdro kind)");

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "Run a solver from a JSON config");
  run->add_option("config", run_config, "experiment config path")->required();

  std::string gap_data, gap_solution;
  double gap_tol = 1e-8, gap_radius = 0.0;
  std::int64_t gap_iters = 100000;
  CLI::App* gap = app.add_subcommand("gap", "Evaluate the duality gap");
  gap->add_option("--data", gap_data, "dataset path")->required();
  gap->add_option("--solution", gap_solution, "serialized point path")->required();
  gap->add_option("--tol", gap_tol, "oracle tolerance");
  gap->add_option("--max-iters", gap_iters, "oracle iteration cap");
  gap->add_option("--radius", gap_radius, "override the ball radius");

  std::string cmp_data, cmp_algos, cmp_out;
  std::int64_t cmp_budget = 0;
  int cmp_seeds = 1, cmp_grid = 100;
  double cmp_radius = 1.0;
  CLI::App* cmp = app.add_subcommand(
      "compare", "Run algorithms to a shared gradient-evaluation budget");
  cmp->add_option("--data", cmp_data, "dataset path")->required();
  cmp->add_option("--algos", cmp_algos, "comma-separated algorithm list")
      ->required();
  cmp->add_option("--budget", cmp_budget, "gradient-evaluation cap")->required();
  cmp->add_option("--seeds", cmp_seeds, "number of seeds (0..k-1)")->required();
  cmp->add_option("--out", cmp_out, "output directory")->required();
  cmp->add_option("--radius", cmp_radius, "ball radius");
  cmp->add_option("--grid", cmp_grid, "number of aligned curve points");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (run->parsed()) return run_run(run_config);
    if (gap->parsed())
      return run_gap(gap_data, gap_solution, gap_tol, gap_iters, gap_radius);
    if (cmp->parsed())
      return run_compare(cmp_data, cmp_algos, cmp_budget, cmp_seeds, cmp_out,
                         cmp_radius, cmp_grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
