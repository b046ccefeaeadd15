#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stmala/config.hpp"
#include "stmala/csv.hpp"
#include "stmala/datagen.hpp"
#include "stmala/diagnostics.hpp"
#include "stmala/oracle.hpp"
#include "stmala/rjmcmc.hpp"
#include "stmala/samplers.hpp"
#include "stmala/targets.hpp"

namespace stmala {

// Stream layout under the master seed: 0 = design draw, 1 = observation
// noise, 2 = oracle master, 16 + r = chain of replicate r.
inline constexpr std::uint64_t kStreamDesign = 0;
inline constexpr std::uint64_t kStreamObservations = 1;
inline constexpr std::uint64_t kStreamOracle = 2;
inline constexpr std::uint64_t kStreamChainBase = 16;

struct Problem {
  Matrix g;  // N x P design
  Matrix y;  // N x T observations
  std::optional<Matrix> x_truth;
  std::optional<Matrix> g_test;
  std::optional<Matrix> y_test;
};

// Builds (or loads) the dataset shared by all replicates of a study.  The
// training and test rows are drawn from the same design/noise streams, one
// after the other.
inline Problem make_problem(const ExperimentConfig& cfg) {
  Problem pr;
  if (cfg.model == ModelKind::ExternalCsv) {
    pr.g = read_matrix_csv(cfg.g_path);
    pr.y = read_matrix_csv(cfg.y_path);
    if (pr.g.rows() != pr.y.rows()) throw ConfigError("external data: G rows != Y rows");
    if (!cfg.x_path.empty()) {
      pr.x_truth = read_matrix_csv(cfg.x_path);
      if (pr.x_truth->rows() != pr.g.cols() || pr.x_truth->cols() != pr.y.cols())
        throw ConfigError("external data: X shape mismatch");
    }
    if (!cfg.g_test_path.empty()) {
      pr.g_test = read_matrix_csv(cfg.g_test_path);
      pr.y_test = read_matrix_csv(cfg.y_test_path);
      if (pr.g_test->cols() != pr.g.cols() || pr.g_test->rows() != pr.y_test->rows() ||
          pr.y_test->cols() != pr.y.cols())
        throw ConfigError("external data: test shape mismatch");
    }
    return pr;
  }
  const Index n_total = cfg.n + cfg.n_test;
  Rng design_rng(cfg.seed, kStreamDesign);
  const Matrix g_all = gen_design(n_total, cfg.p, cfg.design, cfg.rho, design_rng);
  const Matrix x = gen_truth(cfg.p, cfg.t, cfg.truth, cfg.truth_s);
  const double noise_var =
      cfg.noise_var ? *cfg.noise_var
                    : (cfg.model == ModelKind::SpikeSlab ? 1.0 / cfg.theta : cfg.tau);
  Rng noise_rng(cfg.seed, kStreamObservations);
  const Matrix y_all = gen_observations(g_all, x, noise_var, noise_rng);
  pr.g = g_all.topRows(cfg.n);
  pr.y = y_all.topRows(cfg.n);
  pr.x_truth = x;
  if (cfg.n_test > 0) {
    pr.g_test = g_all.bottomRows(cfg.n_test);
    pr.y_test = y_all.bottomRows(cfg.n_test);
  }
  return pr;
}

using AnyTarget = std::variant<L21RegressionTarget, RidgedExampleTarget, SpikeSlabTarget>;

inline AnyTarget make_target(const ExperimentConfig& cfg, const Problem& pr) {
  switch (cfg.model) {
    case ModelKind::ToyL21:
    case ModelKind::ExternalCsv:
      return L21RegressionTarget(pr.y, pr.g, cfg.tau, cfg.lambda, cfg.omega);
    case ModelKind::Ridged:
      return RidgedExampleTarget(pr.y, pr.g, cfg.tau, cfg.lambda, cfg.omega, cfg.ridge_v);
    case ModelKind::SpikeSlab:
      return SpikeSlabTarget(pr.y, pr.g, cfg.theta, cfg.a, cfg.k, cfg.omega_star);
  }
  throw ConfigError("unknown model kind");
}

// Iteration checkpoints 10^2, 10^2.25, ... capped by (and always including)
// the final iteration; only checkpoints past the burn-in qualify.
inline std::vector<long> error_grid(long iterations, long burn_in) {
  std::vector<long> grid;
  for (double e = 2.0;; e += 0.25) {
    const auto it = static_cast<long>(std::llround(std::pow(10.0, e)));
    if (it >= iterations) break;
    if (it > burn_in) grid.push_back(it);
  }
  if (iterations > burn_in) grid.push_back(iterations);
  return grid;
}

// Online per-replicate statistics over every post-burn-in iteration:
// activation counts, mean |m|, mean dense state, and the activation error at
// the grid checkpoints when exact probabilities are available.
class ReplicateAccumulator {
 public:
  ReplicateAccumulator(Index p, Index t, long burn_in, std::vector<long> grid,
                       std::optional<Vector> exact)
      : burn_in_(burn_in),
        grid_(std::move(grid)),
        exact_(std::move(exact)),
        counts_(Vector::Zero(p)),
        sum_state_(Matrix::Zero(p, t)) {}

  void operator()(const StepInfo& info) {
    if (info.iter > burn_in_) {
      ++n_;
      active_total_ += info.state.n_active();
      for (Index r = 0; r < info.state.n_active(); ++r) {
        const Index i = info.state.active_indices()[static_cast<std::size_t>(r)];
        counts_(i) += 1.0;
        sum_state_.row(i) += info.state.active().row(r);
      }
    }
    if (grid_pos_ < grid_.size() && info.iter == grid_[grid_pos_]) {
      if (exact_ && n_ > 0) grid_errors_.push_back(current_error());
      else grid_errors_.push_back(std::numeric_limits<double>::quiet_NaN());
      ++grid_pos_;
    }
  }

  long n_samples() const { return n_; }
  const std::vector<long>& grid() const { return grid_; }
  const std::vector<double>& grid_errors() const { return grid_errors_; }

  Vector frequencies() const {
    if (n_ == 0) throw std::invalid_argument("ReplicateAccumulator: no post-burn-in samples");
    return counts_ / static_cast<double>(n_);
  }

  double mean_active() const {
    if (n_ == 0) throw std::invalid_argument("ReplicateAccumulator: no post-burn-in samples");
    return static_cast<double>(active_total_) / static_cast<double>(n_);
  }

  Matrix mean_state() const {
    if (n_ == 0) throw std::invalid_argument("ReplicateAccumulator: no post-burn-in samples");
    return sum_state_ / static_cast<double>(n_);
  }

  double current_error() const {
    if (!exact_) throw std::invalid_argument("ReplicateAccumulator: no exact probabilities");
    double err = 0.0;
    for (Index i = 0; i < counts_.size(); ++i)
      err += std::abs((*exact_)(i) - counts_(i) / static_cast<double>(n_));
    return err;
  }

 private:
  long burn_in_;
  std::vector<long> grid_;
  std::optional<Vector> exact_;
  Vector counts_;
  Matrix sum_state_;
  long n_ = 0;
  long active_total_ = 0;
  std::size_t grid_pos_ = 0;
  std::vector<double> grid_errors_;
};

struct ReplicateResult {
  int replicate = 0;
  double acceptance_rate = 0.0;
  double mean_active = 0.0;
  double final_error = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  Vector frequencies;
  std::vector<long> grid;
  std::vector<double> grid_errors;
};

namespace detail {

template <TargetDensity Target>
ReplicateResult run_one_replicate(const Target& target, const ExperimentConfig& cfg,
                                  SamplerKind sampler, int replicate, const Problem& pr,
                                  const std::optional<Vector>& exact, const std::string& trace_path) {
  ReplicateAccumulator acc(target.p(), target.t(), cfg.burn_in,
                           error_grid(cfg.iterations, cfg.burn_in), exact);
  Rng rng(cfg.seed, kStreamChainBase + static_cast<std::uint64_t>(replicate));
  ChainTrace trace(target.p(), target.t());
  if (sampler == SamplerKind::Rjmcmc) {
    trace = run_rjmcmc(target, RjParams{cfg.sigma_rj}, RunPlan{cfg.iterations, cfg.burn_in, cfg.thin},
                       rng, std::ref(acc));
  } else {
    ChainConfig cc;
    cc.iterations = cfg.iterations;
    cc.burn_in = cfg.burn_in;
    cc.thin = cfg.thin;
    cc.seed = cfg.seed;
    cc.params = cfg.proposal;
    cc.block_size = (sampler == SamplerKind::BlockStmala && cfg.eta > 0) ? cfg.eta : target.p();
    trace = run_chain(target, cc, rng, std::ref(acc));
  }
  if (!trace_path.empty()) write_trace_csv(trace, trace_path);

  ReplicateResult r;
  r.replicate = replicate;
  r.acceptance_rate = trace.acceptance_rate();
  r.mean_active = acc.mean_active();
  r.frequencies = acc.frequencies();
  r.grid = acc.grid();
  r.grid_errors = acc.grid_errors();
  if (exact) r.final_error = acc.current_error();
  if (pr.g_test) r.mse = test_mse(*pr.g_test, *pr.y_test, acc.mean_state());
  return r;
}

}  // namespace detail

struct ExperimentResult {
  SamplerKind sampler = SamplerKind::BlockStmala;
  double sigma_used = 0.0;  // resolved proposal scale (NaN-free only for STMALA runs)
  std::vector<ReplicateResult> replicates;
  std::optional<Vector> exact_activation;
  std::vector<std::string> artifacts;
};

// The exact oracle applies to the plain L21 posterior with T = 1 and P <= 20
// (the ridge and spike-and-slab posteriors fall outside its formula).
inline bool oracle_applicable(const ExperimentConfig& cfg, const Problem& pr) {
  return (cfg.model == ModelKind::ToyL21 || cfg.model == ModelKind::ExternalCsv) &&
         pr.y.cols() == 1 && pr.g.cols() <= 20;
}

inline ExperimentConfig resolve_sigma(ExperimentConfig cfg, const AnyTarget& target) {
  if (cfg.sigma_auto) {
    const double lg = std::visit([](const auto& t) { return t.lipschitz_bound(); }, target);
    if (!(lg > 0.0)) throw NumericalError("sigma auto-selection: Lipschitz bound is zero");
    cfg.proposal.sigma = std::sqrt(2.0 / lg);
  }
  cfg.proposal.validate();
  return cfg;
}

// Runs `replicates` chains of one sampler on the shared dataset and writes
// the artifact set: per-replicate trace CSVs, an activation CSV, an
// error-vs-iteration CSV, a summary CSV and a JSON run manifest.  Replicates
// run concurrently; every shared file is written by the merge step after all
// replicates joined.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg_in, SamplerKind sampler,
                                       const std::string& out_dir, bool quiet = true) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const Problem pr = make_problem(cfg_in);
  const AnyTarget target = make_target(cfg_in, pr);
  const ExperimentConfig cfg =
      sampler == SamplerKind::Rjmcmc ? cfg_in : resolve_sigma(cfg_in, target);

  ExperimentResult result;
  result.sampler = sampler;
  result.sigma_used = cfg.proposal.sigma;

  if (oracle_applicable(cfg, pr)) {
    const auto post = enumerate_posterior(pr.y, pr.g, cfg.tau, cfg.lambda,
                                          bernoulli_log_prior(cfg.omega, pr.g.cols()),
                                          cfg.mc_samples, Rng::derive_state(cfg.seed, kStreamOracle));
    result.exact_activation = activation_probs(post);
  }

  // Replicates run concurrently, each writing only its own trace file.
  std::vector<std::future<ReplicateResult>> futures;
  futures.reserve(static_cast<std::size_t>(cfg.replicates));
  for (int r = 0; r < cfg.replicates; ++r) {
    const std::string trace_path = (fs::path(out_dir) / ("trace_rep" + std::to_string(r) + ".csv")).string();
    result.artifacts.push_back(trace_path);
    futures.push_back(std::async(std::launch::async, [&, r, trace_path] {
      return std::visit(
          [&](const auto& t) {
            return detail::run_one_replicate(t, cfg, sampler, r, pr, result.exact_activation,
                                             trace_path);
          },
          target);
    }));
  }
  for (auto& f : futures) result.replicates.push_back(f.get());

  const Index p = pr.g.cols();

  // activation.csv: pooled empirical activation frequency vs exact.
  {
    const std::string path = (fs::path(out_dir) / "activation.csv").string();
    result.artifacts.push_back(path);
    Vector pooled = Vector::Zero(p);
    for (const auto& r : result.replicates) pooled += r.frequencies;
    pooled /= static_cast<double>(result.replicates.size());
    TableWriter w(path, {"component", "estimated", "exact", "abs_error"});
    for (Index i = 0; i < p; ++i) {
      const double exact = result.exact_activation ? (*result.exact_activation)(i)
                                                   : std::numeric_limits<double>::quiet_NaN();
      w.row({std::to_string(i), format_double(pooled(i)), format_double(exact),
             format_double(std::abs(exact - pooled(i)))});
    }
  }

  // error_vs_iteration.csv on the log-spaced checkpoint grid.
  {
    const std::string path = (fs::path(out_dir) / "error_vs_iteration.csv").string();
    result.artifacts.push_back(path);
    TableWriter w(path, {"replicate", "iteration", "error"});
    for (const auto& r : result.replicates)
      for (std::size_t k = 0; k < r.grid.size(); ++k)
        w.row({std::to_string(r.replicate), std::to_string(r.grid[k]),
               format_double(k < r.grid_errors.size() ? r.grid_errors[k]
                                                      : std::numeric_limits<double>::quiet_NaN())});
  }

  // summary.csv: one row per replicate.
  {
    const std::string path = (fs::path(out_dir) / "summary.csv").string();
    result.artifacts.push_back(path);
    TableWriter w(path, {"replicate", "acceptance_rate", "mean_active", "final_error", "test_mse"});
    for (const auto& r : result.replicates)
      w.row({std::to_string(r.replicate), format_double(r.acceptance_rate),
             format_double(r.mean_active), format_double(r.final_error), format_double(r.mse)});
  }

  // manifest.json: resolved config, seed, version, RNG algorithm.
  {
    const std::string path = (fs::path(out_dir) / "manifest.json").string();
    result.artifacts.push_back(path);
    nlohmann::json j;
    j["version"] = kVersion;
    j["rng"] = kRngDescription;
    j["seed"] = cfg.seed;
    j["sampler"] = to_string(sampler);
    j["sigma_resolved"] = cfg.proposal.sigma;
    nlohmann::json jc;
    for (const auto& [section, kv] : cfg.to_raw()) {
      nlohmann::json js;
      for (const auto& [key, value] : kv) js[key] = value;
      jc[section] = js;
    }
    j["config"] = jc;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << j.dump(2) << '\n';
  }

  (void)quiet;  // console reporting is the CLI's job
  return result;
}

}  // namespace stmala
