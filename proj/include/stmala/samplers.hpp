#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "stmala/csv.hpp"
#include "stmala/proposal.hpp"
#include "stmala/rng.hpp"
#include "stmala/sparse_state.hpp"
#include "stmala/targets.hpp"
#include "stmala/types.hpp"

namespace stmala {

struct ChainConfig {
  long iterations = 0;
  long burn_in = 0;
  Index block_size = 0;  // eta; block_size == P runs the full update
  std::uint64_t seed = 0;
  ProposalParams params;
  long thin = 1;
  std::optional<SparseState> init;  // default: all-zero matrix (empty model)

  void validate(Index p) const {
    if (iterations < 1) throw std::invalid_argument("ChainConfig: iterations must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("ChainConfig: burn_in must be >= 0");
    if (thin < 1) throw std::invalid_argument("ChainConfig: thin must be >= 1");
    if (block_size < 1 || block_size > p)
      throw std::invalid_argument("ChainConfig: block_size must be in [1, P]");
    params.validate();
    if (init && init->p() != p) throw std::invalid_argument("ChainConfig: init has wrong P");
  }
};

// Compressed trace record: the mask plus the active rows, never the dense
// matrix.
struct TraceRecord {
  long iter = 0;
  bool accepted = false;
  double log_pi = 0.0;
  ModelMask mask;
  Matrix active{0, 1};
};

class ChainTrace {
 public:
  ChainTrace(Index p, Index t) : p_(p), t_(t) {}

  void count_step(bool accepted) {
    ++total_iterations_;
    if (accepted) ++accepted_count_;
  }

  void record(long iter, bool accepted, const SparseState& s, double log_pi) {
    records_.push_back(TraceRecord{iter, accepted, log_pi, s.mask(), s.active()});
  }

  Index p() const { return p_; }
  Index t() const { return t_; }
  const std::vector<TraceRecord>& records() const { return records_; }
  long total_iterations() const { return total_iterations_; }
  long accepted_count() const { return accepted_count_; }
  double acceptance_rate() const {
    if (total_iterations_ == 0) throw std::invalid_argument("acceptance_rate: empty chain");
    return static_cast<double>(accepted_count_) / static_cast<double>(total_iterations_);
  }

 private:
  Index p_;
  Index t_;
  std::vector<TraceRecord> records_;
  long total_iterations_ = 0;
  long accepted_count_ = 0;
};

// Trace CSV: iter, accepted, n_active, log_pi, then the P activity bits.
inline void write_trace_csv(const ChainTrace& trace, const std::string& path) {
  std::vector<std::string> cols = {"iter", "accepted", "n_active", "log_pi"};
  for (Index i = 0; i < trace.p(); ++i) cols.push_back("m" + std::to_string(i));
  TableWriter w(path, cols);
  std::vector<std::string> row(cols.size());
  for (const auto& r : trace.records()) {
    row[0] = std::to_string(r.iter);
    row[1] = r.accepted ? "1" : "0";
    row[2] = std::to_string(r.mask.count());
    row[3] = format_double(r.log_pi);
    for (Index i = 0; i < trace.p(); ++i) row[4 + static_cast<std::size_t>(i)] = r.mask.test(i) ? "1" : "0";
    w.row(row);
  }
}

// Drift restricted to the given rows; arithmetic per entry matches the
// full-matrix drift, so eta = P reproduces the full update bit-for-bit.
inline Matrix drift_rows_from_grad(const ProposalParams& params, const Matrix& x,
                                   const Matrix& grad, std::span<const Index> rows) {
  double scale = 0.5 * params.sigma * params.sigma;
  if (params.truncation) {
    const double gn = grad.norm();  // full-matrix norm, also for block updates
    const double d = *params.truncation;
    if (gn > d) scale *= d / gn;
  }
  Matrix mu(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    mu.row(static_cast<Index>(k)) = x.row(rows[k]) - scale * grad.row(rows[k]);
  return mu;
}

// Log Hastings-Metropolis ratio of the full update, from precomputed drifts:
//   log [ pi(z) q(mu_z -> x) ] - log [ pi(x) q(mu_x -> z) ].
// A -inf forward density is a contract violation (the candidate was supposed
// to be sampled from q(x, .)); a -inf reverse density or -inf pi(z) makes
// the ratio -inf, i.e. certain rejection.
template <TargetDensity Target>
double log_accept_ratio(const Target& target, const ProposalParams& params, const SparseState& x,
                        const SparseState& z, const Matrix& mu_x, const Matrix& mu_z) {
  const double lq_fwd = log_q(params, mu_x, z);
  if (lq_fwd == kNegInf)
    throw NumericalError("log_accept_ratio: candidate has zero forward density");
  const double lq_rev = log_q(params, mu_z, x);
  return (target.log_pi_unnorm(z) + lq_rev) - (target.log_pi_unnorm(x) + lq_fwd);
}

namespace detail {

// Uniform eta-subset of {0..P-1} via partial Fisher-Yates, returned sorted
// (the sort canonicalises the noise-consumption order).  Consumes no
// randomness when eta == P.
inline std::vector<Index> sample_block(Index p, Index eta, Rng& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) pool[static_cast<std::size_t>(i)] = i;
  if (eta < p) {
    for (Index k = 0; k < eta; ++k) {
      const auto j = k + static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(p - k)));
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
    }
  }
  std::vector<Index> block(pool.begin(), pool.begin() + eta);
  std::sort(block.begin(), block.end());
  return block;
}

struct BlockStepResult {
  SparseState state;
  bool accepted = false;
  std::vector<Index> block;
  Matrix grad;      // gradient at the returned state
  double log_pi = 0.0;
};

// One block-STMALA transition from (x, grad g(x), log pi(x)).  One fresh
// gradient is evaluated (at the candidate); on acceptance it becomes the
// next cached gradient.
template <TargetDensity Target>
BlockStepResult block_step_cached(const Target& target, const ProposalParams& params, Index eta,
                                  const SparseState& x, const Matrix& grad_x, double log_pi_x,
                                  Rng& rng) {
  const Index p = target.p();
  const Index t = target.t();
  std::vector<Index> block = sample_block(p, eta, rng);

  const Matrix x_dense = x.to_dense();
  const Matrix mu_x = drift_rows_from_grad(params, x_dense, grad_x, block);

  Matrix noisy = mu_x;
  for (Index k = 0; k < noisy.rows(); ++k)
    for (Index j = 0; j < t; ++j) noisy(k, j) += params.sigma * rng.normal();

  Matrix z_dense = x_dense;
  const Matrix z_rows = apply_operator(params.kind, params.gamma, noisy);
  for (std::size_t k = 0; k < block.size(); ++k) z_dense.row(block[k]) = z_rows.row(static_cast<Index>(k));
  const SparseState z = SparseState::from_dense(z_dense);

  const Matrix grad_z = target.g_grad(z_dense);
  const Matrix mu_z = drift_rows_from_grad(params, z_dense, grad_z, block);

  const double lq_fwd = log_q_rows(params, mu_x, z, block);
  if (lq_fwd == kNegInf)
    throw NumericalError("block_stmala_step: candidate has zero forward density");
  const double lq_rev = log_q_rows(params, mu_z, x, block);
  const double log_pi_z = target.log_pi_unnorm(z);
  const double ratio = (log_pi_z + lq_rev) - (log_pi_x + lq_fwd);

  const bool accepted = std::log(rng.uniform()) < std::min(0.0, ratio);
  if (accepted) return {z, true, std::move(block), grad_z, log_pi_z};
  return {x, false, std::move(block), grad_x, log_pi_x};
}

}  // namespace detail

// One full-dimensional STMALA transition (Algorithm-1 step).
template <TargetDensity Target>
std::pair<SparseState, bool> stmala_step(const Target& target, const ProposalParams& params,
                                         const SparseState& x, Rng& rng) {
  params.validate();
  if (x.p() != target.p() || x.t() != target.t())
    throw std::invalid_argument("stmala_step: state shape mismatch");
  auto r = detail::block_step_cached(target, params, target.p(), x,
                                     target.g_grad(x.to_dense()), target.log_pi_unnorm(x), rng);
  return {std::move(r.state), r.accepted};
}

// One block transition updating a uniform eta-subset of rows.
template <TargetDensity Target>
std::tuple<SparseState, bool, std::vector<Index>> block_stmala_step(const Target& target,
                                                                    const ProposalParams& params,
                                                                    Index eta, const SparseState& x,
                                                                    Rng& rng) {
  params.validate();
  if (eta < 1 || eta > target.p()) throw std::invalid_argument("block_stmala_step: eta out of range");
  if (x.p() != target.p() || x.t() != target.t())
    throw std::invalid_argument("block_stmala_step: state shape mismatch");
  auto r = detail::block_step_cached(target, params, eta, x, target.g_grad(x.to_dense()),
                                     target.log_pi_unnorm(x), rng);
  return {std::move(r.state), r.accepted, std::move(r.block)};
}

// Chain object caching the current gradient and log density across steps.
template <TargetDensity Target>
class BlockStmalaChain {
 public:
  BlockStmalaChain(const Target& target, const ChainConfig& cfg)
      : target_(&target),
        params_(cfg.params),
        eta_(cfg.block_size),
        x_(cfg.init ? *cfg.init : SparseState::zero(target.p(), target.t())) {
    cfg.validate(target.p());
    if (x_.t() != target.t()) throw std::invalid_argument("BlockStmalaChain: init has wrong T");
    grad_ = target.g_grad(x_.to_dense());
    log_pi_ = target.log_pi_unnorm(x_);
  }

  bool step(Rng& rng) {
    auto r = detail::block_step_cached(*target_, params_, eta_, x_, grad_, log_pi_, rng);
    x_ = std::move(r.state);
    grad_ = std::move(r.grad);
    log_pi_ = r.log_pi;
    return r.accepted;
  }

  const SparseState& state() const { return x_; }
  double log_pi() const { return log_pi_; }

 private:
  const Target* target_;
  ProposalParams params_;
  Index eta_;
  SparseState x_;
  Matrix grad_;
  double log_pi_;
};

struct StepInfo {
  long iter;
  bool accepted;
  const SparseState& state;
  double log_pi;
};

struct NullObserver {
  void operator()(const StepInfo&) const {}
};

struct RunPlan {
  long iterations = 0;
  long burn_in = 0;
  long thin = 1;
};

// Generic driver: iterations are numbered 1..N; a state is recorded when
// iter > burn_in and (iter - burn_in) % thin == 0, so burn_in = 0, thin = 1
// records one state per iteration.
template <class Chain, class Observer = NullObserver>
ChainTrace run_markov_chain(Chain& chain, const RunPlan& plan, Rng& rng, Observer&& obs = {}) {
  if (plan.iterations < 1) throw std::invalid_argument("run_markov_chain: iterations must be >= 1");
  ChainTrace trace(chain.state().p(), chain.state().t());
  for (long n = 1; n <= plan.iterations; ++n) {
    const bool accepted = chain.step(rng);
    trace.count_step(accepted);
    obs(StepInfo{n, accepted, chain.state(), chain.log_pi()});
    if (n > plan.burn_in && (n - plan.burn_in) % plan.thin == 0)
      trace.record(n, accepted, chain.state(), chain.log_pi());
  }
  return trace;
}

template <TargetDensity Target, class Observer = NullObserver>
ChainTrace run_chain(const Target& target, const ChainConfig& cfg, Rng& rng, Observer&& obs = {}) {
  cfg.validate(target.p());
  BlockStmalaChain<Target> chain(target, cfg);
  return run_markov_chain(chain, RunPlan{cfg.iterations, cfg.burn_in, cfg.thin}, rng,
                          std::forward<Observer>(obs));
}

// Convenience overload deriving the stream from cfg.seed.
template <TargetDensity Target, class Observer = NullObserver>
ChainTrace run_chain(const Target& target, const ChainConfig& cfg, Observer&& obs = {}) {
  Rng rng(cfg.seed);
  return run_chain(target, cfg, rng, std::forward<Observer>(obs));
}

}  // namespace stmala
