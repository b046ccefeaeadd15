#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "stmala/rng.hpp"
#include "stmala/samplers.hpp"
#include "stmala/sparse_state.hpp"
#include "stmala/targets.hpp"
#include "stmala/types.hpp"

namespace stmala {

// Transdimensional baseline with four move strategies.  In the interior
// strata (0 < |m| < P) each strategy is chosen with probability 1/4; the
// empty model forces Add and the full model forces Delete (no randomness is
// consumed by a forced choice).
enum class RjMove { Add, Delete, Swap, Stay };

inline std::string to_string(RjMove m) {
  switch (m) {
    case RjMove::Add: return "add";
    case RjMove::Delete: return "delete";
    case RjMove::Swap: return "swap";
    case RjMove::Stay: return "stay";
  }
  throw std::invalid_argument("unknown RjMove");
}

struct RjParams {
  double sigma_rj = 0.1;  // scale of the dimension-matching Gaussian

  void validate() const {
    if (!(sigma_rj > 0.0)) throw std::invalid_argument("RjParams: sigma_rj must be > 0");
  }
};

namespace detail {

inline bool rj_forced(Index n_active, Index p) { return n_active == 0 || n_active == p; }

inline double rj_log_strategy_prob(Index n_active, Index p) {
  return rj_forced(n_active, p) ? 0.0 : -std::log(4.0);
}

inline double rj_reach_count(RjMove move, Index n_active, Index p) {
  switch (move) {
    case RjMove::Add: return static_cast<double>(p - n_active);
    case RjMove::Delete: return static_cast<double>(n_active);
    case RjMove::Swap: return static_cast<double>(n_active) * static_cast<double>(p - n_active);
    case RjMove::Stay: return 1.0;
  }
  throw std::invalid_argument("unknown RjMove");
}

inline bool rj_move_available(RjMove move, Index n_active, Index p) {
  if (n_active == 0) return move == RjMove::Add;
  if (n_active == p) return move == RjMove::Delete;
  return true;
}

}  // namespace detail

// log j(m, m_next): probability of selecting the jump from stratum m to the
// reachable stratum m_next (strategy probability times the uniform choice
// among that strategy's reachable targets).
inline double log_j(const ModelMask& m, const ModelMask& m_next) {
  if (m.size() != m_next.size()) throw std::invalid_argument("log_j: size mismatch");
  const Index p = m.size();
  Index added = 0, removed = 0;
  for (Index i = 0; i < p; ++i) {
    if (!m.test(i) && m_next.test(i)) ++added;
    if (m.test(i) && !m_next.test(i)) ++removed;
  }
  RjMove move;
  if (added == 1 && removed == 0) move = RjMove::Add;
  else if (added == 0 && removed == 1) move = RjMove::Delete;
  else if (added == 1 && removed == 1) move = RjMove::Swap;
  else if (added == 0 && removed == 0) move = RjMove::Stay;
  else throw std::invalid_argument("log_j: m_next not reachable in one move");
  const Index k = m.count();
  if (!detail::rj_move_available(move, k, p))
    throw std::invalid_argument("log_j: move not available from this stratum");
  return detail::rj_log_strategy_prob(k, p) - std::log(detail::rj_reach_count(move, k, p));
}

struct RjMoveDraw {
  RjMove move;
  ModelMask m_next;
  Index removed = -1;  // active row leaving the model (Delete/Swap)
  Index added = -1;    // inactive row entering the model (Add/Swap)
};

// Draw order is pinned: strategy (when not forced), then the removed index,
// then the added index.
inline RjMoveDraw sample_move(const ModelMask& m, Rng& rng) {
  const Index p = m.size();
  const Index k = m.count();
  if (p < 1) throw std::invalid_argument("sample_move: empty mask");
  RjMove move;
  if (k == 0) {
    move = RjMove::Add;
  } else if (k == p) {
    move = RjMove::Delete;
  } else {
    move = static_cast<RjMove>(rng.uniform_below(4));
  }
  RjMoveDraw draw;
  draw.move = move;
  draw.m_next = m;
  const auto active = m.active_indices();
  std::vector<Index> inactive;
  inactive.reserve(static_cast<std::size_t>(p - k));
  for (Index i = 0; i < p; ++i)
    if (!m.test(i)) inactive.push_back(i);
  switch (move) {
    case RjMove::Add:
      draw.added = inactive[rng.uniform_below(inactive.size())];
      draw.m_next.set(draw.added, true);
      break;
    case RjMove::Delete:
      draw.removed = active[rng.uniform_below(active.size())];
      draw.m_next.set(draw.removed, false);
      break;
    case RjMove::Swap:
      draw.removed = active[rng.uniform_below(active.size())];
      draw.added = inactive[rng.uniform_below(inactive.size())];
      draw.m_next.set(draw.removed, false);
      draw.m_next.set(draw.added, true);
      break;
    case RjMove::Stay:
      break;
  }
  return draw;
}

namespace detail {

inline double rj_log_normal_density(const RowVector& u, double sigma_rj) {
  const double td = static_cast<double>(u.size());
  return -0.5 * td * std::log(2.0 * std::numbers::pi * sigma_rj * sigma_rj) -
         u.squaredNorm() / (2.0 * sigma_rj * sigma_rj);
}

inline bool rj_row_is_zero(const RowVector& u) {
  for (Index j = 0; j < u.size(); ++j)
    if (u(j) != 0.0) return false;
  return true;
}

// Fresh row draw; an exactly-zero draw (probability zero) is rejected and
// redrawn because it would leave the target stratum.
inline RowVector rj_draw_row(Index t, double sigma_rj, Rng& rng) {
  RowVector u(t);
  do {
    for (Index j = 0; j < t; ++j) u(j) = sigma_rj * rng.normal();
  } while (rj_row_is_zero(u));
  return u;
}

struct RjStepResult {
  SparseState state;
  bool accepted = false;
  RjMove move = RjMove::Stay;
  double log_pi = 0.0;
};

template <TargetDensity Target>
RjStepResult rjmcmc_step_cached(const Target& target, const RjParams& rj, const SparseState& x,
                                double log_pi_x, Rng& rng) {
  const Index t = target.t();
  const RjMoveDraw draw = sample_move(x.mask(), rng);

  Matrix x_dense = x.to_dense();
  double log_q_fwd_minus_rev = 0.0;  // log q(u) - log q(u'), with q(0) = 1
  switch (draw.move) {
    case RjMove::Add: {
      const RowVector u = rj_draw_row(t, rj.sigma_rj, rng);
      x_dense.row(draw.added) = u;
      log_q_fwd_minus_rev = rj_log_normal_density(u, rj.sigma_rj);
      break;
    }
    case RjMove::Delete: {
      const RowVector u_rev = x_dense.row(draw.removed);
      x_dense.row(draw.removed).setZero();
      log_q_fwd_minus_rev = -rj_log_normal_density(u_rev, rj.sigma_rj);
      break;
    }
    case RjMove::Swap: {
      const RowVector u_rev = x_dense.row(draw.removed);
      x_dense.row(draw.removed).setZero();
      const RowVector u = rj_draw_row(t, rj.sigma_rj, rng);
      x_dense.row(draw.added) = u;
      log_q_fwd_minus_rev = rj_log_normal_density(u, rj.sigma_rj) - rj_log_normal_density(u_rev, rj.sigma_rj);
      break;
    }
    case RjMove::Stay: {
      // Symmetric perturbation of every active row; the proposal density
      // cancels from the ratio.  Rows are perturbed in index order, and a
      // perturbed row landing exactly at zero (probability zero) is redrawn.
      for (Index i : x.active_indices()) {
        RowVector row(t);
        do {
          for (Index j = 0; j < t; ++j) row(j) = x_dense(i, j) + rj.sigma_rj * rng.normal();
        } while (detail::rj_row_is_zero(row));
        x_dense.row(i) = row;
      }
      break;
    }
  }

  const SparseState z = SparseState::from_dense(x_dense);
  const double log_pi_z = target.log_pi_unnorm(z);
  const double ratio = (log_pi_z + log_j(draw.m_next, x.mask())) -
                       (log_pi_x + log_j(x.mask(), draw.m_next)) - log_q_fwd_minus_rev;

  const bool accepted = std::log(rng.uniform()) < std::min(0.0, ratio);
  if (accepted) return {z, true, draw.move, log_pi_z};
  return {x, false, draw.move, log_pi_x};
}

}  // namespace detail

// One RJMCMC transition.
template <TargetDensity Target>
std::pair<SparseState, bool> rjmcmc_step(const Target& target, const RjParams& rj,
                                         const SparseState& x, Rng& rng) {
  rj.validate();
  if (x.p() != target.p() || x.t() != target.t())
    throw std::invalid_argument("rjmcmc_step: state shape mismatch");
  auto r = detail::rjmcmc_step_cached(target, rj, x, target.log_pi_unnorm(x), rng);
  return {std::move(r.state), r.accepted};
}

template <TargetDensity Target>
class RjChain {
 public:
  RjChain(const Target& target, const RjParams& rj, std::optional<SparseState> init = {})
      : target_(&target),
        rj_(rj),
        x_(init ? *std::move(init) : SparseState::zero(target.p(), target.t())) {
    rj_.validate();
    if (x_.p() != target.p() || x_.t() != target.t())
      throw std::invalid_argument("RjChain: init shape mismatch");
    log_pi_ = target.log_pi_unnorm(x_);
  }

  bool step(Rng& rng) {
    auto r = detail::rjmcmc_step_cached(*target_, rj_, x_, log_pi_, rng);
    x_ = std::move(r.state);
    log_pi_ = r.log_pi;
    return r.accepted;
  }

  const SparseState& state() const { return x_; }
  double log_pi() const { return log_pi_; }

 private:
  const Target* target_;
  RjParams rj_;
  SparseState x_;
  double log_pi_;
};

// Same trace schema and recording rule as the STMALA driver.
template <TargetDensity Target, class Observer = NullObserver>
ChainTrace run_rjmcmc(const Target& target, const RjParams& rj, const RunPlan& plan, Rng& rng,
                      Observer&& obs = {}, std::optional<SparseState> init = {}) {
  RjChain<Target> chain(target, rj, std::move(init));
  return run_markov_chain(chain, plan, rng, std::forward<Observer>(obs));
}

}  // namespace stmala
