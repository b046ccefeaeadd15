#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "stmala/oracle.hpp"
#include "stmala/rjmcmc.hpp"
#include "stmala/targets.hpp"

using namespace stmala;

namespace {

L21RegressionTarget make_toy(Index n, Index p, double tau, double lambda, double omega,
                             Index s_truth, std::uint64_t seed) {
  Rng rng(seed);
  Matrix g(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) g(i, j) = rng.normal();
  Matrix x = Matrix::Zero(p, 1);
  for (Index i = 0; i < s_truth; ++i) x(i, 0) = 1.0;
  Matrix y = g * x;
  for (Index i = 0; i < n; ++i) y(i, 0) += std::sqrt(tau) * rng.normal();
  return L21RegressionTarget(y, g, tau, lambda, omega);
}

// Flat target: every state has the same unnormalised density.
struct ConstantTarget {
  Index p_ = 3, t_ = 1;
  Index p() const { return p_; }
  Index t() const { return t_; }
  double g_value(const Matrix&) const { return 0.0; }
  Matrix g_grad(const Matrix& x) const { return Matrix::Zero(x.rows(), x.cols()); }
  double log_pi_unnorm(const SparseState&) const { return 0.0; }
};
static_assert(TargetDensity<ConstantTarget>);

ModelMask mask_from(const std::string& bits) {
  std::vector<std::uint8_t> v;
  for (char c : bits) v.push_back(c == '1' ? 1 : 0);
  return ModelMask(v);
}

}  // namespace

TEST_CASE("move names round-trip to strings", "[rjmcmc]") {
  REQUIRE(to_string(RjMove::Add) == "add");
  REQUIRE(to_string(RjMove::Delete) == "delete");
  REQUIRE(to_string(RjMove::Swap) == "swap");
  REQUIRE(to_string(RjMove::Stay) == "stay");
}

TEST_CASE("RjParams validation", "[rjmcmc]") {
  RjParams rj;
  REQUIRE_NOTHROW(rj.validate());
  rj.sigma_rj = 0.0;
  REQUIRE_THROWS_AS(rj.validate(), std::invalid_argument);
  rj.sigma_rj = -1.0;
  REQUIRE_THROWS_AS(rj.validate(), std::invalid_argument);
}

TEST_CASE("log_j hand values for P = 3", "[rjmcmc]") {
  // Interior stratum: each strategy has probability 1/4 and the target is
  // uniform over that strategy's reach.
  REQUIRE(log_j(mask_from("100"), mask_from("010")) == Catch::Approx(std::log(1.0 / 8.0)));
  REQUIRE(log_j(mask_from("100"), mask_from("110")) == Catch::Approx(std::log(1.0 / 8.0)));
  REQUIRE(log_j(mask_from("100"), mask_from("000")) == Catch::Approx(std::log(1.0 / 4.0)));
  REQUIRE(log_j(mask_from("100"), mask_from("100")) == Catch::Approx(std::log(1.0 / 4.0)));
  // Forced strata: the single available strategy has probability one.
  REQUIRE(log_j(mask_from("000"), mask_from("001")) == Catch::Approx(std::log(1.0 / 3.0)));
  REQUIRE(log_j(mask_from("111"), mask_from("110")) == Catch::Approx(std::log(1.0 / 3.0)));
}

TEST_CASE("log_j rejects unreachable or unavailable transitions", "[rjmcmc]") {
  // Two bits flipped in the same direction is not a single move.
  REQUIRE_THROWS_AS(log_j(mask_from("100"), mask_from("111")), std::invalid_argument);
  // Stay is not available from the forced strata.
  REQUIRE_THROWS_AS(log_j(mask_from("000"), mask_from("000")), std::invalid_argument);
  REQUIRE_THROWS_AS(log_j(mask_from("111"), mask_from("111")), std::invalid_argument);
  // Swap is not available from the empty model.
  REQUIRE_THROWS_AS(log_j(mask_from("000"), mask_from("000")), std::invalid_argument);
  REQUIRE_THROWS_AS(log_j(mask_from("10"), mask_from("100")), std::invalid_argument);
}

TEST_CASE("jump kernel is a probability distribution over reachable masks", "[rjmcmc]") {
  const Index p = 6;
  Rng rng(8080);
  for (int rep = 0; rep < 12; ++rep) {
    const ModelMask m = ModelMask::from_index(rng.uniform_below(1ULL << p), p);
    double total = 0.0;
    for (std::uint64_t idx = 0; idx < (1ULL << p); ++idx) {
      const ModelMask m_next = ModelMask::from_index(idx, p);
      try {
        total += std::exp(log_j(m, m_next));
      } catch (const std::invalid_argument&) {
      }
    }
    INFO("mask " << m.to_string());
    REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("sample_move matches the jump kernel empirically", "[rjmcmc]") {
  const ModelMask m = mask_from("1010");  // k = 2, P = 4
  Rng rng(741852);
  const int reps = 40000;
  std::map<std::string, long> next_counts;
  long move_counts[4] = {0, 0, 0, 0};
  for (int rep = 0; rep < reps; ++rep) {
    const RjMoveDraw d = sample_move(m, rng);
    ++move_counts[static_cast<int>(d.move)];
    ++next_counts[d.m_next.to_string()];
    // Draw bookkeeping is consistent with the move type.
    switch (d.move) {
      case RjMove::Add:
        REQUIRE(d.added >= 0);
        REQUIRE_FALSE(m.test(d.added));
        REQUIRE(d.m_next.count() == 3);
        break;
      case RjMove::Delete:
        REQUIRE(d.removed >= 0);
        REQUIRE(m.test(d.removed));
        REQUIRE(d.m_next.count() == 1);
        break;
      case RjMove::Swap:
        REQUIRE(m.test(d.removed));
        REQUIRE_FALSE(m.test(d.added));
        REQUIRE(d.m_next.count() == 2);
        REQUIRE(d.m_next != m);
        break;
      case RjMove::Stay:
        REQUIRE(d.m_next == m);
        break;
    }
  }
  // Strategy frequencies: 1/4 each, 4-sigma binomial band.
  const double se_move = std::sqrt(reps * 0.25 * 0.75);
  for (long c : move_counts) REQUIRE(std::abs(c - reps * 0.25) <= 4.0 * se_move);
  // Every reachable mask appears at rate exp(log_j), 4-sigma band.
  for (const auto& [bits, count] : next_counts) {
    const double prob = std::exp(log_j(m, mask_from(bits)));
    const double se = std::sqrt(reps * prob * (1.0 - prob));
    INFO("mask " << bits);
    REQUIRE(std::abs(count - reps * prob) <= 4.0 * se);
  }
}

TEST_CASE("forced moves consume no randomness when the choice is unique", "[rjmcmc]") {
  // P = 1: the move is forced and the index choice is a singleton, so the
  // stream must be untouched.
  Rng a(7), b(7);
  const RjMoveDraw from_empty = sample_move(ModelMask(1), a);
  REQUIRE(from_empty.move == RjMove::Add);
  REQUIRE(from_empty.added == 0);
  REQUIRE(a.next_u64() == b.next_u64());

  Rng c(9), d(9);
  ModelMask full(1);
  full.set(0, true);
  const RjMoveDraw from_full = sample_move(full, c);
  REQUIRE(from_full.move == RjMove::Delete);
  REQUIRE(from_full.removed == 0);
  REQUIRE(c.next_u64() == d.next_u64());
}

TEST_CASE("stay moves on a flat target are always accepted", "[rjmcmc]") {
  const ConstantTarget target;
  RjParams rj;
  rj.sigma_rj = 0.7;
  Rng rng(31415);
  Matrix init = Matrix::Zero(3, 1);
  init(0, 0) = 0.4;
  init(2, 0) = -1.1;
  SparseState x = SparseState::from_dense(init);
  double log_pi = target.log_pi_unnorm(x);
  long stays = 0;
  for (int step = 0; step < 20000; ++step) {
    const auto r = detail::rjmcmc_step_cached(target, rj, x, log_pi, rng);
    if (r.move == RjMove::Stay) {
      ++stays;
      REQUIRE(r.accepted);
      // The stratum is unchanged but the active values moved.
      REQUIRE(r.state.mask() == x.mask());
      REQUIRE(r.state != x);
    }
    x = r.state;
    log_pi = r.log_pi;
  }
  REQUIRE(stays > 100);
}

TEST_CASE("step rejects mismatched state shapes", "[rjmcmc]") {
  const L21RegressionTarget target = make_toy(10, 3, 1.0, 0.5, 0.3, 1, 17);
  RjParams rj;
  Rng rng(1);
  REQUIRE_THROWS_AS(rjmcmc_step(target, rj, SparseState::zero(2, 1), rng),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(RjChain(target, rj, SparseState::zero(4, 1)), std::invalid_argument);
}

TEST_CASE("run_rjmcmc records on the shared trace schedule", "[rjmcmc]") {
  const L21RegressionTarget target = make_toy(10, 3, 1.0, 0.5, 0.3, 1, 17);
  RjParams rj;
  rj.sigma_rj = 0.4;
  Rng rng(22);
  RunPlan plan{100, 10, 3};
  const ChainTrace trace = run_rjmcmc(target, rj, plan, rng);
  REQUIRE(trace.records().size() == 30);
  REQUIRE(trace.records().front().iter == 13);
  REQUIRE(trace.records().back().iter == 100);
  REQUIRE(trace.total_iterations() == 100);
  REQUIRE(trace.acceptance_rate() >= 0.0);
  REQUIRE(trace.acceptance_rate() <= 1.0);
  // Recorded log_pi matches a re-evaluation of the recorded state.
  const auto& rec = trace.records()[7];
  const SparseState s = SparseState::embed(rec.mask, rec.active, 1);
  REQUIRE(rec.log_pi == Catch::Approx(target.log_pi_unnorm(s)).margin(1e-12));
}

TEST_CASE("deterministic replay under a fixed seed", "[rjmcmc]") {
  const L21RegressionTarget target = make_toy(12, 4, 1.0, 1.0, 0.25, 2, 55);
  RjParams rj;
  rj.sigma_rj = 0.3;
  Rng r1(909), r2(909);
  RjChain c1(target, rj), c2(target, rj);
  for (int step = 0; step < 300; ++step) {
    c1.step(r1);
    c2.step(r2);
    REQUIRE(c1.state() == c2.state());
  }
}

TEST_CASE("RJMCMC reproduces the exact mask posterior on a tiny problem", "[rjmcmc]") {
  const Index n = 15, p = 2;
  const double tau = 1.0, omega = 0.3;
  const L21RegressionTarget target = make_toy(n, p, tau, 0.0, omega, 1, 2468);
  const ModelPosterior post = enumerate_posterior(
      target.y(), target.design(), tau, 0.0, bernoulli_log_prior(omega, p));

  RjParams rj;
  rj.sigma_rj = 0.5;
  Rng rng(86420);
  RjChain chain(target, rj);
  const long iterations = 500000, burn_in = 20000;
  std::vector<double> counts(4, 0.0);
  long kept = 0;
  for (long iter = 1; iter <= iterations; ++iter) {
    chain.step(rng);
    if (iter <= burn_in) continue;
    ++kept;
    counts[chain.state().mask().to_index()] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t m = 0; m < 4; ++m)
    tv += std::abs(counts[m] / static_cast<double>(kept) - post.probs[m]);
  tv *= 0.5;
  INFO("total variation = " << tv);
  REQUIRE(tv <= 0.02);
}

TEST_CASE("RJMCMC handles a laplace-type penalty too", "[rjmcmc]") {
  const Index n = 15, p = 2;
  const double tau = 1.0, omega = 0.3, lambda = 1.0;
  const L21RegressionTarget target = make_toy(n, p, tau, lambda, omega, 1, 97531);
  const ModelPosterior post =
      enumerate_posterior(target.y(), target.design(), tau, lambda,
                          bernoulli_log_prior(omega, p), 65536);
  for (double se : post.mc_rel_se) REQUIRE(se < 0.05);

  RjParams rj;
  rj.sigma_rj = 0.5;
  Rng rng(11223344);
  RjChain chain(target, rj);
  const long iterations = 500000, burn_in = 20000;
  std::vector<double> counts(4, 0.0);
  long kept = 0;
  for (long iter = 1; iter <= iterations; ++iter) {
    chain.step(rng);
    if (iter <= burn_in) continue;
    ++kept;
    counts[chain.state().mask().to_index()] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t m = 0; m < 4; ++m)
    tv += std::abs(counts[m] / static_cast<double>(kept) - post.probs[m]);
  tv *= 0.5;
  INFO("total variation = " << tv);
  REQUIRE(tv <= 0.02);
}
