#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "stmala/oracle.hpp"
#include "stmala/samplers.hpp"
#include "stmala/targets.hpp"

using namespace stmala;

namespace {

Matrix randn(Index r, Index c, Rng& rng) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

L21RegressionTarget make_toy(Index n, Index p, double tau, double lambda, double omega,
                             Index s_truth, std::uint64_t seed) {
  Rng rng(seed);
  Matrix g = randn(n, p, rng);
  Matrix x = Matrix::Zero(p, 1);
  for (Index i = 0; i < s_truth; ++i) x(i, 0) = 1.0;
  Matrix y = g * x;
  for (Index i = 0; i < n; ++i) y(i, 0) += std::sqrt(tau) * rng.normal();
  return L21RegressionTarget(y, g, tau, lambda, omega);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("log_accept_ratio is zero from a state to itself", "[samplers]") {
  const L21RegressionTarget target = make_toy(10, 3, 1.0, 0.5, 0.3, 1, 42);
  ProposalParams params;
  params.sigma = 0.5;
  params.gamma = 0.3;
  Matrix xd = Matrix::Zero(3, 1);
  xd(0, 0) = 0.9;
  const SparseState x = SparseState::from_dense(xd);
  const Matrix mu = drift(target, params, xd);
  REQUIRE(log_accept_ratio(target, params, x, x, mu, mu) == 0.0);
}

TEST_CASE("log_accept_ratio is antisymmetric", "[samplers]") {
  const L21RegressionTarget target = make_toy(12, 4, 0.8, 1.0, 0.2, 2, 7);
  ProposalParams params;
  params.sigma = 0.6;
  params.gamma = 0.4;
  Rng rng(5150);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix xd = Matrix::Zero(4, 1), zd = Matrix::Zero(4, 1);
    for (Index i = 0; i < 4; ++i) {
      if (rng.uniform() < 0.6) xd(i, 0) = rng.normal();
      if (rng.uniform() < 0.6) zd(i, 0) = rng.normal();
    }
    const SparseState x = SparseState::from_dense(xd);
    const SparseState z = SparseState::from_dense(zd);
    const Matrix mu_x = drift(target, params, xd);
    const Matrix mu_z = drift(target, params, zd);
    const double fwd = log_accept_ratio(target, params, x, z, mu_x, mu_z);
    const double rev = log_accept_ratio(target, params, z, x, mu_z, mu_x);
    REQUIRE(fwd == Catch::Approx(-rev).margin(1e-11));
  }
}

TEST_CASE("log_accept_ratio composes pi and q as advertised", "[samplers]") {
  const L21RegressionTarget target = make_toy(9, 2, 1.0, 0.7, 0.4, 1, 99);
  ProposalParams params;
  params.sigma = 0.45;
  params.gamma = 0.25;
  params.kind = OperatorKind::Prox;

  Matrix xd(2, 1), zd(2, 1);
  xd << 1.2, 0.0;
  zd << 0.7, 0.4;
  const SparseState x = SparseState::from_dense(xd);
  const SparseState z = SparseState::from_dense(zd);
  const Matrix mu_x = drift(target, params, xd);
  const Matrix mu_z = drift(target, params, zd);

  const double expected = (target.log_pi_unnorm(z) + log_q(params, mu_z, x)) -
                          (target.log_pi_unnorm(x) + log_q(params, mu_x, z));
  REQUIRE(log_accept_ratio(target, params, x, z, mu_x, mu_z) ==
          Catch::Approx(expected).margin(1e-13));
}

TEST_CASE("a candidate outside the forward support is a contract violation", "[samplers]") {
  const L21RegressionTarget target = make_toy(8, 1, 1.0, 0.0, 0.5, 1, 3);
  ProposalParams params;
  params.sigma = 1.0;
  params.gamma = 1.0;
  params.kind = OperatorKind::HardThreshold;
  const SparseState x = SparseState::zero(1, 1);
  Matrix zd(1, 1);
  zd << 0.5;  // inside the deleted gamma-ball: zero forward density
  const SparseState z = SparseState::from_dense(zd);
  const Matrix mu_x = drift(target, params, x.to_dense());
  const Matrix mu_z = drift(target, params, zd);
  REQUIRE_THROWS_AS(log_accept_ratio(target, params, x, z, mu_x, mu_z), NumericalError);
}

TEST_CASE("sample_block draws sorted uniform subsets and is free when eta = P", "[samplers]") {
  Rng rng(61);
  const Index p = 7, eta = 3;
  std::vector<long> hits(static_cast<std::size_t>(p), 0);
  const int reps = 20000;
  for (int rep = 0; rep < reps; ++rep) {
    const auto block = detail::sample_block(p, eta, rng);
    REQUIRE(block.size() == static_cast<std::size_t>(eta));
    for (std::size_t k = 1; k < block.size(); ++k) REQUIRE(block[k - 1] < block[k]);
    for (Index i : block) {
      REQUIRE(i >= 0);
      REQUIRE(i < p);
      ++hits[static_cast<std::size_t>(i)];
    }
  }
  // Every index is covered at rate eta/p; 4-sigma binomial band.
  const double expect = static_cast<double>(reps) * 3.0 / 7.0;
  const double se = std::sqrt(static_cast<double>(reps) * (3.0 / 7.0) * (4.0 / 7.0));
  for (long h : hits) REQUIRE(std::abs(static_cast<double>(h) - expect) <= 4.0 * se);

  // eta = P consumes no randomness.
  Rng a(123), b(123);
  const auto full = detail::sample_block(5, 5, a);
  REQUIRE(full == std::vector<Index>({0, 1, 2, 3, 4}));
  REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("block step only touches rows inside the block", "[samplers]") {
  const L21RegressionTarget target = make_toy(20, 6, 1.0, 0.5, 0.2, 2, 2024);
  ProposalParams params;
  params.sigma = 0.3;
  params.gamma = 0.2;
  Rng rng(404);
  Matrix xd = Matrix::Zero(6, 1);
  xd(0, 0) = 1.1;
  xd(3, 0) = -0.4;
  SparseState x = SparseState::from_dense(xd);
  for (int step = 0; step < 200; ++step) {
    const auto [z, accepted, block] = block_stmala_step(target, params, 2, x, rng);
    (void)accepted;
    std::vector<bool> in_block(6, false);
    for (Index i : block) in_block[static_cast<std::size_t>(i)] = true;
    const Matrix before = x.to_dense(), after = z.to_dense();
    for (Index i = 0; i < 6; ++i)
      if (!in_block[static_cast<std::size_t>(i)]) REQUIRE(after.row(i) == before.row(i));
    x = z;
  }
}

TEST_CASE("eta = P block update reproduces the full update bit-for-bit", "[samplers]") {
  const L21RegressionTarget target = make_toy(15, 4, 1.0, 0.8, 0.25, 2, 321);
  ProposalParams params;
  params.sigma = 0.4;
  params.gamma = 0.3;
  Rng rng_full(777), rng_block(777);
  SparseState xa = SparseState::zero(4, 1), xb = SparseState::zero(4, 1);
  for (int step = 0; step < 100; ++step) {
    auto [za, acc_a] = stmala_step(target, params, xa, rng_full);
    auto [zb, acc_b, block] = block_stmala_step(target, params, 4, xb, rng_block);
    REQUIRE(acc_a == acc_b);
    REQUIRE(za == zb);
    REQUIRE(block.size() == 4);
    xa = std::move(za);
    xb = std::move(zb);
  }
}

TEST_CASE("BlockStmalaChain matches the stateless steps on one stream", "[samplers]") {
  const L21RegressionTarget target = make_toy(15, 5, 1.0, 0.5, 0.3, 2, 11);
  ChainConfig cfg;
  cfg.iterations = 50;
  cfg.block_size = 2;
  cfg.params.sigma = 0.35;
  cfg.params.gamma = 0.25;
  BlockStmalaChain chain(target, cfg);
  Rng rng_a(31), rng_b(31);
  SparseState x = chain.state();
  for (int step = 0; step < 50; ++step) {
    chain.step(rng_a);
    auto [z, acc, block] = block_stmala_step(target, cfg.params, 2, x, rng_b);
    (void)acc;
    (void)block;
    REQUIRE(chain.state() == z);
    REQUIRE(chain.log_pi() == Catch::Approx(target.log_pi_unnorm(z)).margin(1e-12));
    x = std::move(z);
  }
}

TEST_CASE("run_chain records on the documented schedule", "[samplers]") {
  const L21RegressionTarget target = make_toy(10, 3, 1.0, 0.3, 0.3, 1, 5);
  ChainConfig cfg;
  cfg.iterations = 100;
  cfg.burn_in = 0;
  cfg.thin = 1;
  cfg.block_size = 3;
  cfg.seed = 8;
  cfg.params.sigma = 0.4;
  cfg.params.gamma = 0.3;

  const ChainTrace trace = run_chain(target, cfg);
  REQUIRE(trace.records().size() == 100);
  REQUIRE(trace.total_iterations() == 100);
  REQUIRE(trace.records().front().iter == 1);
  REQUIRE(trace.records().back().iter == 100);
  REQUIRE(trace.acceptance_rate() >= 0.0);
  REQUIRE(trace.acceptance_rate() <= 1.0);
  // log_pi in the record matches a re-evaluation of the recorded state.
  const auto& rec = trace.records()[40];
  const SparseState s = SparseState::embed(rec.mask, rec.active, 1);
  REQUIRE(rec.log_pi == Catch::Approx(target.log_pi_unnorm(s)).margin(1e-12));

  cfg.burn_in = 10;
  cfg.thin = 3;
  const ChainTrace thinned = run_chain(target, cfg);
  REQUIRE(thinned.records().size() == 30);
  REQUIRE(thinned.records().front().iter == 13);
  REQUIRE(thinned.records().back().iter == 100);
}

TEST_CASE("ChainConfig validation", "[samplers]") {
  ChainConfig cfg;
  cfg.iterations = 10;
  cfg.block_size = 2;
  cfg.params.sigma = 1.0;
  cfg.params.gamma = 0.1;
  REQUIRE_NOTHROW(cfg.validate(4));
  cfg.block_size = 5;
  REQUIRE_THROWS_AS(cfg.validate(4), std::invalid_argument);
  cfg.block_size = 0;
  REQUIRE_THROWS_AS(cfg.validate(4), std::invalid_argument);
  cfg.block_size = 2;
  cfg.iterations = 0;
  REQUIRE_THROWS_AS(cfg.validate(4), std::invalid_argument);
  cfg.iterations = 10;
  cfg.thin = 0;
  REQUIRE_THROWS_AS(cfg.validate(4), std::invalid_argument);
  cfg.thin = 1;
  cfg.init = SparseState::zero(3, 1);
  REQUIRE_THROWS_AS(cfg.validate(4), std::invalid_argument);
}

TEST_CASE("custom initial state is honoured", "[samplers]") {
  const L21RegressionTarget target = make_toy(10, 3, 1.0, 0.3, 0.3, 1, 5);
  ChainConfig cfg;
  cfg.iterations = 5;
  cfg.block_size = 1;
  cfg.params.sigma = 0.4;
  cfg.params.gamma = 0.3;
  Matrix init = Matrix::Zero(3, 1);
  init(1, 0) = 2.5;
  cfg.init = SparseState::from_dense(init);
  BlockStmalaChain chain(target, cfg);
  REQUIRE(chain.state() == *cfg.init);
}

TEST_CASE("trace CSV serialisation is deterministic and well-formed", "[samplers]") {
  namespace fs = std::filesystem;
  const L21RegressionTarget target = make_toy(10, 3, 1.0, 0.3, 0.3, 1, 5);
  ChainConfig cfg;
  cfg.iterations = 200;
  cfg.block_size = 2;
  cfg.seed = 17;
  cfg.params.sigma = 0.4;
  cfg.params.gamma = 0.3;

  const fs::path dir = fs::temp_directory_path() / "stmala_test_traces";
  fs::create_directories(dir);
  const std::string p1 = (dir / "a.csv").string(), p2 = (dir / "b.csv").string();
  write_trace_csv(run_chain(target, cfg), p1);
  write_trace_csv(run_chain(target, cfg), p2);
  REQUIRE(slurp(p1) == slurp(p2));

  const Table t = read_table_csv(p1);
  REQUIRE(t.columns == std::vector<std::string>({"iter", "accepted", "n_active", "log_pi",
                                                 "m0", "m1", "m2"}));
  REQUIRE(t.rows.size() == 200);
  for (const auto& row : t.rows) {
    const long n_active = std::stol(row[2]);
    long bits = 0;
    for (int i = 0; i < 3; ++i) bits += std::stol(row[4 + static_cast<std::size_t>(i)]);
    REQUIRE(bits == n_active);
  }
  fs::remove_all(dir);
}

TEST_CASE("block STMALA reproduces the exact mask posterior on a tiny problem", "[samplers]") {
  // P = 2, lambda = 0: the mask posterior is available in closed form, so
  // long-run frequencies must converge to it (total variation <= 0.02).
  const Index n = 15, p = 2;
  const double tau = 1.0, omega = 0.3;
  const L21RegressionTarget target = make_toy(n, p, tau, 0.0, omega, 1, 2468);
  const ModelPosterior post = enumerate_posterior(
      target.y(), target.design(), tau, 0.0, bernoulli_log_prior(omega, p));

  ChainConfig cfg;
  cfg.iterations = 500000;
  cfg.burn_in = 20000;
  cfg.block_size = 1;
  cfg.params.gamma = 0.4;
  cfg.params.sigma = std::sqrt(2.0 / target.lipschitz_bound());
  cfg.params.kind = OperatorKind::Stvs;

  std::vector<double> counts(4, 0.0);
  long kept = 0;
  Rng rng(13579);
  BlockStmalaChain chain(target, cfg);
  for (long iter = 1; iter <= cfg.iterations; ++iter) {
    chain.step(rng);
    if (iter <= cfg.burn_in) continue;
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
