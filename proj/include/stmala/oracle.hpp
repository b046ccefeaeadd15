#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "stmala/rng.hpp"
#include "stmala/samplers.hpp"
#include "stmala/sparse_state.hpp"
#include "stmala/targets.hpp"
#include "stmala/types.hpp"

namespace stmala {

// Exact (up to per-mask Monte Carlo when lambda > 0) posterior over the 2^P
// activity masks of the scalar-response L21 model.
struct ModelPosterior {
  Index p = 0;
  std::vector<double> log_weights;  // unnormalised, index = little-endian mask
  std::vector<double> probs;        // normalised
  std::vector<double> mc_rel_se;    // relative std. error of the MC factor (0 when exact)
};

namespace detail {

// Per-mask Monte Carlo estimate of E[exp(-lambda ||x||_1)] under
// N(xbar, tau (G_m' G_m)^{-1}), drawn through the Cholesky factor of the
// covariance on a sub-stream fixed by the mask index.  Returns the log of
// the mean and the relative standard error of the mean.
inline std::pair<double, double> log_mc_l1_factor(const Vector& xbar, const Matrix& cov,
                                                  double lambda, long mc_samples, Rng& rng) {
  const Index k = xbar.size();
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("enumerate_posterior: covariance factorization failed");
  const Matrix l = llt.matrixL();
  double sum = 0.0, sum_sq = 0.0;
  Vector xi(k), x(k);
  for (long s = 0; s < mc_samples; ++s) {
    for (Index i = 0; i < k; ++i) xi(i) = rng.normal();
    x = xbar + l * xi;
    const double v = std::exp(-lambda * x.lpNorm<1>());
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / static_cast<double>(mc_samples);
  if (mean <= 0.0) return {kNegInf, 0.0};
  const double var = std::max(0.0, sum_sq / static_cast<double>(mc_samples) - mean * mean);
  const double se = std::sqrt(var / static_cast<double>(mc_samples));
  return {std::log(mean), se / mean};
}

}  // namespace detail

// Enumerates pi(m | Y) for T = 1 and P <= 20 by integrating the regression
// coefficients out of every stratum:
//   pi(m|Y) prop. to  w_m c_lambda^{-|m|} exp(Y'A_m Y/(2 tau)) (2 pi tau)^{|m|/2}
//                     det(G_m'G_m)^{-1/2} E_phi[exp(-lambda ||x||_1)],
// with A_m the projector quadratic form and phi the Gaussian centred at the
// least-squares solution.  Masks whose Gram matrix is numerically singular
// (smallest eigenvalue < 1e-10 times the largest) get probability zero.
inline ModelPosterior enumerate_posterior(const Matrix& y, const Matrix& g, double tau,
                                          double lambda,
                                          const std::function<double(Index)>& log_prior_weight,
                                          long mc_samples = 4096,
                                          std::uint64_t seed = 0x0c7a1e5eedULL) {
  if (y.cols() != 1) throw std::invalid_argument("enumerate_posterior: T must be 1");
  if (g.rows() != y.rows()) throw std::invalid_argument("enumerate_posterior: G rows != Y rows");
  if (!(tau > 0.0)) throw std::invalid_argument("enumerate_posterior: tau must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("enumerate_posterior: lambda must be >= 0");
  if (lambda > 0.0 && mc_samples < 1)
    throw std::invalid_argument("enumerate_posterior: mc_samples must be >= 1");
  const Index p = g.cols();
  if (p < 1 || p > 20) throw std::invalid_argument("enumerate_posterior: requires 1 <= P <= 20");

  const double log_cl = log_c_lambda(1, lambda);
  const std::uint64_t n_masks = std::uint64_t{1} << p;
  ModelPosterior post;
  post.p = p;
  post.log_weights.assign(n_masks, kNegInf);
  post.mc_rel_se.assign(n_masks, 0.0);

  for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
    std::vector<Index> idx;
    for (Index i = 0; i < p; ++i)
      if ((mask >> i) & 1u) idx.push_back(i);
    const auto k = static_cast<Index>(idx.size());
    double lw = log_prior_weight(k) - static_cast<double>(k) * log_cl;
    if (k > 0) {
      Matrix gm(g.rows(), k);
      for (Index c = 0; c < k; ++c) gm.col(c) = g.col(idx[static_cast<std::size_t>(c)]);
      const Matrix gram = gm.transpose() * gm;
      Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
      if (es.info() != Eigen::Success)
        throw NumericalError("enumerate_posterior: eigendecomposition failed");
      const Vector& ev = es.eigenvalues();
      if (ev(0) < 1e-10 * ev(k - 1) || !(ev(0) > 0.0)) continue;  // singular stratum: weight 0
      const Vector gty = gm.transpose() * y;
      const Vector xbar = es.eigenvectors() * ((es.eigenvectors().transpose() * gty).array() /
                                               ev.array()).matrix();
      double log_det = 0.0;
      for (Index c = 0; c < k; ++c) log_det += std::log(ev(c));
      lw += gty.dot(xbar) / (2.0 * tau) +
            0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi * tau) -
            0.5 * log_det;
      if (lambda > 0.0) {
        const Matrix cov = tau * es.eigenvectors() *
                           ev.array().inverse().matrix().asDiagonal() *
                           es.eigenvectors().transpose();
        Rng rng(seed, mask);  // fixed sub-stream per mask
        const auto [log_mc, rel_se] = detail::log_mc_l1_factor(xbar, cov, lambda, mc_samples, rng);
        lw += log_mc;
        post.mc_rel_se[mask] = rel_se;
      }
    }
    post.log_weights[mask] = lw;
  }

  // Normalise through log-sum-exp.
  double max_lw = kNegInf;
  for (double lw : post.log_weights) max_lw = std::max(max_lw, lw);
  if (max_lw == kNegInf) throw NumericalError("enumerate_posterior: all strata have zero weight");
  double z = 0.0;
  for (double lw : post.log_weights) z += (lw == kNegInf) ? 0.0 : std::exp(lw - max_lw);
  const double log_z = max_lw + std::log(z);
  post.probs.assign(n_masks, 0.0);
  for (std::uint64_t mask = 0; mask < n_masks; ++mask)
    if (post.log_weights[mask] != kNegInf) post.probs[mask] = std::exp(post.log_weights[mask] - log_z);
  return post;
}

// Marginal activation probabilities P(X_i != 0 | Y) = sum_m pi(m|Y) m_i.
inline Vector activation_probs(const ModelPosterior& post) {
  Vector probs = Vector::Zero(post.p);
  for (std::uint64_t mask = 0; mask < post.probs.size(); ++mask) {
    const double pm = post.probs[mask];
    if (pm == 0.0) continue;
    for (Index i = 0; i < post.p; ++i)
      if ((mask >> i) & 1u) probs(i) += pm;
  }
  return probs;
}

// L1 activation error: sum_i |exact_i - empirical frequency of bit i| over
// the post-burn-in records of the trace.
inline double activation_error(const ChainTrace& trace, const Vector& exact, long burn_in = 0) {
  if (exact.size() != trace.p()) throw std::invalid_argument("activation_error: size mismatch");
  Vector counts = Vector::Zero(trace.p());
  long n = 0;
  for (const auto& r : trace.records()) {
    if (r.iter <= burn_in) continue;
    ++n;
    for (Index i = 0; i < trace.p(); ++i)
      if (r.mask.test(i)) counts(i) += 1.0;
  }
  if (n == 0) throw std::invalid_argument("activation_error: no post-burn-in records");
  double err = 0.0;
  for (Index i = 0; i < trace.p(); ++i)
    err += std::abs(exact(i) - counts(i) / static_cast<double>(n));
  return err;
}

}  // namespace stmala
