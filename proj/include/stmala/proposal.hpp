#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stmala/operators.hpp"
#include "stmala/rng.hpp"
#include "stmala/sparse_state.hpp"
#include "stmala/targets.hpp"
#include "stmala/types.hpp"

namespace stmala {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// How the atom probability P{ ||c + xi|| <= gamma } is evaluated.
enum class AtomMethod { Exact, Johnson };

inline std::string to_string(AtomMethod m) {
  return m == AtomMethod::Exact ? "exact" : "johnson";
}

inline AtomMethod atom_method_from_string(const std::string& s) {
  if (s == "exact") return AtomMethod::Exact;
  if (s == "johnson") return AtomMethod::Johnson;
  throw std::invalid_argument("unknown atom method: " + s);
}

struct ProposalParams {
  double sigma = 1.0;
  double gamma = 0.1;
  OperatorKind kind = OperatorKind::Stvs;
  std::optional<double> truncation;  // drift radius D; absent = no truncation
  AtomMethod atom_method = AtomMethod::Exact;

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("ProposalParams: sigma must be > 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("ProposalParams: gamma must be > 0");
    if (truncation && !(*truncation > 0.0))
      throw std::invalid_argument("ProposalParams: truncation must be > 0");
  }
};

// Drift from a precomputed gradient: mu = x - (sigma^2/2) grad, with the
// optional norm truncation grad <- D grad / max(D, ||grad||_F).  The
// truncation factor always uses the full-matrix gradient norm; block updates
// restrict the rows of this globally-defined field.
inline Matrix drift_from_grad(const ProposalParams& params, const Matrix& x, const Matrix& grad) {
  double scale = 0.5 * params.sigma * params.sigma;
  if (params.truncation) {
    const double gn = grad.norm();
    const double d = *params.truncation;
    if (gn > d) scale *= d / gn;
  }
  return x - scale * grad;
}

template <TargetDensity Target>
Matrix drift(const Target& target, const ProposalParams& params, const Matrix& x) {
  params.validate();
  return drift_from_grad(params, x, target.g_grad(x));
}

namespace detail {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// P( chi'^2_t(l) <= y ) as the Poisson(l/2) mixture of central chi-squared
// CDFs, summed outward from the Poisson mode and truncated once the
// remaining Poisson mass is below 1e-12.  Central CDF terms come from the
// regularized incomplete gamma and its two-dof recurrences.
inline double noncentral_chi2_cdf(double t, double l, double y) {
  if (y <= 0.0) return 0.0;
  const double half_y = 0.5 * y;
  if (l <= 0.0) return boost::math::gamma_p(0.5 * t, half_y);
  const double half_l = 0.5 * l;
  const auto j0 = static_cast<long>(half_l);  // Poisson mode (floor)
  const double log_half_l = std::log(half_l);
  const double log_half_y = std::log(half_y);

  // Terms at the mode.
  const double w0 = std::exp(static_cast<double>(j0) * log_half_l - half_l -
                             std::lgamma(static_cast<double>(j0) + 1.0));
  const double a0 = 0.5 * t + static_cast<double>(j0);
  const double f0 = boost::math::gamma_p(a0, half_y);
  // d_a = (y/2)^a e^{-y/2} / Gamma(a+1) links F at a and a+1:
  //   F_{a+1} = F_a - d_a,   F_{a-1} = F_a + d_{a-1}.
  double d0 = std::exp(a0 * log_half_y - half_y - std::lgamma(a0 + 1.0));

  double acc = w0 * f0;

  // Upward pass j = j0+1, j0+2, ...: stop once a geometric bound on the
  // remaining Poisson tail (ratio half_l/(j+1) < 1 past the mode) drops
  // below 1e-12; the neglected contribution is at most that tail mass.
  {
    double w = w0, f = f0, d = d0, a = a0;
    for (long j = j0 + 1; j < j0 + 1000000; ++j) {
      const double jd = static_cast<double>(j);
      w *= half_l / jd;
      f -= d;
      if (f < 0.0) f = 0.0;
      d *= half_y / (a + 1.0);
      a += 1.0;
      acc += w * f;
      if (jd + 1.0 > half_l && w * (jd + 1.0) / (jd + 1.0 - half_l) < 1e-12) break;
    }
  }
  // Downward pass j = j0-1, ..., 0: at most j+1 terms remain, each with
  // weight <= w, so stopping once w * (j+1) < 1e-12 keeps the neglected
  // Poisson mass below 1e-12.
  {
    double w = w0, f = f0, a = a0, d = d0;
    for (long j = j0 - 1; j >= 0; --j) {
      w *= static_cast<double>(j + 1) / half_l;
      d *= a / half_y;
      a -= 1.0;
      f += d;
      if (f > 1.0) f = 1.0;
      acc += w * f;
      if (w * static_cast<double>(j + 1) < 1e-12) break;
    }
  }
  return std::min(1.0, std::max(0.0, acc));
}

// Power-transform normal approximation of the noncentral chi-squared CDF.
inline double johnson_chi2_cdf(double t, double l, double y) {
  if (y <= 0.0) return 0.0;
  const double s = t + l;
  const double u = 1.0 - (2.0 / 3.0) * s * (t + 3.0 * l) / ((t + 2.0 * l) * (t + 2.0 * l));
  const double v = (t + 2.0 * l) / (s * s);
  const double w = (u - 1.0) * (1.0 - 3.0 * u);
  const double num = std::pow(y, u) * std::pow(s, -u) -
                     (1.0 + u * v * (u - 1.0 - 0.5 * (2.0 - u) * w * v));
  const double den = u * std::sqrt(2.0 * v * (1.0 + w * v));
  return std::min(1.0, std::max(0.0, norm_cdf(num / den)));
}

}  // namespace detail

// Probability that a row with pre-threshold mean c lands in the closed ball
// of radius gamma, i.e. that the proposed row is exactly zero:
//   p(c) = P( chi'^2_T(||c/sigma||^2) <= gamma^2/sigma^2 ).
inline double atom_prob_sq(double c_sqnorm, Index t, double sigma, double gamma,
                           AtomMethod method = AtomMethod::Exact) {
  if (!(sigma > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("atom_prob: sigma, gamma must be > 0");
  if (c_sqnorm < 0.0) throw std::invalid_argument("atom_prob: negative squared norm");
  const double inv_s2 = 1.0 / (sigma * sigma);
  const double l = c_sqnorm * inv_s2;
  const double y = gamma * gamma * inv_s2;
  const double td = static_cast<double>(t);
  if (method == AtomMethod::Exact) return detail::noncentral_chi2_cdf(td, l, y);
  return detail::johnson_chi2_cdf(td, l, y);
}

inline double atom_prob(const RowVector& c, double sigma, double gamma,
                        AtomMethod method = AtomMethod::Exact) {
  return atom_prob_sq(c.squaredNorm(), c.size(), sigma, gamma, method);
}

// Log density at z != 0 of the thresholded Gaussian row Psi(c + sigma xi),
// with respect to Lebesgue measure on R^T.  Returns -inf outside the
// support (only possible for HardThreshold, whose support is ||z|| > gamma).
inline double log_row_density(OperatorKind kind, double sigma, double gamma,
                              const RowVector& c, const RowVector& z) {
  if (!(sigma > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("log_row_density: sigma, gamma must be > 0");
  if (c.size() != z.size()) throw std::invalid_argument("log_row_density: size mismatch");
  const double td = static_cast<double>(z.size());
  const double r = z.norm();
  if (r == 0.0) throw std::invalid_argument("log_row_density: z must be nonzero (atom handled separately)");
  const double base = -0.5 * td * std::log(2.0 * std::numbers::pi * sigma * sigma);
  const double inv_2s2 = 0.5 / (sigma * sigma);
  switch (kind) {
    case OperatorKind::Prox: {
      const double s = 1.0 + gamma / r;
      return base - (s * z - c).squaredNorm() * inv_2s2 + (td - 1.0) * std::log(s);
    }
    case OperatorKind::HardThreshold: {
      if (r <= gamma) return kNegInf;
      return base - (z - c).squaredNorm() * inv_2s2;
    }
    case OperatorKind::Stvs: {
      const double u = (gamma * gamma) / (r * r);
      const double gv = stvs_g(u);
      const double gt = stvs_gtilde(u);
      return base + td * std::log(gv) + std::log(gt) - (gv * z - c).squaredNorm() * inv_2s2;
    }
  }
  throw std::invalid_argument("unknown OperatorKind");
}

// Log transition density q(from -> to) restricted to the listed rows.
// mu_rows holds the drifted means of exactly those rows (k x T, aligned with
// `rows`).  Inactive target rows contribute log p(mu_i), active ones
// log f(mu_i, z_i); the product over rows becomes a sum of logs.  A zero
// atom probability yields -inf (certain rejection when it appears in the
// numerator of the acceptance ratio).
inline double log_q_rows(const ProposalParams& params, const Matrix& mu_rows,
                         const SparseState& to, std::span<const Index> rows) {
  if (mu_rows.rows() != static_cast<Index>(rows.size()))
    throw std::invalid_argument("log_q_rows: mu/rows size mismatch");
  if (mu_rows.cols() != to.t()) throw std::invalid_argument("log_q_rows: column mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index i = rows[k];
    const RowVector mu_i = mu_rows.row(static_cast<Index>(k));
    if (to.is_active(i)) {
      acc += log_row_density(params.kind, params.sigma, params.gamma, mu_i, to.row(i));
    } else {
      const double p = atom_prob(mu_i, params.sigma, params.gamma, params.atom_method);
      acc += (p > 0.0) ? std::log(p) : kNegInf;
    }
    if (acc == kNegInf) return kNegInf;
  }
  return acc;
}

// Full-update version: every row contributes; mu is the full P x T drift.
inline double log_q(const ProposalParams& params, const Matrix& mu, const SparseState& to) {
  if (mu.rows() != to.p()) throw std::invalid_argument("log_q: row mismatch");
  std::vector<Index> rows(static_cast<std::size_t>(to.p()));
  for (Index i = 0; i < to.p(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return log_q_rows(params, mu, to, rows);
}

// One full-dimensional proposal draw: Z = Psi(mu(x) + sigma Xi).  Returns the
// candidate and the drift used (reusable for the acceptance ratio).  The
// noise matrix is filled row-major.
template <TargetDensity Target>
std::pair<SparseState, Matrix> sample_candidate(const Target& target, const ProposalParams& params,
                                                const SparseState& x, Rng& rng) {
  params.validate();
  const Matrix mu = drift(target, params, x.to_dense());
  Matrix noisy = mu;
  for (Index i = 0; i < noisy.rows(); ++i)
    for (Index j = 0; j < noisy.cols(); ++j) noisy(i, j) += params.sigma * rng.normal();
  return {SparseState::from_dense(apply_operator(params.kind, params.gamma, noisy)), mu};
}

}  // namespace stmala
