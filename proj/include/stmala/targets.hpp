#pragma once

#include <cmath>
#include <concepts>
#include <functional>
#include <numbers>
#include <utility>

#include "stmala/linalg.hpp"
#include "stmala/sparse_state.hpp"
#include "stmala/types.hpp"

namespace stmala {

// Contract required by the samplers: dimensions, the smooth energy g (value
// and gradient on dense P x T matrices) and the unnormalised log posterior
// on sparse states.  All targets are immutable after construction.
template <class T>
concept TargetDensity = requires(const T& t, const Matrix& x, const SparseState& s) {
  { t.p() } -> std::convertible_to<Index>;
  { t.t() } -> std::convertible_to<Index>;
  { t.g_value(x) } -> std::convertible_to<double>;
  { t.g_grad(x) } -> std::convertible_to<Matrix>;
  { t.log_pi_unnorm(s) } -> std::convertible_to<double>;
};

// log of the normalising constant of the row density, computed in log space:
//   c_lambda = 2 pi^{T/2} (T-1)! / (lambda^T Gamma(T/2))   for lambda > 0,
//   c_0      = 1.
inline double log_c_lambda(Index t, double lambda) {
  if (t < 1) throw std::invalid_argument("log_c_lambda: t must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("log_c_lambda: lambda must be >= 0");
  if (lambda == 0.0) return 0.0;
  const double td = static_cast<double>(t);
  return std::numbers::ln2 + 0.5 * td * std::log(std::numbers::pi) + std::lgamma(td) -
         td * std::log(lambda) - std::lgamma(0.5 * td);
}

inline double c_lambda(Index t, double lambda) { return std::exp(log_c_lambda(t, lambda)); }

// Bernoulli(omega) product prior on the activity bits: log w_m depends on m
// through |m| only.
inline std::function<double(Index)> bernoulli_log_prior(double omega, Index p) {
  if (!(omega > 0.0 && omega < 1.0)) throw std::invalid_argument("bernoulli prior: omega must be in (0,1)");
  const double lo = std::log(omega);
  const double lc = std::log1p(-omega);
  return [lo, lc, p](Index k) {
    return static_cast<double>(k) * lo + static_cast<double>(p - k) * lc;
  };
}

// Multivariate regression posterior with a rowwise group-sparse prior:
//   log pi(x) = -||Y - G x||^2/(2 tau) - lambda ||x||_{2,1}
//               + log w_{|m|} - |m| log c_lambda  + const.
// g(x) = ||Y - G x||^2 / (2 tau) is the smooth part driving the drift.
class L21RegressionTarget {
 public:
  L21RegressionTarget(Matrix y, Matrix g, double tau, double lambda,
                      std::function<double(Index)> log_prior_weight)
      : y_(std::move(y)),
        g_(std::move(g)),
        tau_(tau),
        lambda_(lambda),
        log_prior_weight_(std::move(log_prior_weight)),
        log_c_lambda_(log_c_lambda(y_.cols(), lambda)) {
    if (g_.rows() != y_.rows()) throw std::invalid_argument("L21RegressionTarget: G rows != Y rows");
    if (!(tau_ > 0.0)) throw std::invalid_argument("L21RegressionTarget: tau must be > 0");
    if (lambda_ < 0.0) throw std::invalid_argument("L21RegressionTarget: lambda must be >= 0");
    if (!log_prior_weight_) throw std::invalid_argument("L21RegressionTarget: missing prior");
  }

  L21RegressionTarget(Matrix y, Matrix g, double tau, double lambda, double omega)
      : L21RegressionTarget(make_with_omega(std::move(y), std::move(g), tau, lambda, omega)) {}

  Index p() const { return g_.cols(); }
  Index t() const { return y_.cols(); }
  double tau() const { return tau_; }
  double lambda() const { return lambda_; }
  const Matrix& y() const { return y_; }
  const Matrix& design() const { return g_; }
  double log_prior_weight(Index k) const { return log_prior_weight_(k); }

  double g_value(const Matrix& x) const {
    check_shape(x);
    return (y_ - g_ * x).squaredNorm() / (2.0 * tau_);
  }

  Matrix g_grad(const Matrix& x) const {
    check_shape(x);
    return g_.transpose() * (g_ * x - y_) / tau_;
  }

  double log_pi_unnorm(const SparseState& s) const {
    if (s.p() != p() || s.t() != t()) throw std::invalid_argument("log_pi_unnorm: state shape mismatch");
    const Index k = s.n_active();
    return -g_value(s.to_dense()) - lambda_ * s.l21_norm() + log_prior_weight_(k) -
           static_cast<double>(k) * log_c_lambda_;
  }

  // Lipschitz constant of grad g: ||G G^t|| / tau, via power iteration.
  double lipschitz_bound() const { return gram_spectral_norm(g_) / tau_; }

 protected:
  static L21RegressionTarget make_with_omega(Matrix y, Matrix g, double tau, double lambda,
                                             double omega) {
    auto prior = bernoulli_log_prior(omega, g.cols());
    return L21RegressionTarget(std::move(y), std::move(g), tau, lambda, std::move(prior));
  }

  void check_shape(const Matrix& x) const {
    if (x.rows() != p() || x.cols() != t()) throw std::invalid_argument("target: x shape mismatch");
  }

  Matrix y_;
  Matrix g_;
  double tau_;
  double lambda_;
  std::function<double(Index)> log_prior_weight_;
  double log_c_lambda_;
};

// L21 posterior with an extra ridge -v ||x||_2^2 in the non-smooth part;
// the smooth energy g (hence the drift and the Lipschitz bound) is unchanged.
class RidgedExampleTarget : public L21RegressionTarget {
 public:
  RidgedExampleTarget(Matrix y, Matrix g, double tau, double lambda, double omega, double v)
      : L21RegressionTarget(std::move(y), std::move(g), tau, lambda, omega), v_(v) {
    if (!(v_ >= 0.0)) throw std::invalid_argument("RidgedExampleTarget: v must be >= 0");
  }

  double ridge() const { return v_; }

  double log_pi_unnorm(const SparseState& s) const {
    return L21RegressionTarget::log_pi_unnorm(s) - v_ * s.squared_norm();
  }

 private:
  double v_;
};

// Spike-and-slab posterior for scalar regression (T = 1):
//   log pi(x) = -theta/2 ||Y - G x||^2
//               - sum_{l active} (a + 1/2) log(1 + x_l^2/(2 a K))
//               + |m| log omega* + (P - |m|) log(1 - omega*) + const.
// The slab term vanishes at 0, so g sums it over every entry of a dense x:
//   g(x) = theta/2 ||Y - G x||^2 + sum_l (a + 1/2) log(1 + x_l^2/(2 a K)).
class SpikeSlabTarget {
 public:
  SpikeSlabTarget(Matrix y, Matrix g, double theta, double a, double k, double omega_star)
      : y_(std::move(y)), g_(std::move(g)), theta_(theta), a_(a), k_(k), omega_star_(omega_star) {
    if (y_.cols() != 1) throw std::invalid_argument("SpikeSlabTarget: T must be 1");
    if (g_.rows() != y_.rows()) throw std::invalid_argument("SpikeSlabTarget: G rows != Y rows");
    if (!(theta_ > 0.0) || !(a_ > 0.0) || !(k_ > 0.0))
      throw std::invalid_argument("SpikeSlabTarget: theta, a, K must be > 0");
    if (!(omega_star_ > 0.0 && omega_star_ < 1.0))
      throw std::invalid_argument("SpikeSlabTarget: omega* must be in (0,1)");
  }

  Index p() const { return g_.cols(); }
  Index t() const { return 1; }
  double theta() const { return theta_; }
  double a() const { return a_; }
  double k() const { return k_; }
  double omega_star() const { return omega_star_; }
  const Matrix& y() const { return y_; }
  const Matrix& design() const { return g_; }

  double g_value(const Matrix& x) const {
    check_shape(x);
    double v = 0.5 * theta_ * (y_ - g_ * x).squaredNorm();
    const double half = a_ + 0.5;
    const double scale = 2.0 * a_ * k_;
    for (Index i = 0; i < x.rows(); ++i) v += half * std::log1p(x(i, 0) * x(i, 0) / scale);
    return v;
  }

  Matrix g_grad(const Matrix& x) const {
    check_shape(x);
    Matrix grad = theta_ * (g_.transpose() * (g_ * x - y_));
    const double half = a_ + 0.5;
    const double ak = a_ * k_;
    for (Index i = 0; i < x.rows(); ++i) {
      const double xi = x(i, 0);
      grad(i, 0) += half * (xi / ak) / (1.0 + xi * xi / (2.0 * ak));
    }
    return grad;
  }

  double log_pi_unnorm(const SparseState& s) const {
    if (s.p() != p() || s.t() != 1) throw std::invalid_argument("log_pi_unnorm: state shape mismatch");
    const double k = static_cast<double>(s.n_active());
    return -g_value(s.to_dense()) + k * std::log(omega_star_) +
           (static_cast<double>(p()) - k) * std::log1p(-omega_star_);
  }

  // theta ||G G^t|| + (a + 1/2)/(a K): curvature of the quadratic part plus
  // the maximal curvature of the slab penalty.
  double lipschitz_bound() const {
    return theta_ * gram_spectral_norm(g_) + (a_ + 0.5) / (a_ * k_);
  }

 private:
  void check_shape(const Matrix& x) const {
    if (x.rows() != p() || x.cols() != 1) throw std::invalid_argument("target: x shape mismatch");
  }

  Matrix y_;
  Matrix g_;
  double theta_;
  double a_;
  double k_;
  double omega_star_;
};

static_assert(TargetDensity<L21RegressionTarget>);
static_assert(TargetDensity<RidgedExampleTarget>);
static_assert(TargetDensity<SpikeSlabTarget>);

}  // namespace stmala
