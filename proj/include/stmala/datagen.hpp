#pragma once

#include <cmath>
#include <string>

#include "stmala/rng.hpp"
#include "stmala/types.hpp"

namespace stmala {

enum class DesignKind { IidGaussian, Correlated };

// N x P design matrix.  IidGaussian: independent standard normal entries.
// Correlated: each row is a stationary AR(1) Gaussian vector across the P
// coordinates with autocovariance rho^|j-k| (first column standard normal,
// column j = rho * column (j-1) + sqrt(1-rho^2) * fresh normal).  Entries
// are drawn column-major within each kind so the draw order is pinned.
inline Matrix gen_design(Index n, Index p, DesignKind kind, double rho, Rng& rng) {
  if (n < 1 || p < 1) throw std::invalid_argument("gen_design: n, p must be >= 1");
  Matrix g(n, p);
  switch (kind) {
    case DesignKind::IidGaussian:
      for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
      return g;
    case DesignKind::Correlated: {
      if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("gen_design: rho must be in (-1,1)");
      const double fresh_scale = std::sqrt(1.0 - rho * rho);
      for (Index i = 0; i < n; ++i) g(i, 0) = rng.normal();
      for (Index j = 1; j < p; ++j)
        for (Index i = 0; i < n; ++i) g(i, j) = rho * g(i, j - 1) + fresh_scale * rng.normal();
      return g;
    }
  }
  throw std::invalid_argument("gen_design: unknown kind");
}

enum class TruthKind { StepSignal, Breiman };

// Ground-truth regression matrix (P x T).  StepSignal: rows 1..s equal to
// the all-ones row.  Breiman: four clusters of five adjacent coefficients,
// cluster k (1-based) starting at position 50(k-1), with values
// (-1)^(k+1) j^(1/k) for j = 1..5; requires T = 1 and P >= 155.
inline Matrix gen_truth(Index p, Index t, TruthKind kind, Index s = 0) {
  if (p < 1 || t < 1) throw std::invalid_argument("gen_truth: p, t must be >= 1");
  Matrix x = Matrix::Zero(p, t);
  switch (kind) {
    case TruthKind::StepSignal:
      if (s < 0 || s > p) throw std::invalid_argument("gen_truth: s must be in [0, P]");
      for (Index i = 0; i < s; ++i) x.row(i).setOnes();
      return x;
    case TruthKind::Breiman: {
      if (t != 1) throw std::invalid_argument("gen_truth: Breiman requires T = 1");
      if (p < 155) throw std::invalid_argument("gen_truth: Breiman requires P >= 155");
      for (Index k = 1; k <= 4; ++k) {
        const double sign = (k % 2 == 1) ? 1.0 : -1.0;
        for (Index j = 1; j <= 5; ++j)
          x(50 * (k - 1) + (j - 1), 0) = sign * std::pow(static_cast<double>(j), 1.0 / static_cast<double>(k));
      }
      return x;
    }
  }
  throw std::invalid_argument("gen_truth: unknown kind");
}

// Observations Y = G X + E with iid N(0, noise_var) entries in E, drawn
// row-major.
inline Matrix gen_observations(const Matrix& g, const Matrix& x, double noise_var, Rng& rng) {
  if (g.cols() != x.rows()) throw std::invalid_argument("gen_observations: shape mismatch");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("gen_observations: noise_var must be >= 0");
  Matrix y = g * x;
  const double sd = std::sqrt(noise_var);
  for (Index i = 0; i < y.rows(); ++i)
    for (Index j = 0; j < y.cols(); ++j) y(i, j) += sd * rng.normal();
  return y;
}

}  // namespace stmala
