#pragma once

#include <algorithm>
#include <cmath>

#include "stmala/types.hpp"

namespace stmala {

// Largest eigenvalue of a symmetric positive semi-definite matrix by power
// iteration with a deterministic start vector.  Convergence is measured on
// the Rayleigh quotient (relative tolerance); failure to converge throws.
inline double spectral_norm_psd(const Matrix& b, double rel_tol = 1e-8,
                                int max_iter = 10000) {
  if (b.rows() != b.cols()) throw std::invalid_argument("spectral_norm_psd: matrix not square");
  const Index n = b.rows();
  if (n == 0) return 0.0;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = 1.0 + 1e-3 * static_cast<double>(i) / static_cast<double>(n);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = b * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;  // started in the null space of a PSD matrix
    const double lambda_new = v.dot(w);
    v = w / nw;
    if (it > 0 && std::abs(lambda_new - lambda) <= rel_tol * std::max(std::abs(lambda_new), 1e-300))
      return lambda_new;
    lambda = lambda_new;
  }
  throw NumericalError("spectral_norm_psd: power iteration did not converge");
}

// Spectral norm of G G^t (= spectral norm of G^t G; the smaller Gram matrix
// is formed).
inline double gram_spectral_norm(const Matrix& g, double rel_tol = 1e-8,
                                 int max_iter = 10000) {
  if (g.rows() <= g.cols()) return spectral_norm_psd(Matrix(g * g.transpose()), rel_tol, max_iter);
  return spectral_norm_psd(Matrix(g.transpose() * g), rel_tol, max_iter);
}

}  // namespace stmala
