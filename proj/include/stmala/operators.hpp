#pragma once

#include <cmath>
#include <string>

#include "stmala/types.hpp"

namespace stmala {

// The three rowwise shrinkage maps.  Each one sends a row to the exact zero
// vector when its Euclidean norm is <= gamma (boundary rows included) and
// otherwise rescales it by a factor in (0,1], so the output activity pattern
// is exactly the thresholding pattern.
enum class OperatorKind { Prox, HardThreshold, Stvs };

inline std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::Prox: return "prox";
    case OperatorKind::HardThreshold: return "hard_threshold";
    case OperatorKind::Stvs: return "stvs";
  }
  throw std::invalid_argument("unknown OperatorKind");
}

inline OperatorKind operator_kind_from_string(const std::string& s) {
  if (s == "prox") return OperatorKind::Prox;
  if (s == "hard_threshold") return OperatorKind::HardThreshold;
  if (s == "stvs") return OperatorKind::Stvs;
  throw std::invalid_argument("unknown operator kind: " + s);
}

inline Matrix apply_operator(OperatorKind kind, double gamma, const Matrix& u) {
  if (!(gamma > 0.0)) throw std::invalid_argument("apply_operator: gamma must be > 0");
  Matrix out = Matrix::Zero(u.rows(), u.cols());
  for (Index i = 0; i < u.rows(); ++i) {
    const double r = u.row(i).norm();
    if (r <= gamma) continue;  // exact zero row, all three operators
    switch (kind) {
      case OperatorKind::Prox:
        out.row(i) = u.row(i) * (1.0 - gamma / r);
        break;
      case OperatorKind::HardThreshold:
        out.row(i) = u.row(i);
        break;
      case OperatorKind::Stvs:
        out.row(i) = u.row(i) * (1.0 - (gamma * gamma) / (r * r));
        break;
    }
  }
  return out;
}

// Scale factor of the inverse STVS map: psi_tilde(z) = g(gamma^2/||z||^2) z.
// Written in the cancellation-free form 1 + 2u / (1 + sqrt(1+4u)).
inline double stvs_g(double u) {
  if (u < 0.0) throw std::invalid_argument("stvs_g: u must be >= 0");
  return 1.0 + 2.0 * u / (1.0 + std::sqrt(1.0 + 4.0 * u));
}

// Derivative factor g~(u) = 1/sqrt(1+4u) entering the STVS density Jacobian.
inline double stvs_gtilde(double u) {
  if (u < 0.0) throw std::invalid_argument("stvs_gtilde: u must be >= 0");
  return 1.0 / std::sqrt(1.0 + 4.0 * u);
}

// Penalty whose proximity operator is the STVS map:
//   h(x) = gamma^2 [ asinh(||x||/(2 gamma)) - exp(-2 asinh(||x||/(2 gamma)))/2 ].
inline double lemma4_h(double gamma, const RowVector& x) {
  if (!(gamma > 0.0)) throw std::invalid_argument("lemma4_h: gamma must be > 0");
  const double t = std::asinh(x.norm() / (2.0 * gamma));
  return gamma * gamma * (t - 0.5 * std::exp(-2.0 * t));
}

}  // namespace stmala
