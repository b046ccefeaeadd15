#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stmala/operators.hpp"
#include "stmala/proposal.hpp"
#include "stmala/rng.hpp"
#include "stmala/targets.hpp"
#include "stmala/types.hpp"

namespace stmala {

struct CheckResult {
  std::string name;
  bool pass = false;
  double worst = 0.0;    // largest observed defect
  double tolerance = 0.0;
};

namespace detail {

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

inline double row_density(OperatorKind kind, double sigma, double gamma, const RowVector& c,
                          const RowVector& z) {
  const double lv = log_row_density(kind, sigma, gamma, c, z);
  return lv == kNegInf ? 0.0 : std::exp(lv);
}

// Total mass of the proposal row law: atom + quadrature of the continuous
// density over its support, for T = 1 (two half-lines) or T = 2 (polar,
// nested quadrature).
inline double proposal_total_mass(OperatorKind kind, const RowVector& c, double sigma,
                                  double gamma) {
  const Index t = c.size();
  const double atom = atom_prob(c, sigma, gamma, AtomMethod::Exact);
  const double r_max = c.norm() + gamma + 12.0 * sigma;
  double cont = 0.0;
  if (t == 1) {
    const double lo = kind == OperatorKind::HardThreshold ? gamma : 0.0;
    auto f = [&](double z) {
      RowVector zv(1);
      zv(0) = z;
      return row_density(kind, sigma, gamma, c, zv);
    };
    cont = GK::integrate(f, lo, r_max, 12, 1e-10) +
           GK::integrate(f, -r_max, -lo, 12, 1e-10);
  } else if (t == 2) {
    const double lo = kind == OperatorKind::HardThreshold ? gamma : 0.0;
    auto radial = [&](double r) {
      auto angular = [&](double theta) {
        RowVector zv(2);
        zv(0) = r * std::cos(theta);
        zv(1) = r * std::sin(theta);
        return row_density(kind, sigma, gamma, c, zv);
      };
      return r * GK::integrate(angular, 0.0, 2.0 * std::numbers::pi, 10, 1e-10);
    };
    cont = GK::integrate(radial, lo, r_max, 12, 1e-9);
  } else {
    throw std::invalid_argument("proposal_total_mass: only T = 1 or 2 supported");
  }
  return atom + cont;
}

}  // namespace detail

// Normalisation of the proposal law: atom probability plus the integrated
// continuous density must equal 1, for every operator kind, T in {1,2}, and
// a 12-point (mu, sigma, gamma) grid.
inline CheckResult check_proposal_normalization(double tolerance = 1e-5) {
  CheckResult res{"proposal_normalization", true, 0.0, tolerance};
  const double mus[] = {-2.0, 0.0, 3.0};
  const double sigmas[] = {0.5, 1.0};
  const double gammas[] = {0.3, 1.0};
  for (OperatorKind kind :
       {OperatorKind::Prox, OperatorKind::HardThreshold, OperatorKind::Stvs}) {
    for (Index t : {Index{1}, Index{2}}) {
      for (double mu : mus)
        for (double sigma : sigmas)
          for (double gamma : gammas) {
            RowVector c(t);
            c(0) = mu;
            if (t == 2) c(1) = 0.7 * mu - 0.3;  // off-axis second coordinate
            const double mass = detail::proposal_total_mass(kind, c, sigma, gamma);
            res.worst = std::max(res.worst, std::abs(mass - 1.0));
          }
    }
  }
  res.pass = res.worst <= tolerance;
  return res;
}

// Analytic gradients of the three targets against central finite differences
// at step 1e-6 ||x||_F on randomly generated instances.
inline CheckResult check_gradient_fd(int instances = 100, double tolerance = 1e-5,
                                     std::uint64_t seed = 20240811) {
  CheckResult res{"gradient_finite_difference", true, 0.0, tolerance};
  Rng rng(seed);
  for (int inst = 0; inst < instances; ++inst) {
    const Index n = 5 + static_cast<Index>(rng.uniform_below(26));
    const Index p = 2 + static_cast<Index>(rng.uniform_below(11));
    const int family = static_cast<int>(rng.uniform_below(3));
    const Index t = family == 2 ? 1 : 1 + static_cast<Index>(rng.uniform_below(3));
    Matrix g(n, p), y(n, t), x(p, t);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j) g(i, j) = rng.normal();
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < t; ++j) y(i, j) = rng.normal();
    do {
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < t; ++j) x(i, j) = rng.normal();
    } while (x.norm() == 0.0);
    const double tau = 0.25 + 2.0 * rng.uniform();
    const double lambda = rng.uniform();

    auto check_one = [&](const auto& target) {
      const Matrix grad = target.g_grad(x);
      const double h = 1e-6 * x.norm();
      Matrix fd(p, t);
      Matrix xp = x;
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < t; ++j) {
          const double orig = x(i, j);
          xp(i, j) = orig + h;
          const double up = target.g_value(xp);
          xp(i, j) = orig - h;
          const double dn = target.g_value(xp);
          xp(i, j) = orig;
          fd(i, j) = (up - dn) / (2.0 * h);
        }
      const double rel = (fd - grad).norm() / std::max(grad.norm(), 1e-300);
      res.worst = std::max(res.worst, rel);
    };

    switch (family) {
      case 0:
        check_one(L21RegressionTarget(y, g, tau, lambda, 0.5));
        break;
      case 1:
        check_one(RidgedExampleTarget(y, g, tau, lambda, 0.5, rng.uniform()));
        break;
      default:
        check_one(SpikeSlabTarget(y, g, 0.5 + rng.uniform(), 1.0 + 2.0 * rng.uniform(),
                                  0.05 + rng.uniform(), 0.1));
        break;
    }
  }
  res.pass = res.worst <= tolerance;
  return res;
}

// Exact series vs Johnson approximation of the atom probability over the
// pinned grid T in {1..10}, noncentrality in [0,100], gamma^2/sigma^2 in
// [0.1, 50].  The tolerance was frozen from a pilot of this very grid.
inline CheckResult check_atom_methods(double tolerance = 2.5e-2) {
  CheckResult res{"atom_prob_exact_vs_johnson", true, 0.0, tolerance};
  const double ells[] = {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0};
  const double ys[] = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0};
  for (Index t = 1; t <= 10; ++t)
    for (double l : ells)
      for (double y : ys) {
        const double exact = atom_prob_sq(l, t, 1.0, std::sqrt(y), AtomMethod::Exact);
        const double johnson = atom_prob_sq(l, t, 1.0, std::sqrt(y), AtomMethod::Johnson);
        res.worst = std::max(res.worst, std::abs(exact - johnson));
      }
  res.pass = res.worst <= tolerance;
  return res;
}

// The STVS map must minimise h(x) + ||x - u||^2/2.  The minimiser is
// collinear with u, so a golden-section search on the radius is an
// independent oracle; agreement is required within the stated resolution.
inline CheckResult check_stvs_penalty_identity(int cases = 60, double tolerance = 1e-4,
                                               std::uint64_t seed = 424242) {
  CheckResult res{"stvs_penalty_identity", true, 0.0, tolerance};
  Rng rng(seed);
  for (int inst = 0; inst < cases; ++inst) {
    const Index t = 1 + static_cast<Index>(rng.uniform_below(3));
    const double gamma = 0.1 + 2.0 * rng.uniform();
    RowVector u(t);
    do {
      for (Index j = 0; j < t; ++j) u(j) = 3.0 * (2.0 * rng.uniform() - 1.0);
    } while (u.norm() == 0.0);
    const double un = u.norm();

    auto objective = [&](double r) {
      RowVector x = u * (r / un);
      return lemma4_h(gamma, x) + 0.5 * (r - un) * (r - un);
    };
    // Golden-section search on [0, ||u||].
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = un;
    double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
    double f1 = objective(m1), f2 = objective(m2);
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
      if (f1 <= f2) {
        hi = m2;
        m2 = m1;
        f2 = f1;
        m1 = hi - gr * (hi - lo);
        f1 = objective(m1);
      } else {
        lo = m1;
        m1 = m2;
        f1 = f2;
        m2 = lo + gr * (hi - lo);
        f2 = objective(m2);
      }
    }
    const double r_opt = 0.5 * (lo + hi);
    Matrix um(1, t);
    um.row(0) = u;
    const double r_stvs = apply_operator(OperatorKind::Stvs, gamma, um).row(0).norm();
    res.worst = std::max(res.worst, std::abs(r_opt - r_stvs));
  }
  res.pass = res.worst <= tolerance;
  return res;
}

inline std::vector<CheckResult> run_all_checks() {
  return {check_proposal_normalization(), check_gradient_fd(), check_atom_methods(),
          check_stvs_penalty_identity()};
}

}  // namespace stmala
