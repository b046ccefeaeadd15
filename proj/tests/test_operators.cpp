#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "stmala/operators.hpp"
#include "stmala/rng.hpp"
#include "stmala/sparse_state.hpp"

using namespace stmala;

namespace {

Matrix single_row(std::initializer_list<double> vals) {
  Matrix m(1, static_cast<Index>(vals.size()));
  Index j = 0;
  for (double v : vals) m(0, j++) = v;
  return m;
}

}  // namespace

TEST_CASE("operator kind string round trip", "[operators]") {
  for (OperatorKind k : {OperatorKind::Prox, OperatorKind::HardThreshold, OperatorKind::Stvs})
    REQUIRE(operator_kind_from_string(to_string(k)) == k);
  REQUIRE(to_string(OperatorKind::Prox) == "prox");
  REQUIRE(to_string(OperatorKind::HardThreshold) == "hard_threshold");
  REQUIRE(to_string(OperatorKind::Stvs) == "stvs");
  REQUIRE_THROWS_AS(operator_kind_from_string("soft"), std::invalid_argument);
}

TEST_CASE("apply_operator scalar values", "[operators]") {
  const double gamma = 0.5;
  // Prox shrinks by gamma toward zero.
  REQUIRE(apply_operator(OperatorKind::Prox, gamma, single_row({2.0}))(0, 0) == 1.5);
  REQUIRE(apply_operator(OperatorKind::Prox, gamma, single_row({-2.0}))(0, 0) == -1.5);
  // Hard threshold passes survivors through unchanged.
  REQUIRE(apply_operator(OperatorKind::HardThreshold, gamma, single_row({2.0}))(0, 0) == 2.0);
  REQUIRE(apply_operator(OperatorKind::HardThreshold, gamma, single_row({0.4}))(0, 0) == 0.0);
  // STVS rescales by 1 - gamma^2/r^2: 2 * (1 - 0.25/4) = 1.875.
  REQUIRE(apply_operator(OperatorKind::Stvs, gamma, single_row({2.0}))(0, 0) == 1.875);
}

TEST_CASE("apply_operator acts rowwise through the row norm", "[operators]") {
  // Row (3,4) has norm 5; prox with gamma = 2.5 halves it.
  const Matrix u = single_row({3.0, 4.0});
  const Matrix prox = apply_operator(OperatorKind::Prox, 2.5, u);
  REQUIRE(prox(0, 0) == Catch::Approx(1.5).margin(1e-15));
  REQUIRE(prox(0, 1) == Catch::Approx(2.0).margin(1e-15));

  // Output norms: r - gamma (prox), r (hard), r - gamma^2/r (stvs).
  const double gamma = 1.25;
  REQUIRE(apply_operator(OperatorKind::Prox, gamma, u).row(0).norm() ==
          Catch::Approx(5.0 - gamma).epsilon(1e-14));
  REQUIRE(apply_operator(OperatorKind::HardThreshold, gamma, u).row(0).norm() ==
          Catch::Approx(5.0).epsilon(1e-14));
  REQUIRE(apply_operator(OperatorKind::Stvs, gamma, u).row(0).norm() ==
          Catch::Approx(5.0 - gamma * gamma / 5.0).epsilon(1e-14));
}

TEST_CASE("rows with norm <= gamma map to the exact zero row", "[operators]") {
  const double gamma = 5.0;  // row (3,4) sits exactly on the boundary
  const Matrix u = single_row({3.0, 4.0});
  for (OperatorKind k : {OperatorKind::Prox, OperatorKind::HardThreshold, OperatorKind::Stvs}) {
    const Matrix out = apply_operator(k, gamma, u);
    REQUIRE(out(0, 0) == 0.0);
    REQUIRE(out(0, 1) == 0.0);
  }
  // Strictly inside the ball as well.
  for (OperatorKind k : {OperatorKind::Prox, OperatorKind::HardThreshold, OperatorKind::Stvs})
    REQUIRE(apply_operator(k, gamma, single_row({0.1, -0.2})).row(0).isZero(0.0));
}

TEST_CASE("output activity equals the thresholding pattern", "[operators]") {
  Rng rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    const Index t = 1 + static_cast<Index>(rng.uniform_below(3));
    const double gamma = 0.1 + rng.uniform();
    Matrix u(4, t);
    for (Index i = 0; i < u.rows(); ++i)
      for (Index j = 0; j < t; ++j) u(i, j) = 2.0 * rng.normal();
    for (OperatorKind k : {OperatorKind::Prox, OperatorKind::HardThreshold, OperatorKind::Stvs}) {
      const Matrix out = apply_operator(k, gamma, u);
      for (Index i = 0; i < u.rows(); ++i) {
        const bool kept = u.row(i).norm() > gamma;
        REQUIRE(mask_of(out).test(i) == kept);
        if (kept) REQUIRE(out.row(i).norm() > 0.0);
      }
    }
  }
}

TEST_CASE("apply_operator rejects non-positive gamma", "[operators]") {
  REQUIRE_THROWS_AS(apply_operator(OperatorKind::Prox, 0.0, single_row({1.0})),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(apply_operator(OperatorKind::Stvs, -1.0, single_row({1.0})),
                    std::invalid_argument);
}

TEST_CASE("stvs_g is the inverse scale of the STVS map", "[operators]") {
  // psi_tilde(Psi_stvs(u)) must reproduce u for rows that survive.
  Rng rng(77);
  for (int rep = 0; rep < 200; ++rep) {
    const Index t = 1 + static_cast<Index>(rng.uniform_below(3));
    const double gamma = 0.1 + rng.uniform();
    Matrix u(1, t);
    do {
      for (Index j = 0; j < t; ++j) u(0, j) = 3.0 * rng.normal();
    } while (u.row(0).norm() <= gamma * 1.001);
    const Matrix z = apply_operator(OperatorKind::Stvs, gamma, u);
    const double zn = z.row(0).norm();
    const double s = stvs_g(gamma * gamma / (zn * zn));
    const Matrix back = s * z;
    REQUIRE((back - u).norm() <= 1e-12 * u.norm());
  }
}

TEST_CASE("stvs_g and stvs_gtilde closed forms", "[operators]") {
  // g(u) = (1 + sqrt(1+4u))/2 in its cancellation-prone form.
  for (double u : {0.0, 0.1, 1.0, 7.5, 1e3, 1e9}) {
    REQUIRE(stvs_g(u) == Catch::Approx(0.5 * (1.0 + std::sqrt(1.0 + 4.0 * u))).epsilon(1e-14));
    REQUIRE(stvs_gtilde(u) == Catch::Approx(1.0 / std::sqrt(1.0 + 4.0 * u)).epsilon(1e-14));
  }
  REQUIRE(stvs_g(0.0) == 1.0);
  REQUIRE(stvs_gtilde(0.0) == 1.0);
  REQUIRE_THROWS_AS(stvs_g(-0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(stvs_gtilde(-0.1), std::invalid_argument);
}

TEST_CASE("lemma4_h values and monotonicity", "[operators]") {
  const double gamma = 0.8;
  RowVector zero = RowVector::Zero(2);
  // h(0) = -gamma^2/2 (asinh(0) = 0, exp(0) = 1).
  REQUIRE(lemma4_h(gamma, zero) == Catch::Approx(-0.5 * gamma * gamma).margin(1e-15));

  // Direct evaluation against the asinh formula at ||x|| = 2.
  RowVector x(2);
  x << 1.2, 1.6;
  const double t = std::asinh(2.0 / (2.0 * gamma));
  const double expected = gamma * gamma * (t - 0.5 * std::exp(-2.0 * t));
  REQUIRE(lemma4_h(gamma, x) == Catch::Approx(expected).epsilon(1e-14));

  // h grows with the row norm and only depends on it.
  double prev = lemma4_h(gamma, zero);
  for (double r = 0.25; r < 6.0; r += 0.25) {
    RowVector v(2);
    v << r, 0.0;
    RowVector w(2);
    w << r * std::numbers::sqrt2 / 2.0, r * std::numbers::sqrt2 / 2.0;
    const double hv = lemma4_h(gamma, v);
    REQUIRE(hv > prev);
    REQUIRE(lemma4_h(gamma, w) == Catch::Approx(hv).epsilon(1e-12));
    prev = hv;
  }

  REQUIRE_THROWS_AS(lemma4_h(0.0, x), std::invalid_argument);
}
