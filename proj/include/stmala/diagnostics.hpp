#pragma once

#include <cmath>
#include <vector>

#include "stmala/types.hpp"

namespace stmala {

struct AcfResult {
  std::vector<double> values;  // values[k] = lag-k autocorrelation, values[0] = 1
  bool degenerate = false;     // constant series: all lags reported as 1
};

// Biased-normalisation sample autocorrelation.
inline AcfResult acf(const std::vector<double>& series, int max_lag) {
  const auto n = static_cast<long>(series.size());
  if (n < 2) throw std::invalid_argument("acf: series needs at least 2 points");
  if (max_lag < 0 || max_lag >= n) throw std::invalid_argument("acf: max_lag out of range");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  AcfResult r;
  r.values.resize(static_cast<std::size_t>(max_lag) + 1);
  if (c0 == 0.0) {
    r.degenerate = true;
    for (auto& v : r.values) v = 1.0;
    return r;
  }
  for (int k = 0; k <= max_lag; ++k) {
    double ck = 0.0;
    for (long t = 0; t + k < n; ++t) ck += (series[static_cast<std::size_t>(t)] - mean) *
                                           (series[static_cast<std::size_t>(t + k)] - mean);
    ck /= static_cast<double>(n);
    r.values[static_cast<std::size_t>(k)] = ck / c0;
  }
  return r;
}

// Held-out prediction error ||G_test xhat - Y_test||^2 / n_test.
inline double test_mse(const Matrix& g_test, const Matrix& y_test, const Matrix& xhat) {
  if (g_test.rows() != y_test.rows()) throw std::invalid_argument("test_mse: row mismatch");
  if (g_test.rows() == 0) throw std::invalid_argument("test_mse: empty test set");
  if (g_test.cols() != xhat.rows() || y_test.cols() != xhat.cols())
    throw std::invalid_argument("test_mse: shape mismatch");
  return (g_test * xhat - y_test).squaredNorm() / static_cast<double>(g_test.rows());
}

}  // namespace stmala
