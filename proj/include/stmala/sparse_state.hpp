#pragma once

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "stmala/types.hpp"

namespace stmala {

// Activity pattern of the P regressor rows.  A row is active iff it is not
// exactly the zero vector: activity is a statement about stored bits, never
// about closeness to zero.
class ModelMask {
 public:
  ModelMask() = default;
  explicit ModelMask(Index p) {
    if (p < 0) throw std::invalid_argument("ModelMask: negative size");
    bits_.assign(static_cast<std::size_t>(p), 0);
  }
  explicit ModelMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_)
      if (b > 1) throw std::invalid_argument("ModelMask: bits must be 0/1");
  }

  Index size() const { return static_cast<Index>(bits_.size()); }
  bool test(Index i) const { return bits_.at(static_cast<std::size_t>(i)) != 0; }
  void set(Index i, bool v) { bits_.at(static_cast<std::size_t>(i)) = v ? 1 : 0; }
  Index count() const {
    return std::accumulate(bits_.begin(), bits_.end(), Index{0},
                           [](Index a, std::uint8_t b) { return a + (b != 0); });
  }
  std::vector<Index> active_indices() const {
    std::vector<Index> idx;
    for (Index i = 0; i < size(); ++i)
      if (test(i)) idx.push_back(i);
    return idx;
  }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  bool operator==(const ModelMask& o) const { return bits_ == o.bits_; }
  bool operator!=(const ModelMask& o) const { return !(*this == o); }

  // Little-endian encoding: component i maps to bit i of the index.
  static ModelMask from_index(std::uint64_t index, Index p) {
    if (p < 0 || p > 63) throw std::invalid_argument("ModelMask::from_index: p out of range");
    ModelMask m(p);
    for (Index i = 0; i < p; ++i) m.set(i, (index >> i) & 1u);
    return m;
  }
  std::uint64_t to_index() const {
    if (size() > 63) throw std::invalid_argument("ModelMask::to_index: too wide");
    std::uint64_t v = 0;
    for (Index i = 0; i < size(); ++i)
      if (test(i)) v |= (std::uint64_t{1} << i);
    return v;
  }
  std::string to_string() const {
    std::string s(static_cast<std::size_t>(size()), '0');
    for (Index i = 0; i < size(); ++i)
      if (test(i)) s[static_cast<std::size_t>(i)] = '1';
    return s;
  }

 private:
  std::vector<std::uint8_t> bits_;
};

// Entry-wise exact comparison against 0.0: any nonzero entry activates the
// row.  (A squared-norm test would underflow for denormal-scale entries.)
inline ModelMask mask_of(const Matrix& x) {
  ModelMask m(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    bool active = false;
    for (Index j = 0; j < x.cols(); ++j)
      if (x(i, j) != 0.0) {
        active = true;
        break;
      }
    m.set(i, active);
  }
  return m;
}

// Euclidean norm of every row; stableNorm so denormal-scale rows keep a
// positive norm.  The sum of the entries is the (2,1) group norm of x.
inline Vector row_norms(const Matrix& x) {
  Vector r(x.rows());
  for (Index i = 0; i < x.rows(); ++i) r(i) = x.row(i).stableNorm();
  return r;
}

// A point of the stratum S_m: the mask plus the |m| x T matrix of active
// rows.  Inactive rows are exact zeros by construction and are not stored.
class SparseState {
 public:
  SparseState() = default;

  // Builds the state from a mask and the stacked active rows (|m| x T).
  static SparseState embed(const ModelMask& mask, const Matrix& values, Index t) {
    if (t < 1) throw std::invalid_argument("SparseState: t must be >= 1");
    if (values.rows() != mask.count())
      throw std::invalid_argument("SparseState: values rows != mask count");
    if (values.rows() > 0 && values.cols() != t)
      throw std::invalid_argument("SparseState: values cols != t");
    for (Index r = 0; r < values.rows(); ++r) {
      bool nonzero = false;
      for (Index j = 0; j < values.cols(); ++j)
        if (values(r, j) != 0.0) {
          nonzero = true;
          break;
        }
      if (!nonzero) throw std::invalid_argument("SparseState: active row is exactly zero");
    }
    SparseState s;
    s.p_ = mask.size();
    s.t_ = t;
    s.mask_ = mask;
    s.active_ = values.rows() > 0 ? values : Matrix(0, t);
    s.active_rows_idx_ = mask.active_indices();
    return s;
  }

  static SparseState zero(Index p, Index t) {
    return embed(ModelMask(p), Matrix(0, t), t);
  }

  // Compresses a dense P x T matrix; the mask is mask_of(x).
  static SparseState from_dense(const Matrix& x) {
    ModelMask m = mask_of(x);
    Matrix vals(m.count(), x.cols());
    Index r = 0;
    for (Index i = 0; i < x.rows(); ++i)
      if (m.test(i)) vals.row(r++) = x.row(i);
    return embed(m, vals, x.cols());
  }

  Index p() const { return p_; }
  Index t() const { return t_; }
  Index n_active() const { return active_.rows(); }
  const ModelMask& mask() const { return mask_; }
  const Matrix& active() const { return active_; }
  const std::vector<Index>& active_indices() const { return active_rows_idx_; }
  bool is_active(Index i) const { return mask_.test(i); }

  // Dense row i (zero when inactive).
  RowVector row(Index i) const {
    if (mask_.test(i)) return active_.row(rank_of(i));
    return RowVector::Zero(t_);
  }

  Matrix to_dense() const {
    Matrix x = Matrix::Zero(p_, t_);
    for (Index r = 0; r < n_active(); ++r) x.row(active_rows_idx_[static_cast<std::size_t>(r)]) = active_.row(r);
    return x;
  }

  double l21_norm() const {
    double s = 0.0;
    for (Index r = 0; r < active_.rows(); ++r) s += active_.row(r).stableNorm();
    return s;
  }

  double squared_norm() const { return active_.squaredNorm(); }

  bool operator==(const SparseState& o) const {
    return p_ == o.p_ && t_ == o.t_ && mask_ == o.mask_ && active_ == o.active_;
  }

 private:
  Index rank_of(Index i) const {
    Index r = 0;
    for (Index k = 0; k < i; ++k)
      if (mask_.test(k)) ++r;
    return r;
  }

  Index p_ = 0;
  Index t_ = 1;
  ModelMask mask_;
  Matrix active_{0, 1};
  std::vector<Index> active_rows_idx_;
};

}  // namespace stmala
