#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace kuq {

/// Exponent vector of a monomial x_1^{a_1} ... x_d^{a_d}.
///
/// Storage is inline (no allocation) because multi-indices are the keys of
/// every sparse polynomial and sit on the hot path of products and
/// projections. The dimension is capped at kMaxDim and each exponent at 255.
class MultiIndex {
 public:
  static constexpr std::size_t kMaxDim = 12;
  static constexpr int kMaxExponent = 255;

  MultiIndex() = default;
  explicit MultiIndex(std::size_t dim) : dim_(check_dim(dim)) {}
  MultiIndex(std::initializer_list<int> exps) : MultiIndex(std::span<const int>(exps.begin(), exps.size())) {}
  explicit MultiIndex(std::span<const int> exps) : dim_(check_dim(exps.size())) {
    for (std::size_t i = 0; i < dim_; ++i) set(i, exps[i]);
  }

  /// Unit index e_axis.
  static MultiIndex unit(std::size_t dim, std::size_t axis) {
    MultiIndex m(dim);
    m.set(axis, 1);
    return m;
  }

  std::size_t size() const { return dim_; }
  int operator[](std::size_t i) const { return exps_[i]; }

  void set(std::size_t i, int value) {
    if (value < 0 || value > kMaxExponent) throw std::out_of_range("MultiIndex: exponent out of range");
    total_ += value - exps_[i];
    exps_[i] = static_cast<std::uint8_t>(value);
  }

  int total_degree() const { return total_; }

  std::vector<int> to_vector() const { return {exps_.begin(), exps_.begin() + dim_}; }

  MultiIndex operator+(const MultiIndex& o) const {
    check_same(o);
    MultiIndex r(dim_);
    for (std::size_t i = 0; i < dim_; ++i) r.set(i, exps_[i] + o.exps_[i]);
    return r;
  }

  bool operator==(const MultiIndex& o) const { return dim_ == o.dim_ && exps_ == o.exps_; }

  std::size_t hash() const {
    std::size_t h = dim_;
    for (std::size_t i = 0; i < dim_; ++i) h = h * 131 + exps_[i];
    return h;
  }

 private:
  static std::size_t check_dim(std::size_t d) {
    if (d > kMaxDim) throw std::invalid_argument("MultiIndex: dimension exceeds kMaxDim");
    return d;
  }
  void check_same(const MultiIndex& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("MultiIndex: dimension mismatch");
  }

  std::array<std::uint8_t, kMaxDim> exps_{};
  std::size_t dim_ = 0;
  int total_ = 0;
};

/// Graded order: total degree ascending, then exponent vectors in descending
/// lexicographic order, so that in 2-D the sequence is 1, x, y, x^2, xy, y^2.
struct GradedLexLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const {
    if (a.total_degree() != b.total_degree()) return a.total_degree() < b.total_degree();
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] != b[i]) return a[i] > b[i];
    }
    return a.size() < b.size();
  }
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& m) const { return m.hash(); }
};

/// All multi-indices of dimension `dim` with total degree <= max_degree, in
/// GradedLexLess order. Count is C(dim + max_degree, dim).
std::vector<MultiIndex> graded_indices(std::size_t dim, int max_degree);

/// Number of multi-indices of dimension `dim` and total degree <= `degree`.
std::size_t count_up_to_degree(std::size_t dim, int degree);

}  // namespace kuq
