#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kuq/multi_index.hpp"

namespace kuq {

using cplx = std::complex<double>;

/// Sparse multivariate polynomial with complex coefficients.
///
/// Terms are kept in graded-lex order. Every mutating operation finishes with
/// cleanup(), so no stored coefficient is zero and terms below
/// kDropTolerance * (largest magnitude) are discarded.
class Polynomial {
 public:
  using TermMap = std::map<MultiIndex, cplx, GradedLexLess>;
  static constexpr double kDropTolerance = 1e-14;

  Polynomial() = default;
  explicit Polynomial(std::size_t dim) : dim_(dim) {}

  static Polynomial constant(std::size_t dim, cplx c);
  /// The coordinate function x_axis.
  static Polynomial variable(std::size_t dim, std::size_t axis);
  static Polynomial monomial(const MultiIndex& exponents, cplx c = 1.0);

  std::size_t dim() const { return dim_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  /// Total degree; -1 for the zero polynomial.
  int degree() const;
  cplx coeff(const MultiIndex& exponents) const;
  double max_abs_coeff() const;

  /// Accumulates c into the coefficient of x^exponents without cleanup.
  void add_term(const MultiIndex& exponents, cplx c);
  /// Drops exact zeros and relative dust (see kDropTolerance).
  void cleanup(double rel_tol = kDropTolerance);

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(cplx s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, cplx s) { return a *= s; }
  friend Polynomial operator*(cplx s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  Polynomial operator-() const { return *this * cplx(-1.0); }

  /// d/dx_axis.
  Polynomial differentiate(std::size_t axis) const;
  /// Keeps only terms with total degree <= max_degree.
  Polynomial truncated(int max_degree) const;
  /// Integer power by repeated squaring.
  Polynomial pow(int n) const;

  cplx evaluate(std::span<const cplx> x) const;
  cplx evaluate(std::span<const double> x) const;
  cplx evaluate(const Eigen::VectorXd& x) const { return evaluate(std::span<const double>(x.data(), x.size())); }
  cplx evaluate(const Eigen::VectorXcd& x) const { return evaluate(std::span<const cplx>(x.data(), x.size())); }

  /// Substitutes x_i -> subs[i]; all substitutes share one dimension which
  /// becomes the dimension of the result.
  Polynomial compose(std::span<const Polynomial> subs) const;
  /// Substitutes x = M y + b (M is dim() x n, complex).
  Polynomial compose_affine(const Eigen::MatrixXcd& M, const Eigen::VectorXcd& b) const;

  /// Largest |Im c| relative to the largest |c| (0 for the zero polynomial).
  double imag_residual() const;
  /// Real part of every coefficient. Throws NumericalError when the imaginary
  /// residual exceeds rel_tol.
  Polynomial real_part(double rel_tol = 1e-8) const;

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

 private:
  void check_dim(const Polynomial& o) const;

  std::size_t dim_ = 0;
  TermMap terms_;
};

/// f~(delta) = f(center + delta). Degree is preserved.
Polynomial shift_center(const Polynomial& f, std::span<const double> center);
Polynomial shift_center(const Polynomial& f, std::span<const cplx> center);
inline Polynomial shift_center(const Polynomial& f, const Eigen::VectorXd& center) {
  return shift_center(f, std::span<const double>(center.data(), center.size()));
}

/// Largest coefficient-wise |a - b|.
double max_coeff_diff(const Polynomial& a, const Polynomial& b);

/// {"dim": d, "terms": [{"exp": [...], "re": r, "im": i}, ...]}
nlohmann::json to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j);

}  // namespace kuq
