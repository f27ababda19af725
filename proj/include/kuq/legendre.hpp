#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "kuq/polynomial.hpp"

namespace kuq {

/// Axis-aligned box [lower, upper] on which the Legendre basis is orthonormal.
class Domain {
 public:
  Domain() = default;
  Domain(Eigen::VectorXd lower, Eigen::VectorXd upper);
  /// [-1, 1]^dim, Legendre's native box.
  static Domain unit(std::size_t dim);
  /// [center - half_width, center + half_width].
  static Domain centered(const Eigen::VectorXd& center, const Eigen::VectorXd& half_width);

  std::size_t dim() const { return static_cast<std::size_t>(lower_.size()); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  Eigen::VectorXd mid() const { return 0.5 * (lower_ + upper_); }
  Eigen::VectorXd half_width() const { return 0.5 * (upper_ - lower_); }
  double volume() const;

  bool contains(const Eigen::VectorXd& x) const;
  /// Complex points: real and imaginary parts must both lie within the box
  /// half-widths around the mid point.
  bool contains(const Eigen::VectorXcd& x) const;

  /// u = (x - mid) / half_width, mapping the box onto [-1, 1]^d.
  Eigen::VectorXd to_unit(const Eigen::VectorXd& x) const;
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;
  /// Rewrites a polynomial in x as a polynomial in u.
  Polynomial to_unit(const Polynomial& p_of_x) const;
  /// Rewrites a polynomial in u as a polynomial in x.
  Polynomial from_unit(const Polynomial& p_of_u) const;

  friend bool operator==(const Domain& a, const Domain& b) {
    return a.lower_ == b.lower_ && a.upper_ == b.upper_;
  }

 private:
  Eigen::VectorXd lower_, upper_;
};

/// Gauss-Legendre nodes and weights on [-1, 1]; exact for degree 2n - 1.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

/// Monomial coefficients of the 1-D normalized Legendre function
/// sqrt((2n+1)/2) P_n(u) on [-1, 1]; entry k is the coefficient of u^k.
std::vector<double> normalized_legendre_1d(int n);

/// Normalized multivariate Legendre function for `index`, affinely mapped
/// onto `domain` and expressed in the domain's physical coordinates.
Polynomial legendre_poly(const MultiIndex& index, const Domain& domain);

enum class IntegrationRoute { kAnalytic, kQuadrature };

/// <f, g> = integral over the domain of f g dx (unit weight, no conjugation).
cplx inner_product(const Polynomial& f, const Polynomial& g, const Domain& domain,
                   IntegrationRoute route = IntegrationRoute::kAnalytic);

/// Integral of f over the domain.
cplx integrate(const Polynomial& f, const Domain& domain, IntegrationRoute route = IntegrationRoute::kAnalytic);

/// Ordered total-degree Legendre basis on a domain.
///
/// Immutable after construction; the monomial expansion of every basis
/// function is precomputed.
class BasisSet {
 public:
  BasisSet() = default;
  BasisSet(int max_degree, Domain domain);

  std::size_t dim() const { return domain_.dim(); }
  int max_degree() const { return max_degree_; }
  std::size_t size() const { return indices_.size(); }
  const Domain& domain() const { return domain_; }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  /// Basis function l as a polynomial in physical coordinates.
  const Polynomial& function(std::size_t l) const { return functions_[l]; }
  /// Basis function l as a polynomial in unit-box coordinates.
  const Polynomial& unit_function(std::size_t l) const { return unit_functions_[l]; }
  /// Position of a multi-index in the ordering, or -1.
  long position(const MultiIndex& index) const;

  /// Coefficients a_l = <f, L_l> for f given in physical coordinates.
  Eigen::VectorXcd project(const Polynomial& f) const;
  /// Same, for f already expressed in unit-box coordinates.
  Eigen::VectorXcd project_unit(const Polynomial& f_of_u) const;
  /// Sum_l a_l L_l in physical coordinates.
  Polynomial reconstruct(const Eigen::VectorXcd& coeffs) const;
  /// Sum_l a_l L_l in unit-box coordinates.
  Polynomial reconstruct_unit(const Eigen::VectorXcd& coeffs) const;
  /// Vector (L_1(x), ..., L_m(x)).
  Eigen::VectorXcd evaluate(const Eigen::VectorXcd& x) const;

 private:
  int max_degree_ = 0;
  Domain domain_;
  std::vector<MultiIndex> indices_;
  std::vector<Polynomial> functions_;
  std::vector<Polynomial> unit_functions_;
  std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> lookup_;
  // moment_table_[n][j] = integral_{-1}^{1} u^n l_j(u) du, j <= n.
  std::vector<std::vector<double>> moment_table_;
};

/// project() as a free function.
inline Eigen::VectorXcd project(const Polynomial& f, const BasisSet& basis) { return basis.project(f); }

}  // namespace kuq
