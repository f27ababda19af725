#pragma once

#include <algorithm>
#include <complex>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

#include "kuq/flow_map.hpp"
#include "kuq/koopman.hpp"
#include "kuq/legendre.hpp"
#include "kuq/polynomial.hpp"

namespace kuq::test {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

/// dx/dt = M x as polynomial components on `domain`.
inline VectorField linear_field(const Eigen::MatrixXd& M, const Domain& domain) {
  const std::size_t d = static_cast<std::size_t>(M.rows());
  VectorField f{std::vector<Polynomial>(d, Polynomial(d)), domain};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (M(i, j) != 0.0) f.components[i] += Polynomial::variable(d, j) * cplx(M(i, j));
    }
  }
  return f;
}

/// Koopman flow map of a linear system on a symmetric box, identity chart.
inline FlowMap linear_flow_map(const Eigen::MatrixXd& M, double half_width, int max_degree) {
  const auto d = M.rows();
  const Domain dom = Domain::centered(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Constant(d, half_width));
  return FlowMap(KoopmanModel::build(linear_field(M, dom), max_degree), AffineChart::identity(static_cast<std::size_t>(d)));
}

/// Greedy multiset match of two spectra; true when every value pairs up
/// within `tol`.
inline bool same_multiset(std::vector<cplx> a, std::vector<cplx> b, double tol) {
  if (a.size() != b.size()) return false;
  for (const cplx& x : a) {
    auto it = std::min_element(b.begin(), b.end(),
                               [&](const cplx& p, const cplx& q) { return std::abs(p - x) < std::abs(q - x); });
    if (it == b.end() || std::abs(*it - x) > tol) return false;
    b.erase(it);
  }
  return true;
}

inline std::vector<cplx> to_vector(const Eigen::VectorXcd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace kuq::test
