#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kuq/koopman.hpp"
#include "kuq/polynomial.hpp"

namespace kuq::crtbp {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector6cd = Eigen::Matrix<cplx, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix6cd = Eigen::Matrix<cplx, 6, 6>;

enum class LibrationPoint { kL1, kL2 };

LibrationPoint parse_libration_point(const std::string& name);
std::string to_string(LibrationPoint p);

/// Distance from the libration point to the secondary, in units of the
/// primaries' separation: the root in (0, 1) of the Euler quintic.
double solve_euler_quintic(double mu, LibrationPoint point);

/// Residual of the Euler quintic at gamma.
double euler_quintic_residual(double mu, LibrationPoint point, double gamma);

struct CRTBPParams {
  double mu = 0.0;
  LibrationPoint point = LibrationPoint::kL1;
  double gamma = 0.0;
  int expansion_order = 4;

  /// Solves the quintic for gamma and validates the ranges.
  static CRTBPParams make(double mu, LibrationPoint point, int expansion_order = 4);
  /// +1 for L1, -1 for L2 (the upper/lower sign of the libration formulas).
  double sign() const { return point == LibrationPoint::kL1 ? 1.0 : -1.0; }
  void validate() const;
};

/// c_n for n = 0..N; entries 0 and 1 are unused and set to zero.
std::vector<double> cn_coefficients(const CRTBPParams& params);

/// T_0..T_N in (x, y, z), T_n = rho^n P_n(x / rho), built by the three-term
/// recursion.
std::vector<Polynomial> legendre_recursion_Tn(int N);

/// Truth dynamics in the rotating frame, state (x, y, z, vx, vy, vz).
Vector6d full_rhs(const Vector6d& state, double mu);
/// d full_rhs / d state.
Matrix6d full_jacobian(const Vector6d& state, double mu);
/// C = 2 Omega - v^2.
/// Taylor polynomials of full_rhs(center + delta) in delta, truncated at
/// total degree `order`.
std::vector<Polynomial> taylor_rhs(const Vector6d& center, double mu, int order);
double jacobi_constant(const Vector6d& state, double mu);

/// Physical position of the libration point.
Vector6d libration_point_state(const CRTBPParams& params);

/// Physical -> libration-centred scaled coordinates (x, y, z, vx, vy, vz)
/// with origin at the libration point and unit distance to the secondary.
Vector6d to_libration(const Vector6d& physical, const CRTBPParams& params);
Vector6d from_libration(const Vector6d& libration, const CRTBPParams& params);
/// Jacobian of to_libration (constant).
Matrix6d libration_jacobian(const CRTBPParams& params);

/// Libration-frame dynamics as a degree-N polynomial vector field in
/// (x, y, z, vx, vy, vz).
VectorField polynomial_eom(const CRTBPParams& params, const Domain& domain);
/// Full dynamics expressed in libration coordinates (the reference the
/// polynomial field approximates).
Vector6d libration_full_rhs(const Vector6d& libration, const CRTBPParams& params);

/// Hamiltonian in libration coordinates with pseudo-momenta
/// (x, y, z, px, py, pz).
Polynomial libration_hamiltonian(const CRTBPParams& params);

/// Complex normal-form representation of the libration-point dynamics.
struct NormalFormModel {
  CRTBPParams params;
  double lambda1 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
  std::vector<double> c;
  /// Real symplectic matrix: pseudo-momentum coordinates = S * real normal
  /// coordinates (x', y', z', px', py', pz').
  Matrix6d symplectic;
  /// Full linear map: pseudo-momentum coordinates = to_pseudo * (q1, q2, q3, p1, p2, p3).
  Matrix6cd normal_to_pseudo;
  Matrix6cd pseudo_to_normal;
  /// Hamiltonian in (q1, q2, q3, p1, p2, p3).
  Polynomial hamiltonian;
  /// Hamilton's equations of the normal-form Hamiltonian.
  VectorField eom;

  /// Hamilton's equations in the real symplectic coordinates
  /// (x', y', z', px', py', pz') = S^-1 (pseudo-momentum coordinates), whose
  /// linear part is one saddle and two rotations.
  VectorField real_eom(const Domain& domain) const;
  /// Affine map from physical CRTBP states to the real symplectic
  /// coordinates.
  Matrix6d physical_to_real_normal_matrix() const;
  Vector6d physical_to_real_normal_offset() const;

  Vector6cd to_normal(const Vector6d& libration) const;
  Vector6d from_normal(const Vector6cd& normal, double imag_tol = 1e-8) const;
  /// Affine map from physical CRTBP states to normal coordinates, w = M s + b.
  Eigen::MatrixXcd physical_to_normal_matrix() const;
  Eigen::VectorXcd physical_to_normal_offset() const;
};

/// Builds the normal-form model; the eom is attached to `domain` (box in the
/// normal coordinates).
NormalFormModel hamiltonian_normal_form(const CRTBPParams& params, const Domain& domain);

/// Linear change libration velocities <-> pseudo-momenta.
Matrix6d velocity_to_pseudo();

}  // namespace kuq::crtbp
