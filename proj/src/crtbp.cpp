#include "kuq/crtbp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kuq/errors.hpp"
#include "kuq/taylor.hpp"

namespace kuq::crtbp {

LibrationPoint parse_libration_point(const std::string& name) {
  if (name == "L1" || name == "l1") return LibrationPoint::kL1;
  if (name == "L2" || name == "l2") return LibrationPoint::kL2;
  throw InputError("unknown libration point '" + name + "' (expected L1 or L2)");
}

std::string to_string(LibrationPoint p) { return p == LibrationPoint::kL1 ? "L1" : "L2"; }

namespace {

// Quintic and its derivative; s = +1 for L1, -1 for L2.
std::pair<double, double> quintic(double mu, double s, double g) {
  const double f = ((((g - s * (3.0 - mu)) * g + (3.0 - 2.0 * mu)) * g - mu) * g + s * 2.0 * mu) * g - mu;
  const double df = (((5.0 * g - 4.0 * s * (3.0 - mu)) * g + 3.0 * (3.0 - 2.0 * mu)) * g - 2.0 * mu) * g + s * 2.0 * mu;
  return {f, df};
}

}  // namespace

double euler_quintic_residual(double mu, LibrationPoint point, double gamma) {
  return quintic(mu, point == LibrationPoint::kL1 ? 1.0 : -1.0, gamma).first;
}

double solve_euler_quintic(double mu, LibrationPoint point) {
  if (!(mu > 0.0 && mu < 0.5)) throw ContractViolation("solve_euler_quintic: mu must lie in (0, 1/2)");
  const double s = point == LibrationPoint::kL1 ? 1.0 : -1.0;
  double lo = 0.0, hi = 1.0;
  if (!(quintic(mu, s, lo).first < 0.0 && quintic(mu, s, hi).first > 0.0)) {
    throw ContractViolation("solve_euler_quintic: no root bracketed in (0, 1)");
  }
  double g = std::cbrt(mu / 3.0);
  for (int iter = 0; iter < 200; ++iter) {
    const auto [f, df] = quintic(mu, s, g);
    if (f == 0.0) return g;
    if (f < 0.0) lo = g; else hi = g;
    double next = g - f / df;
    // Fall back to bisection whenever Newton leaves the bracket.
    if (!(next > lo && next < hi) || df == 0.0) next = 0.5 * (lo + hi);
    if (std::abs(next - g) <= 1e-17 * std::max(1.0, g)) {
      g = next;
      break;
    }
    g = next;
  }
  return g;
}

void CRTBPParams::validate() const {
  if (!(mu > 0.0 && mu < 0.5)) throw ContractViolation("CRTBPParams: mu must lie in (0, 1/2)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractViolation("CRTBPParams: gamma must lie in (0, 1)");
  if (expansion_order < 2) throw ContractViolation("CRTBPParams: expansion order must be >= 2");
}

CRTBPParams CRTBPParams::make(double mu, LibrationPoint point, int expansion_order) {
  CRTBPParams p;
  p.mu = mu;
  p.point = point;
  p.expansion_order = expansion_order;
  p.gamma = solve_euler_quintic(mu, point);
  p.validate();
  return p;
}

std::vector<double> cn_coefficients(const CRTBPParams& params) {
  params.validate();
  const double mu = params.mu, g = params.gamma, s = params.sign();
  std::vector<double> c(params.expansion_order + 1, 0.0);
  for (int n = 2; n <= params.expansion_order; ++n) {
    const double sn = std::pow(s, n);
    const double alt = (n % 2 == 0) ? 1.0 : -1.0;
    c[n] = (sn * mu + alt * (1.0 - mu) * std::pow(g, n + 1) / std::pow(1.0 - s * g, n + 1)) / (g * g * g);
  }
  return c;
}

std::vector<Polynomial> legendre_recursion_Tn(int N) {
  if (N < 0) throw ContractViolation("legendre_recursion_Tn: N must be non-negative");
  const Polynomial x = Polynomial::variable(3, 0);
  const Polynomial rho2 = x * x + Polynomial::variable(3, 1).pow(2) + Polynomial::variable(3, 2).pow(2);
  std::vector<Polynomial> T;
  T.push_back(Polynomial::constant(3, 1.0));
  if (N >= 1) T.push_back(x);
  for (int n = 2; n <= N; ++n) {
    const double a = (2.0 * n - 1.0) / n;
    const double b = (n - 1.0) / n;
    T.push_back(x * T[n - 1] * cplx(a) - rho2 * T[n - 2] * cplx(b));
  }
  return T;
}

Vector6d full_rhs(const Vector6d& s, double mu) {
  const double x = s(0), y = s(1), z = s(2);
  const double r1 = std::sqrt((x + mu) * (x + mu) + y * y + z * z);
  const double r2 = std::sqrt((x - 1.0 + mu) * (x - 1.0 + mu) + y * y + z * z);
  if (r1 < 1e-8 || r2 < 1e-8) {
    std::ostringstream msg;
    msg << "full_rhs: collision singularity (r1 = " << r1 << ", r2 = " << r2 << ")";
    throw NumericalError(msg.str());
  }
  const double a1 = (1.0 - mu) / (r1 * r1 * r1);
  const double a2 = mu / (r2 * r2 * r2);
  Vector6d d;
  d << s(3), s(4), s(5),
      2.0 * s(4) + x - a1 * (x + mu) - a2 * (x - 1.0 + mu),
      -2.0 * s(3) + y - a1 * y - a2 * y,
      -a1 * z - a2 * z;
  return d;
}

std::vector<Polynomial> taylor_rhs(const Vector6d& c, double mu, int order) {
  if (order < 1) throw ContractViolation("taylor_rhs: order must be >= 1");
  auto v = [&c](std::size_t k) { return Polynomial::variable(6, k) + Polynomial::constant(6, c(static_cast<Eigen::Index>(k))); };
  const Polynomial x = v(0), y = v(1), z = v(2);
  const Polynomial x1 = x + Polynomial::constant(6, mu);
  const Polynomial x2 = x + Polynomial::constant(6, mu - 1.0);
  const Polynomial yz = y * y + z * z;
  const Polynomial r1sq = x1 * x1 + yz;
  const Polynomial r2sq = x2 * x2 + yz;
  const double r1c = r1sq.coeff(MultiIndex(6)).real();
  const double r2c = r2sq.coeff(MultiIndex(6)).real();
  if (r1c < 1e-16 || r2c < 1e-16) throw NumericalError("taylor_rhs: expansion point at a primary");
  const Polynomial a1 = taylor::power(r1sq, -1.5, order) * cplx(1.0 - mu);
  const Polynomial a2 = taylor::power(r2sq, -1.5, order) * cplx(mu);
  const Polynomial a = a1 + a2;
  std::vector<Polynomial> f{v(3), v(4), v(5),
                            v(4) * cplx(2.0) + x - taylor::multiply(a1, x1, order) - taylor::multiply(a2, x2, order),
                            v(3) * cplx(-2.0) + y - taylor::multiply(a, y, order),
                            -taylor::multiply(a, z, order)};
  return f;
}

Matrix6d full_jacobian(const Vector6d& s, double mu) {
  Matrix6d J = Matrix6d::Zero();
  J.topRightCorner<3, 3>() = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
  G(0, 0) = 1.0;
  G(1, 1) = 1.0;
  const Eigen::Vector3d r = s.head<3>();
  for (const auto& [m, at] : {std::pair{1.0 - mu, -mu}, std::pair{mu, 1.0 - mu}}) {
    Eigen::Vector3d d = r;
    d(0) -= at;
    const double n = d.norm();
    if (n < 1e-8) throw NumericalError("full_jacobian: collision singularity");
    G += m * (3.0 * d * d.transpose() / std::pow(n, 5) - Eigen::Matrix3d::Identity() / std::pow(n, 3));
  }
  J.bottomLeftCorner<3, 3>() = G;
  J(3, 4) = 2.0;
  J(4, 3) = -2.0;
  return J;
}

double jacobi_constant(const Vector6d& s, double mu) {
  const double x = s(0), y = s(1), z = s(2);
  const double r1 = std::sqrt((x + mu) * (x + mu) + y * y + z * z);
  const double r2 = std::sqrt((x - 1.0 + mu) * (x - 1.0 + mu) + y * y + z * z);
  const double omega = 0.5 * (x * x + y * y) + (1.0 - mu) / r1 + mu / r2;
  return 2.0 * omega - s.tail<3>().squaredNorm();
}

Vector6d libration_point_state(const CRTBPParams& params) {
  Vector6d p = Vector6d::Zero();
  p(0) = 1.0 - params.mu - params.sign() * params.gamma;
  return p;
}

Vector6d to_libration(const Vector6d& physical, const CRTBPParams& params) {
  return (physical - libration_point_state(params)) / params.gamma;
}

Vector6d from_libration(const Vector6d& libration, const CRTBPParams& params) {
  return libration * params.gamma + libration_point_state(params);
}

Matrix6d libration_jacobian(const CRTBPParams& params) { return Matrix6d::Identity() / params.gamma; }

Vector6d libration_full_rhs(const Vector6d& libration, const CRTBPParams& params) {
  // Time is not rescaled, so the derivative scales like the state.
  return full_rhs(from_libration(libration, params), params.mu) / params.gamma;
}

namespace {

// Potential sum_{n>=2}^N c_n T_n in (x, y, z), embedded in `dim` variables.
Polynomial potential(const CRTBPParams& params, std::size_t dim) {
  const auto c = cn_coefficients(params);
  const auto T = legendre_recursion_Tn(params.expansion_order);
  Polynomial sum(3);
  for (int n = 2; n <= params.expansion_order; ++n) sum += T[n] * cplx(c[n]);
  std::vector<Polynomial> embed;
  for (std::size_t k = 0; k < 3; ++k) embed.push_back(Polynomial::variable(dim, k));
  return sum.compose(embed);
}

}  // namespace

VectorField polynomial_eom(const CRTBPParams& params, const Domain& domain) {
  params.validate();
  if (domain.dim() != 6) throw ContractViolation("polynomial_eom: domain must be 6-dimensional");
  const Polynomial U = potential(params, 6);
  auto v = [](std::size_t k) { return Polynomial::variable(6, k); };
  VectorField f;
  f.domain = domain;
  f.components = {
      v(3),
      v(4),
      v(5),
      v(4) * cplx(2.0) + v(0) + U.differentiate(0),
      v(3) * cplx(-2.0) + v(1) + U.differentiate(1),
      U.differentiate(2),
  };
  return f;
}

Polynomial libration_hamiltonian(const CRTBPParams& params) {
  params.validate();
  auto v = [](std::size_t k) { return Polynomial::variable(6, k); };
  // 1/2 (px^2 + py^2 + pz^2) + y px - x py - sum c_n T_n
  Polynomial H = (v(3) * v(3) + v(4) * v(4) + v(5) * v(5)) * cplx(0.5) + v(1) * v(3) - v(0) * v(4);
  H -= potential(params, 6);
  return H;
}

Matrix6d velocity_to_pseudo() {
  // px = vx - y, py = vy + x, pz = vz
  Matrix6d V = Matrix6d::Identity();
  V(3, 1) = -1.0;
  V(4, 0) = 1.0;
  return V;
}

namespace {

Matrix6d symplectic_form() {
  Matrix6d J = Matrix6d::Zero();
  J.topRightCorner<3, 3>() = Eigen::Matrix3d::Identity();
  J.bottomLeftCorner<3, 3>() = -Eigen::Matrix3d::Identity();
  return J;
}

// Hessian of the quadratic part of the libration Hamiltonian.
Matrix6d quadratic_hessian(double c2) {
  Matrix6d S = Matrix6d::Zero();
  S(0, 0) = -2.0 * c2;  // -c2 x^2
  S(1, 1) = c2;         // +c2/2 y^2
  S(2, 2) = c2;
  S(3, 3) = S(4, 4) = S(5, 5) = 1.0;
  S(1, 3) = S(3, 1) = 1.0;    // y px
  S(0, 4) = S(4, 0) = -1.0;   // -x py
  return S;
}

}  // namespace

VectorField NormalFormModel::real_eom(const Domain& domain) const {
  if (domain.dim() != 6) throw ContractViolation("real_eom: domain must be 6-dimensional");
  const Polynomial H = libration_hamiltonian(params).compose_affine(symplectic.cast<cplx>(), Eigen::VectorXcd::Zero(6));
  VectorField f;
  f.domain = domain;
  f.components.resize(6);
  for (int k = 0; k < 3; ++k) {
    f.components[k] = H.differentiate(k + 3);
    f.components[k + 3] = -H.differentiate(k);
  }
  return f;
}

Matrix6d NormalFormModel::physical_to_real_normal_matrix() const {
  return symplectic.inverse() * velocity_to_pseudo() * libration_jacobian(params);
}

Vector6d NormalFormModel::physical_to_real_normal_offset() const {
  return -(physical_to_real_normal_matrix() * libration_point_state(params));
}

Vector6cd NormalFormModel::to_normal(const Vector6d& libration) const {
  return pseudo_to_normal * (velocity_to_pseudo() * libration).cast<cplx>();
}

Vector6d NormalFormModel::from_normal(const Vector6cd& normal, double imag_tol) const {
  const Vector6cd pseudo = normal_to_pseudo * normal;
  const double scale = std::max(1e-300, pseudo.cwiseAbs().maxCoeff());
  if (pseudo.imag().cwiseAbs().maxCoeff() > imag_tol * scale) {
    throw NumericalError("from_normal: normal-form point does not map to a real state");
  }
  return velocity_to_pseudo().inverse() * pseudo.real();
}

Eigen::MatrixXcd NormalFormModel::physical_to_normal_matrix() const {
  return pseudo_to_normal * (velocity_to_pseudo() * libration_jacobian(params)).cast<cplx>();
}

Eigen::VectorXcd NormalFormModel::physical_to_normal_offset() const {
  return -(physical_to_normal_matrix() * libration_point_state(params).cast<cplx>());
}

NormalFormModel hamiltonian_normal_form(const CRTBPParams& params, const Domain& domain) {
  params.validate();
  if (domain.dim() != 6) throw ContractViolation("hamiltonian_normal_form: domain must be 6-dimensional");
  NormalFormModel nf;
  nf.params = params;
  nf.c = cn_coefficients(params);
  const double c2 = nf.c[2];
  const double disc = 9.0 * c2 * c2 - 8.0 * c2;
  if (disc < 0.0) throw NumericalError("hamiltonian_normal_form: invalid regime, 9 c2^2 - 8 c2 < 0");
  // The two roots s^2 of the planar characteristic polynomial.
  const double s_minus = (c2 - 2.0 - std::sqrt(disc)) / 2.0;
  const double s_plus = (c2 - 2.0 + std::sqrt(disc)) / 2.0;
  if (!(s_plus > 0.0 && s_minus < 0.0)) throw NumericalError("hamiltonian_normal_form: libration point is not of saddle x centre x centre type");
  nf.lambda1 = std::sqrt(s_plus);
  nf.omega1 = std::sqrt(-s_minus);
  nf.omega2 = std::sqrt(c2);

  const Matrix6d J = symplectic_form();
  const Matrix6d A = J * quadratic_hessian(c2);
  Eigen::EigenSolver<Matrix6d> es(A);
  const Eigen::VectorXcd ev = es.eigenvalues();
  const Eigen::MatrixXcd V = es.eigenvectors();

  auto find = [&](cplx target) {
    Eigen::Index best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      const double d = std::abs(ev(i) - target);
      if (d < dist) {
        dist = d;
        best = i;
      }
    }
    if (dist > 1e-8 * std::max(1.0, std::abs(target))) throw NumericalError("hamiltonian_normal_form: eigenvalue not found");
    return best;
  };

  Matrix6d S = Matrix6d::Zero();
  // Saddle: q1 along +lambda1, p1 along -lambda1 with a^T J b = 1.
  {
    Eigen::Matrix<double, 6, 1> a = V.col(find(nf.lambda1)).real();
    Eigen::Matrix<double, 6, 1> b = V.col(find(-nf.lambda1)).real();
    a /= a.norm();
    b /= b.norm();
    const double w = a.dot(J * b);
    if (std::abs(w) < 1e-12) throw NumericalError("hamiltonian_normal_form: degenerate saddle plane");
    b /= w;
    // Balance the scaling between the two directions.
    const double r = std::sqrt(b.norm() / a.norm());
    a *= r;
    b /= r;
    S.col(0) = a;
    S.col(3) = b;
  }
  // Centres: u + i v is the +i omega eigenvector with u^T J v = 1.
  auto centre = [&](double omega, int col_q, int col_p, int zero_component) {
    Eigen::VectorXcd w = V.col(find(cplx(0.0, omega)));
    // Fix the phase so the chosen component of u vanishes.
    const cplx wc = w(zero_component);
    if (std::abs(wc) > 1e-14) w *= cplx(0.0, 1.0) * std::conj(wc) / std::abs(wc);
    Eigen::Matrix<double, 6, 1> u = w.real();
    Eigen::Matrix<double, 6, 1> v = w.imag();
    double s = u.dot(J * v);
    if (s < 0.0) {
      throw NumericalError("hamiltonian_normal_form: centre plane has negative Krein signature");
    }
    u /= std::sqrt(s);
    v /= std::sqrt(s);
    S.col(col_q) = u;
    S.col(col_p) = v;
  };
  centre(nf.omega1, 1, 4, 0);
  centre(nf.omega2, 2, 5, 2);
  nf.symplectic = S;

  const double sym_err = (S.transpose() * J * S - J).cwiseAbs().maxCoeff();
  if (sym_err > 1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff() * S.cwiseAbs().maxCoeff())) {
    std::ostringstream msg;
    msg << "hamiltonian_normal_form: symplectic check failed (" << sym_err << ")";
    throw NumericalError(msg.str());
  }

  // Complexification: x' = q1, px' = p1, y' = (q2 + i p2)/sqrt2,
  // py' = (i q2 + p2)/sqrt2, and likewise for (z', pz').
  const double r2 = 1.0 / std::numbers::sqrt2;
  const cplx I(0.0, 1.0);
  Matrix6cd Kc = Matrix6cd::Zero();
  Kc(0, 0) = 1.0;
  Kc(3, 3) = 1.0;
  for (int k : {1, 2}) {
    Kc(k, k) = r2;
    Kc(k, k + 3) = I * r2;
    Kc(k + 3, k) = I * r2;
    Kc(k + 3, k + 3) = r2;
  }
  nf.normal_to_pseudo = S.cast<cplx>() * Kc;
  nf.pseudo_to_normal = nf.normal_to_pseudo.inverse();

  // Hamiltonian in normal coordinates and Hamilton's equations.
  const Polynomial H = libration_hamiltonian(params);
  nf.hamiltonian = H.compose_affine(nf.normal_to_pseudo, Eigen::VectorXcd::Zero(6));
  nf.eom.domain = domain;
  nf.eom.components.resize(6);
  for (int k = 0; k < 3; ++k) {
    nf.eom.components[k] = nf.hamiltonian.differentiate(k + 3);
    nf.eom.components[k + 3] = -nf.hamiltonian.differentiate(k);
  }
  return nf;
}

}  // namespace kuq::crtbp
