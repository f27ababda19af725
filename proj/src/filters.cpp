#include "kuq/filters.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "kuq/crtbp.hpp"
#include "kuq/errors.hpp"

namespace kuq {

Eigen::VectorXd DynamicsModel::propagate(const Eigen::VectorXd& x, double dt) const {
  if (dt == 0.0) return x;
  return rk78_propagate([this](double, const Eigen::VectorXd& s) { return rhs(s); }, x, 0.0, dt, integrator);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> DynamicsModel::propagate_with_stm(const Eigen::VectorXd& x,
                                                                              double dt) const {
  const auto n = static_cast<Eigen::Index>(dim);
  if (dt == 0.0) return {x, Eigen::MatrixXd::Identity(n, n)};
  Eigen::VectorXd aug(n + n * n);
  aug.head(n) = x;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  aug.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(I.data(), n * n);
  auto f = [this, n](double, const Eigen::VectorXd& s) {
    Eigen::VectorXd d(s.size());
    const Eigen::VectorXd xs = s.head(n);
    d.head(n) = rhs(xs);
    const Eigen::Map<const Eigen::MatrixXd> Phi(s.data() + n, n, n);
    const Eigen::MatrixXd dPhi = jacobian(xs) * Phi;
    d.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(dPhi.data(), n * n);
    return d;
  };
  const Eigen::VectorXd end = rk78_propagate(f, aug, 0.0, dt, integrator);
  return {end.head(n), Eigen::Map<const Eigen::MatrixXd>(end.data() + n, n, n)};
}

DynamicsModel DynamicsModel::linear(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw ContractViolation("DynamicsModel::linear: matrix must be square");
  DynamicsModel d;
  d.dim = static_cast<std::size_t>(M.rows());
  d.rhs = [M](const Eigen::VectorXd& x) -> Eigen::VectorXd { return M * x; };
  d.jacobian = [M](const Eigen::VectorXd&) -> Eigen::MatrixXd { return M; };
  return d;
}

DynamicsModel DynamicsModel::crtbp(double mu) {
  DynamicsModel d;
  d.dim = 6;
  d.rhs = [mu](const Eigen::VectorXd& x) -> Eigen::VectorXd { return crtbp::full_rhs(x, mu); };
  d.jacobian = [mu](const Eigen::VectorXd& x) -> Eigen::MatrixXd { return crtbp::full_jacobian(x, mu); };
  return d;
}

namespace {

Eigen::VectorXd nan_vector(std::size_t q) {
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(q), std::numeric_limits<double>::quiet_NaN());
}

Eigen::MatrixXd solve_gain(const Eigen::MatrixXd& Pxy, const Eigen::MatrixXd& S) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().cwiseAbs().maxCoeff()) {
    throw NumericalError("filter update: innovation covariance is singular");
  }
  return ldlt.solve(Pxy.transpose()).transpose();
}

double observation_dt(const FilterState& state, const Observation& obs) {
  if (obs.t < state.t) throw ContractViolation("filter step: observation precedes the current epoch");
  return obs.t - state.t;
}

}  // namespace

StepResult ekf_step(const FilterState& state, const DynamicsModel& dyn, const MeasurementModel& meas,
                    const Observation& obs) {
  const auto [xm, Phi] = dyn.propagate_with_stm(state.x, observation_dt(state, obs));
  const Eigen::MatrixXd Pm = condition_covariance(Phi * state.P * Phi.transpose());
  StepResult out{{obs.t, xm, Pm}, nan_vector(meas.size())};
  if (obs.y.size() == 0) return out;
  const Eigen::MatrixXd H = meas.jacobian(xm);
  const Eigen::MatrixXd S = H * Pm * H.transpose() + meas.R;
  const Eigen::MatrixXd K = solve_gain(Pm * H.transpose(), S);
  out.innovation = obs.y - meas.h(xm);
  out.state.x = xm + K * out.innovation;
  out.state.P = condition_covariance(Pm - K * S * K.transpose(), Pm.trace());
  return out;
}

StepResult ikf_step(const FilterState& state, const DynamicsModel& dyn, const MeasurementModel& meas,
                    const Observation& obs, const IkfConfig& config) {
  if (config.iterations < 1) throw ContractViolation("ikf_step: at least one iteration is required");
  const auto [xm, Phi] = dyn.propagate_with_stm(state.x, observation_dt(state, obs));
  const Eigen::MatrixXd Pm = condition_covariance(Phi * state.P * Phi.transpose());
  StepResult out{{obs.t, xm, Pm}, nan_vector(meas.size())};
  if (obs.y.size() == 0) return out;
  out.innovation = obs.y - meas.h(xm);
  Eigen::VectorXd xi = xm;
  Eigen::MatrixXd K, S;
  for (int it = 0; it < config.iterations; ++it) {
    const Eigen::MatrixXd H = meas.jacobian(xi);
    S = H * Pm * H.transpose() + meas.R;
    K = solve_gain(Pm * H.transpose(), S);
    const Eigen::VectorXd next = xm + K * (obs.y - meas.h(xi) - H * (xm - xi));
    const double step = (next - xi).norm();
    xi = next;
    if (step <= config.step_tol * std::max(1.0, xi.norm())) break;
  }
  out.state.x = xi;
  out.state.P = condition_covariance(Pm - K * S * K.transpose(), Pm.trace());
  return out;
}

StepResult ukf_step(const FilterState& state, const DynamicsModel& dyn, const MeasurementModel& meas,
                    const Observation& obs, const UkfConfig& config) {
  const double dt = observation_dt(state, obs);
  const auto n = state.x.size();
  const double lambda = config.alpha * config.alpha * (static_cast<double>(n) + config.kappa) - static_cast<double>(n);
  const double spread = static_cast<double>(n) + lambda;
  if (!(spread > 0.0)) throw ContractViolation("ukf_step: n + lambda must be positive");
  const double w0c = lambda / spread + 1.0 - config.alpha * config.alpha + config.beta;
  const double wi = 0.5 / spread;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (state.P + state.P.transpose()));
  const Eigen::MatrixXd sqrtP = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const double scale = std::sqrt(spread);

  std::vector<Eigen::VectorXd> chi;
  chi.push_back(dyn.propagate(state.x, dt));
  for (Eigen::Index i = 0; i < n; ++i) chi.push_back(dyn.propagate(state.x + scale * sqrtP.col(i), dt));
  for (Eigen::Index i = 0; i < n; ++i) chi.push_back(dyn.propagate(state.x - scale * sqrtP.col(i), dt));

  // Weighted means are taken relative to the central point; the weights sum
  // to one.
  auto weighted_mean = [&](const std::vector<Eigen::VectorXd>& pts) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(pts[0].size());
    for (std::size_t k = 1; k < pts.size(); ++k) acc += wi * (pts[k] - pts[0]);
    return Eigen::VectorXd(pts[0] + acc);
  };
  auto weighted_cov = [&](const std::vector<Eigen::VectorXd>& a, const Eigen::VectorXd& ma,
                          const std::vector<Eigen::VectorXd>& b, const Eigen::VectorXd& mb) {
    Eigen::MatrixXd C = w0c * (a[0] - ma) * (b[0] - mb).transpose();
    for (std::size_t k = 1; k < a.size(); ++k) C += wi * (a[k] - ma) * (b[k] - mb).transpose();
    return C;
  };

  const Eigen::VectorXd xm = weighted_mean(chi);
  const Eigen::MatrixXd Pm = condition_covariance(weighted_cov(chi, xm, chi, xm));
  StepResult out{{obs.t, xm, Pm}, nan_vector(meas.size())};
  if (obs.y.size() == 0) return out;

  std::vector<Eigen::VectorXd> ys;
  for (const auto& c : chi) ys.push_back(meas.h(c));
  const Eigen::VectorXd ym = weighted_mean(ys);
  const Eigen::MatrixXd S = weighted_cov(ys, ym, ys, ym) + meas.R;
  const Eigen::MatrixXd Pxy = weighted_cov(chi, xm, ys, ym);
  const Eigen::MatrixXd K = solve_gain(Pxy, S);
  out.innovation = obs.y - ym;
  out.state.x = xm + K * out.innovation;
  out.state.P = condition_covariance(Pm - K * S * K.transpose(), Pm.trace());
  return out;
}

FilterState kalman_step(const FilterState& state, const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                        const Eigen::MatrixXd& R, const Eigen::VectorXd& y, double t) {
  const Eigen::VectorXd xm = F * state.x;
  const Eigen::MatrixXd Pm = F * state.P * F.transpose();
  if (y.size() == 0) return {t, xm, Pm};
  const Eigen::MatrixXd S = H * Pm * H.transpose() + R;
  const Eigen::MatrixXd K = Pm * H.transpose() * S.inverse();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(xm.size(), xm.size());
  // Joseph form.
  const Eigen::MatrixXd P = (I - K * H) * Pm * (I - K * H).transpose() + K * R * K.transpose();
  return {t, xm + K * (y - H * xm), 0.5 * (P + P.transpose())};
}

}  // namespace kuq
