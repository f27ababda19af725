#pragma once

#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "kuq/integrator.hpp"
#include "kuq/kof.hpp"

namespace kuq {

/// Autonomous dynamics dx/dt = f(x) with its Jacobian, integrated by RK7(8).
struct DynamicsModel {
  std::size_t dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> rhs;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  IntegratorConfig integrator;

  Eigen::VectorXd propagate(const Eigen::VectorXd& x, double dt) const;
  /// State and state transition matrix.
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> propagate_with_stm(const Eigen::VectorXd& x, double dt) const;

  static DynamicsModel linear(const Eigen::MatrixXd& M);
  static DynamicsModel crtbp(double mu);
};

struct StepResult {
  FilterState state;
  /// NaN-filled without a measurement.
  Eigen::VectorXd innovation;
};

/// Linearized covariance propagation and measurement update.
StepResult ekf_step(const FilterState& state, const DynamicsModel& dyn, const MeasurementModel& meas,
                    const Observation& obs);

struct IkfConfig {
  int iterations = 5;
  double step_tol = 1e-10;
};

/// EKF prediction with a Gauss-Newton re-linearized measurement update.
StepResult ikf_step(const FilterState& state, const DynamicsModel& dyn, const MeasurementModel& meas,
                    const Observation& obs, const IkfConfig& config = {});

struct UkfConfig {
  double alpha = 1e-3;
  double beta = 2.0;
  double kappa = 0.0;
};

/// Unscented prediction; the propagated sigma points are reused for the
/// measurement update.
StepResult ukf_step(const FilterState& state, const DynamicsModel& dyn, const MeasurementModel& meas,
                    const Observation& obs, const UkfConfig& config = {});

/// Textbook discrete Kalman filter step for x_{k+1} = F x_k, y = H x + eta.
FilterState kalman_step(const FilterState& state, const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                        const Eigen::MatrixXd& R, const Eigen::VectorXd& y, double t);

}  // namespace kuq
