#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace kuq {

struct IntegratorConfig {
  double rel_tol = 1e-13;
  double abs_tol = 1e-15;
  /// Upper bound on the step size; 0 means unbounded.
  double max_step = 0.0;

  void validate() const;
};

using OdeRhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x)>;

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
};

/// Adaptive Runge-Kutta-Fehlberg 7(8) integration from t0 to each of the
/// (non-decreasing) output times; the step is shortened to land on them.
Trajectory rk78_integrate(const OdeRhs& rhs, const Eigen::VectorXd& x0, double t0, const std::vector<double>& times,
                          const IntegratorConfig& config = {});

/// State at t1 only.
Eigen::VectorXd rk78_propagate(const OdeRhs& rhs, const Eigen::VectorXd& x0, double t0, double t1,
                               const IntegratorConfig& config = {});

}  // namespace kuq
