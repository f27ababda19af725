#include "kuq/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include "kuq/errors.hpp"

namespace kuq {

namespace odeint = boost::numeric::odeint;

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ContractViolation("IntegratorConfig: tolerances must be positive");
  if (!(max_step >= 0.0)) throw ContractViolation("IntegratorConfig: max_step must be non-negative");
}

Trajectory rk78_integrate(const OdeRhs& rhs, const Eigen::VectorXd& x0, double t0, const std::vector<double>& times,
                          const IntegratorConfig& config) {
  config.validate();
  using State = std::vector<double>;
  const auto n = x0.size();
  auto system = [&](const State& x, State& dxdt, double t) {
    const Eigen::VectorXd d = rhs(t, Eigen::Map<const Eigen::VectorXd>(x.data(), n));
    if (d.size() != n) throw ContractViolation("rk78_integrate: right-hand side has the wrong size");
    std::copy(d.data(), d.data() + n, dxdt.begin());
  };
  auto stepper = odeint::make_controlled(config.abs_tol, config.rel_tol, odeint::runge_kutta_fehlberg78<State>());

  State x(x0.data(), x0.data() + n);
  double t = t0;
  Trajectory out;
  double dt = 0.0;
  for (double target : times) {
    if (target < t) throw ContractViolation("rk78_integrate: output times must be non-decreasing and >= t0");
    if (dt == 0.0) dt = std::max((target - t) / 16.0, 1e-6);
    while (t < target) {
      double h = std::min(dt, target - t);
      if (config.max_step > 0.0) h = std::min(h, config.max_step);
      const bool last = h == target - t;
      // try_step advances (x, t) on success and always updates h to the
      // suggested next step.
      if (stepper.try_step(system, x, t, h) == odeint::success) {
        if (last) t = target;
      } else if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        std::ostringstream msg;
        msg << "rk78_integrate: step size underflow at t = " << t << " (problem too stiff for the tolerance)";
        throw NumericalError(msg.str());
      }
      dt = h;
      for (double v : x) {
        if (!std::isfinite(v)) throw NumericalError("rk78_integrate: non-finite state");
      }
    }
    out.t.push_back(target);
    out.x.push_back(Eigen::Map<const Eigen::VectorXd>(x.data(), n));
  }
  return out;
}

Eigen::VectorXd rk78_propagate(const OdeRhs& rhs, const Eigen::VectorXd& x0, double t0, double t1,
                               const IntegratorConfig& config) {
  if (t1 == t0) return x0;
  return rk78_integrate(rhs, x0, t0, {t1}, config).x.back();
}

}  // namespace kuq
