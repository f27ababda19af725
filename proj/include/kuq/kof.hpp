#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kuq/flow_map.hpp"
#include "kuq/moments.hpp"
#include "kuq/polynomial.hpp"

namespace kuq {

/// y = h(x) + eta, eta ~ N(0, R). `expand` returns the Taylor polynomial of
/// h about a point, in the deviation from that point.
struct MeasurementModel {
  std::size_t state_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> h;
  std::function<std::vector<Polynomial>(const Eigen::VectorXd& center, int order)> expand;
  Eigen::MatrixXd R;
  int taylor_order = 2;

  std::size_t size() const { return static_cast<std::size_t>(R.rows()); }
  void validate() const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

  static MeasurementModel linear(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R);
  /// Azimuth atan(y / (x - 1 + mu)) and elevation asin(z / r) from the
  /// secondary at (1 - mu, 0, 0), in radians.
  static MeasurementModel azimuth_elevation(double mu, double sigma_rad, int taylor_order = 2);
};

struct FilterState {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::MatrixXd P;
};

/// Symmetrizes and clips eigenvalues in [-1e-10 trace, 0) to zero; throws
/// when a more negative eigenvalue remains. `reference_trace` (when larger)
/// replaces trace(P), e.g. the prior trace for a posterior difference.
Eigen::MatrixXd condition_covariance(const Eigen::MatrixXd& P, double reference_trace = 0.0);

struct KofPrediction {
  Eigen::VectorXd x;
  Eigen::MatrixXd P;
  /// State flow polynomials in the deviation at the last re-centring.
  std::vector<Polynomial> flow;
  /// Covariance of that deviation.
  Eigen::MatrixXd delta_covariance;
  /// Expansion point of the state flow.
  Eigen::VectorXd center;
};

KofPrediction predict(const FilterState& state, const FlowMap& map, double dt, const MomentOptions& options = {});
/// Same, with flow coefficients already evaluated for this dt.
KofPrediction predict(const FilterState& state, const FlowMap& map, const Eigen::MatrixXcd& flow_coeffs,
                      const MomentOptions& options = {});

/// h expanded about the flowed centre, projected on the basis and carried
/// back along the flow: polynomials in the deviation at `center`.
std::vector<Polynomial> measurement_polynomial(const MeasurementModel& meas, const FlowMap& map,
                                               const Eigen::VectorXd& center, double dt);

struct KofUpdate {
  FilterState state;
  Eigen::VectorXd y_pred;
  Eigen::VectorXd innovation;
  Eigen::MatrixXd Pyy;
  Eigen::MatrixXd gain;
};

KofUpdate update(const KofPrediction& prior, const std::vector<Polynomial>& meas_polys, const Eigen::VectorXd& y_obs,
                 const Eigen::MatrixXd& R, double t);

struct Observation {
  double t = 0.0;
  /// Empty for prediction-only epochs.
  Eigen::VectorXd y;
};

struct FilterConfig {
  MomentOptions moments;
};

struct FilterStep {
  FilterState state;
  /// NaN-filled when the epoch had no measurement.
  Eigen::VectorXd innovation;
  bool updated = false;
};

/// Alternates predict / update over time-ordered observations. The flow is
/// anchored at the last update; the first step reports the initial state.
std::vector<FilterStep> run_filter(const FlowMap& map, const MeasurementModel& meas, const FilterState& initial,
                                   const std::vector<Observation>& observations, const FilterConfig& config = {});

/// CSV with header "t,y_1,...,y_q"; blank y cells mark prediction-only epochs.
std::vector<Observation> read_observations(std::istream& in);
void write_observations(std::ostream& out, const std::vector<Observation>& obs, std::size_t q);
/// t, x_1..x_d, P_11..P_dd, nu_1..nu_q.
void write_filter_csv(std::ostream& out, const std::vector<FilterStep>& steps, std::size_t q);

}  // namespace kuq
