#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kuq/koopman.hpp"
#include "kuq/polynomial.hpp"

namespace kuq {

/// Affine change of variables w = M s + b from the reporting ("physical")
/// state s to the coordinates the Koopman model is built in.
class AffineChart {
 public:
  AffineChart() = default;
  AffineChart(Eigen::MatrixXd M, Eigen::VectorXd b);
  static AffineChart identity(std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(b_.size()); }
  const Eigen::MatrixXd& matrix() const { return M_; }
  const Eigen::MatrixXd& inverse_matrix() const { return M_inv_; }
  const Eigen::VectorXd& offset() const { return b_; }

  Eigen::VectorXd to_model(const Eigen::VectorXd& s) const { return M_ * s + b_; }
  Eigen::VectorXd to_physical(const Eigen::VectorXd& w) const { return M_inv_ * (w - b_); }
  /// Covariances transform congruently.
  Eigen::MatrixXd covariance_to_model(const Eigen::MatrixXd& P) const { return M_ * P * M_.transpose(); }
  Eigen::MatrixXd covariance_to_physical(const Eigen::MatrixXd& P) const { return M_inv_ * P * M_inv_.transpose(); }

  /// g(s) -> g(to_physical(w)).
  Polynomial pull_to_model(const Polynomial& g_of_s) const;

 private:
  Eigen::MatrixXd M_;
  Eigen::MatrixXd M_inv_;
  Eigen::VectorXd b_;
};

/// Box around a set of model-coordinate points: bounding box widened by
/// `pad` about its centre, with a floor on every half-width.
Domain fit_domain(const std::vector<Eigen::VectorXd>& points, double pad = 1.3, double min_half_width = 1e-6);

/// A Koopman model seen through a chart: flows of observables of the
/// physical state as polynomials in a physical deviation.
class FlowMap {
 public:
  FlowMap() = default;
  FlowMap(KoopmanModel model, AffineChart chart);

  const KoopmanModel& model() const { return model_; }
  const AffineChart& chart() const { return chart_; }
  std::size_t dim() const { return chart_.dim(); }

  bool contains(const Eigen::VectorXd& s) const;

  /// Observables g(s) (real polynomials in the physical state) projected
  /// onto the model basis.
  ObservableSet observables(const std::vector<Polynomial>& g_of_s) const;

  /// g(s(t)) as real polynomials in delta, where s(0) = center + delta.
  std::vector<Polynomial> shifted(const ObservableSet& obs, double t, const Eigen::VectorXd& center) const;
  /// Same for a precomputed coefficient block A C^-1 exp(Lambda t) C.
  std::vector<Polynomial> shifted(const Eigen::MatrixXcd& flow_coeffs, const Eigen::VectorXd& center) const;
  /// The physical state itself.
  std::vector<Polynomial> shifted_state(double t, const Eigen::VectorXd& center) const;
  const ObservableSet& state_observables() const { return state_obs_; }

  /// Point evaluation of the physical state flow.
  Eigen::VectorXd state_at(const Eigen::VectorXd& s0, double t) const;

 private:
  KoopmanModel model_;
  AffineChart chart_;
  ObservableSet state_obs_;
};

}  // namespace kuq
