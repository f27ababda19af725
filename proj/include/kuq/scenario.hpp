#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kuq/filters.hpp"
#include "kuq/flow_map.hpp"
#include "kuq/kof.hpp"
#include "kuq/montecarlo.hpp"

namespace kuq {

/// A complete experiment description: dynamics, initial belief, measurement
/// schedule and the Koopman model settings. All times are nondimensional.
struct Scenario {
  std::string name;
  /// "crtbp" or "linear".
  std::string dynamics = "crtbp";

  // crtbp
  double mu = 0.0;
  std::string libration_point = "L1";
  int expansion_order = 4;

  // linear: dx/dt = A x, y = H x + eta
  Eigen::MatrixXd A;
  Eigen::MatrixXd H;

  Eigen::VectorXd initial_mean;
  double initial_sigma = 1e-4;

  /// Propagation epochs (moment reports).
  std::vector<double> report_times;
  /// Filter observation cadence and horizon.
  double cadence = 0.0;
  double final_time = 0.0;

  /// "none", "az-el" (noise in arcsec) or "linear" (noise as a std).
  std::string measurement = "none";
  double noise = 0.0;
  int taylor_order = 2;

  int max_degree = 4;
  int psi = 4;
  /// The model box is the bounding box of the nominal trajectory, widened by
  /// `domain_pad`, plus `domain_sigma` initial standard deviations.
  double domain_pad = 1.3;
  double domain_sigma = 5.0;

  IntegratorConfig integrator;

  void validate() const;
  std::size_t state_dim() const;
  GaussianBelief initial_belief() const;
  /// cadence, 2 cadence, ... up to final_time.
  std::vector<double> observation_times() const;
};

/// Names accepted by `scenario_preset`.
std::vector<std::string> scenario_presets();
Scenario scenario_preset(const std::string& name);

nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
/// Preset name or path to a JSON scenario file.
Scenario load_scenario(const std::string& name_or_path);

DynamicsModel make_dynamics(const Scenario& s);
MeasurementModel make_measurement(const Scenario& s);

/// Chart from physical states to the coordinates the Koopman model is built
/// in: the real symplectic normal form of the libration point for the CRTBP
/// and the identity for linear scenarios.
AffineChart make_chart(const Scenario& s);
/// Model-coordinate box covering the nominal trajectory and its spread.
Domain make_domain(const Scenario& s, const AffineChart& chart);
/// Polynomial vector field in chart coordinates on `domain`.
VectorField make_vector_field(const Scenario& s, const Domain& domain);

/// Builds the Koopman model of a scenario (optionally overriding the basis
/// degree and the CRTBP expansion order).
FlowMap build_flow_map(const Scenario& s, std::optional<int> max_degree = std::nullopt,
                       std::optional<int> expansion_order = std::nullopt);

/// Serialized flow map: chart plus the Koopman model artifact.
nlohmann::json to_json(const FlowMap& map);
FlowMap flow_map_from_json(const nlohmann::json& j);

/// Filter Monte Carlo inputs for a scenario; `map` may be null when the KOF
/// is not used.
FilterProblem make_filter_problem(const Scenario& s, const FlowMap* map);

}  // namespace kuq
