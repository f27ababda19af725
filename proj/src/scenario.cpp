#include "kuq/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "kuq/crtbp.hpp"
#include "kuq/errors.hpp"

namespace kuq {

namespace {

constexpr double kArcsecToRad = std::numbers::pi / (180.0 * 3600.0);

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json mat_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) rows.push_back(vec_json(M.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd mat_from(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw InputError("scenario: ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return M;
}

crtbp::CRTBPParams crtbp_params(const Scenario& s, int order) {
  return crtbp::CRTBPParams::make(s.mu, crtbp::parse_libration_point(s.libration_point), order);
}

double horizon(const Scenario& s) {
  double t = s.final_time;
  for (double r : s.report_times) t = std::max(t, r);
  return t;
}

}  // namespace

void Scenario::validate() const {
  if (dynamics != "crtbp" && dynamics != "linear") throw InputError("scenario: dynamics must be 'crtbp' or 'linear'");
  if (dynamics == "crtbp") {
    if (!(mu > 0.0 && mu < 0.5)) throw InputError("scenario: mu must lie in (0, 0.5)");
    crtbp::parse_libration_point(libration_point);
    if (expansion_order < 2) throw InputError("scenario: expansion_order must be >= 2");
    if (initial_mean.size() != 6) throw InputError("scenario: CRTBP initial state must have 6 entries");
  } else {
    if (A.rows() == 0 || A.rows() != A.cols()) throw InputError("scenario: A must be square");
    if (initial_mean.size() != A.rows()) throw InputError("scenario: initial state does not match A");
    if (measurement == "linear" && H.cols() != A.cols()) throw InputError("scenario: H does not match A");
  }
  if (!(initial_sigma > 0.0)) throw InputError("scenario: initial_sigma must be positive");
  if (measurement != "none" && measurement != "az-el" && measurement != "linear") {
    throw InputError("scenario: measurement must be 'none', 'az-el' or 'linear'");
  }
  if (measurement == "az-el" && dynamics != "crtbp") throw InputError("scenario: az-el needs CRTBP dynamics");
  if (measurement != "none") {
    if (!(noise > 0.0)) throw InputError("scenario: measurement noise must be positive");
    if (!(cadence > 0.0) || !(final_time >= cadence)) throw InputError("scenario: need cadence > 0 and final_time >= cadence");
  }
  if (max_degree < 1) throw InputError("scenario: max_degree must be >= 1");
  if (psi < 2 || psi > 4) throw InputError("scenario: psi must be 2, 3 or 4");
  if (!(domain_pad >= 1.0) || !(domain_sigma >= 0.0)) throw InputError("scenario: invalid domain margins");
  for (double t : report_times) {
    if (!(t >= 0.0)) throw InputError("scenario: report times must be non-negative");
  }
  integrator.validate();
}

std::size_t Scenario::state_dim() const { return static_cast<std::size_t>(initial_mean.size()); }

GaussianBelief Scenario::initial_belief() const {
  const auto d = static_cast<Eigen::Index>(state_dim());
  return {initial_mean, initial_sigma * initial_sigma * Eigen::MatrixXd::Identity(d, d)};
}

std::vector<double> Scenario::observation_times() const {
  std::vector<double> t;
  if (!(cadence > 0.0)) return t;
  for (int k = 1;; ++k) {
    const double tk = k * cadence;
    if (tk > final_time * (1.0 + 1e-12)) break;
    t.push_back(tk);
  }
  return t;
}

std::vector<std::string> scenario_presets() {
  return {"earth-moon-L1-halo", "sun-earth-L1-lyapunov", "linear-decay", "linear-oscillator"};
}

Scenario scenario_preset(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "earth-moon-L1-halo") {
    s.mu = 0.012153281419431;
    s.initial_mean.resize(6);
    s.initial_mean << 0.823376807050253, 0.0, 0.001386166961157, 0.0, 0.126366690232230, 0.0;
    s.initial_sigma = 1e-4;
    s.report_times = {0.2, 0.4, 0.6, 0.8, 1.0};
    s.expansion_order = 6;
    s.max_degree = 5;
    s.psi = 4;
  } else if (name == "sun-earth-L1-lyapunov") {
    s.mu = 3.003410642560030e-06;
    s.initial_mean.resize(6);
    s.initial_mean << 0.989826595322, 0.0, 0.0, 0.0, 0.00137295958289, 0.0;
    s.initial_sigma = 1e-4;
    s.cadence = 0.4;
    s.final_time = 6.0;
    s.measurement = "az-el";
    s.noise = 10.0;
    s.expansion_order = 4;
    s.max_degree = 4;
    s.psi = 2;
  } else if (name == "linear-decay") {
    s.dynamics = "linear";
    s.A = -Eigen::MatrixXd::Identity(2, 2);
    s.H = Eigen::MatrixXd::Identity(2, 2);
    s.initial_mean = Eigen::Vector2d(1.0, -0.5);
    s.initial_sigma = 0.1;
    s.report_times = {0.0, 0.5, 1.0, 1.5, 2.0};
    s.cadence = 0.1;
    s.final_time = 5.0;
    s.measurement = "linear";
    s.noise = 0.05;
    s.max_degree = 2;
    s.psi = 4;
    s.domain_sigma = 6.0;
  } else if (name == "linear-oscillator") {
    s.dynamics = "linear";
    s.A.resize(2, 2);
    s.A << 0.0, 1.0, -1.0, -0.1;
    s.H = Eigen::RowVector2d(1.0, 0.0);
    s.initial_mean = Eigen::Vector2d(1.0, 0.0);
    s.initial_sigma = 0.2;
    s.report_times = {0.0, 1.0, 2.0, 3.0};
    s.cadence = 0.2;
    s.final_time = 10.0;
    s.measurement = "linear";
    s.noise = 0.1;
    s.max_degree = 1;
    s.psi = 2;
    s.domain_sigma = 6.0;
  } else {
    throw InputError("unknown scenario preset '" + name + "'");
  }
  return s;
}

nlohmann::json to_json(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["dynamics"] = s.dynamics;
  if (s.dynamics == "crtbp") {
    j["mu"] = s.mu;
    j["libration_point"] = s.libration_point;
    j["expansion_order"] = s.expansion_order;
  } else {
    j["A"] = mat_json(s.A);
    if (s.measurement == "linear") j["H"] = mat_json(s.H);
  }
  j["initial_mean"] = vec_json(s.initial_mean);
  j["initial_sigma"] = s.initial_sigma;
  j["report_times"] = s.report_times;
  j["cadence"] = s.cadence;
  j["final_time"] = s.final_time;
  j["measurement"] = s.measurement;
  j["noise"] = s.noise;
  j["taylor_order"] = s.taylor_order;
  j["max_degree"] = s.max_degree;
  j["psi"] = s.psi;
  j["domain_pad"] = s.domain_pad;
  j["domain_sigma"] = s.domain_sigma;
  j["integrator"] = {{"rel_tol", s.integrator.rel_tol},
                     {"abs_tol", s.integrator.abs_tol},
                     {"max_step", s.integrator.max_step}};
  return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    // A file may start from a preset and override fields.
    Scenario s = j.contains("preset") ? scenario_preset(j.at("preset").get<std::string>()) : Scenario{};
    s.name = j.value("name", s.name);
    s.dynamics = j.value("dynamics", s.dynamics);
    s.mu = j.value("mu", s.mu);
    s.libration_point = j.value("libration_point", s.libration_point);
    s.expansion_order = j.value("expansion_order", s.expansion_order);
    if (j.contains("A")) s.A = mat_from(j.at("A"));
    if (j.contains("H")) s.H = mat_from(j.at("H"));
    if (j.contains("initial_mean")) s.initial_mean = vec_from(j.at("initial_mean"));
    s.initial_sigma = j.value("initial_sigma", s.initial_sigma);
    if (j.contains("report_times")) s.report_times = j.at("report_times").get<std::vector<double>>();
    s.cadence = j.value("cadence", s.cadence);
    s.final_time = j.value("final_time", s.final_time);
    s.measurement = j.value("measurement", s.measurement);
    s.noise = j.value("noise", s.noise);
    s.taylor_order = j.value("taylor_order", s.taylor_order);
    s.max_degree = j.value("max_degree", s.max_degree);
    s.psi = j.value("psi", s.psi);
    s.domain_pad = j.value("domain_pad", s.domain_pad);
    s.domain_sigma = j.value("domain_sigma", s.domain_sigma);
    if (j.contains("integrator")) {
      const auto& ij = j.at("integrator");
      s.integrator.rel_tol = ij.value("rel_tol", s.integrator.rel_tol);
      s.integrator.abs_tol = ij.value("abs_tol", s.integrator.abs_tol);
      s.integrator.max_step = ij.value("max_step", s.integrator.max_step);
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scenario JSON: ") + e.what());
  } catch (const ContractViolation& e) {
    throw InputError(std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::string& name_or_path) {
  for (const auto& p : scenario_presets()) {
    if (p == name_or_path) return scenario_preset(p);
  }
  std::ifstream in(name_or_path);
  if (!in) throw InputError("cannot open scenario '" + name_or_path + "' (not a preset or readable file)");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("scenario '" + name_or_path + "': " + e.what());
  }
  Scenario s = scenario_from_json(j);
  if (s.name.empty()) s.name = std::filesystem::path(name_or_path).stem().string();
  return s;
}

DynamicsModel make_dynamics(const Scenario& s) {
  DynamicsModel d = s.dynamics == "crtbp" ? DynamicsModel::crtbp(s.mu) : DynamicsModel::linear(s.A);
  d.integrator = s.integrator;
  return d;
}

MeasurementModel make_measurement(const Scenario& s) {
  if (s.measurement == "az-el") return MeasurementModel::azimuth_elevation(s.mu, s.noise * kArcsecToRad, s.taylor_order);
  if (s.measurement == "linear") {
    const auto q = s.H.rows();
    return MeasurementModel::linear(s.H, s.noise * s.noise * Eigen::MatrixXd::Identity(q, q));
  }
  throw InputError("scenario '" + s.name + "' has no measurement model");
}

AffineChart make_chart(const Scenario& s) {
  if (s.dynamics == "linear") return AffineChart::identity(s.state_dim());
  const auto nf = crtbp::hamiltonian_normal_form(crtbp_params(s, 2), Domain::unit(6));
  return AffineChart(nf.physical_to_real_normal_matrix(), nf.physical_to_real_normal_offset());
}

Domain make_domain(const Scenario& s, const AffineChart& chart) {
  const DynamicsModel dyn = make_dynamics(s);
  const double tf = horizon(s);
  constexpr int kSamples = 400;
  std::vector<double> times;
  for (int k = 0; k <= kSamples; ++k) times.push_back(tf * k / kSamples);
  const OdeRhs rhs = [&dyn](double, const Eigen::VectorXd& x) { return dyn.rhs(x); };
  std::vector<Eigen::VectorXd> points;
  for (const auto& x : rk78_integrate(rhs, s.initial_mean, 0.0, times, s.integrator).x) points.push_back(chart.to_model(x));
  const Domain box = fit_domain(points, s.domain_pad);
  const GaussianBelief b0 = s.initial_belief();
  const Eigen::VectorXd spread = chart.covariance_to_model(b0.covariance).diagonal().cwiseSqrt();
  return Domain::centered(box.mid(), box.half_width() + s.domain_sigma * spread);
}

VectorField make_vector_field(const Scenario& s, const Domain& domain) {
  if (s.dynamics == "crtbp") {
    return crtbp::hamiltonian_normal_form(crtbp_params(s, s.expansion_order), domain).real_eom(domain);
  }
  const std::size_t d = s.state_dim();
  VectorField f;
  f.domain = domain;
  for (std::size_t r = 0; r < d; ++r) {
    Polynomial p(d);
    for (std::size_t c = 0; c < d; ++c) {
      const double a = s.A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (a != 0.0) p += Polynomial::variable(d, c) * cplx(a);
    }
    f.components.push_back(std::move(p));
  }
  return f;
}

FlowMap build_flow_map(const Scenario& s, std::optional<int> max_degree, std::optional<int> expansion_order) {
  Scenario sc = s;
  if (max_degree) sc.max_degree = *max_degree;
  if (expansion_order) sc.expansion_order = *expansion_order;
  sc.validate();
  const AffineChart chart = make_chart(sc);
  const Domain domain = make_domain(sc, chart);
  return FlowMap(KoopmanModel::build(make_vector_field(sc, domain), sc.max_degree), chart);
}

nlohmann::json to_json(const FlowMap& map) {
  nlohmann::json j;
  j["format"] = "kuq-flow-map";
  j["version"] = 1;
  j["chart"] = {{"M", mat_json(map.chart().matrix())}, {"b", vec_json(map.chart().offset())}};
  j["model"] = to_json(map.model());
  return j;
}

FlowMap flow_map_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "kuq-flow-map") throw InputError("flow map JSON: unknown format");
    if (j.at("version").get<int>() != 1) throw InputError("flow map JSON: unsupported version");
    AffineChart chart(mat_from(j.at("chart").at("M")), vec_from(j.at("chart").at("b")));
    return FlowMap(koopman_model_from_json(j.at("model")), std::move(chart));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("flow map JSON: ") + e.what());
  }
}

FilterProblem make_filter_problem(const Scenario& s, const FlowMap* map) {
  FilterProblem p;
  p.dynamics = make_dynamics(s);
  p.measurement = make_measurement(s);
  p.initial = s.initial_belief();
  p.observation_times = s.observation_times();
  p.map = map;
  p.kof.moments.order_cap = std::max(kDefaultOrderCap, 2 * s.max_degree * s.taylor_order);
  return p;
}

}  // namespace kuq
