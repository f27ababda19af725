#include "kuq/kof.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kuq/errors.hpp"
#include "kuq/taylor.hpp"

namespace kuq {

void MeasurementModel::validate() const {
  if (!h || !expand) throw ContractViolation("MeasurementModel: h and its expansion must be set");
  if (R.rows() == 0 || R.rows() != R.cols()) throw ContractViolation("MeasurementModel: R must be square and non-empty");
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * R.cwiseAbs().maxCoeff()) {
    throw ContractViolation("MeasurementModel: R is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) throw ContractViolation("MeasurementModel: R is not positive definite");
  if (taylor_order < 1) throw ContractViolation("MeasurementModel: taylor order must be >= 1");
}

Eigen::MatrixXd MeasurementModel::jacobian(const Eigen::VectorXd& x) const {
  const auto polys = expand(x, 1);
  Eigen::MatrixXd H(static_cast<Eigen::Index>(polys.size()), x.size());
  for (std::size_t r = 0; r < polys.size(); ++r) {
    for (std::size_t c = 0; c < state_dim; ++c) H(r, c) = polys[r].coeff(MultiIndex::unit(state_dim, c)).real();
  }
  return H;
}

MeasurementModel MeasurementModel::linear(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R) {
  if (H.rows() != R.rows()) throw ContractViolation("MeasurementModel::linear: H and R disagree on q");
  MeasurementModel m;
  m.state_dim = static_cast<std::size_t>(H.cols());
  m.R = R;
  m.taylor_order = 1;
  m.h = [H](const Eigen::VectorXd& x) -> Eigen::VectorXd { return H * x; };
  m.expand = [H](const Eigen::VectorXd& c, int) {
    const std::size_t d = static_cast<std::size_t>(H.cols());
    const Eigen::VectorXd y0 = H * c;
    std::vector<Polynomial> out;
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
      Polynomial p = Polynomial::constant(d, y0(r));
      for (std::size_t k = 0; k < d; ++k) {
        if (H(r, k) != 0.0) p += Polynomial::variable(d, k) * cplx(H(r, k));
      }
      out.push_back(std::move(p));
    }
    return out;
  };
  return m;
}

MeasurementModel MeasurementModel::azimuth_elevation(double mu, double sigma_rad, int taylor_order) {
  if (!(sigma_rad > 0.0)) throw ContractViolation("azimuth_elevation: noise level must be positive");
  MeasurementModel m;
  m.state_dim = 6;
  m.R = Eigen::Matrix2d::Identity() * sigma_rad * sigma_rad;
  m.taylor_order = taylor_order;
  m.h = [mu](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    const double X = s(0) - 1.0 + mu;
    const double r = std::sqrt(X * X + s(1) * s(1) + s(2) * s(2));
    if (X == 0.0 || r == 0.0) throw DomainViolation("azimuth_elevation: measurement undefined at the secondary");
    return Eigen::Vector2d(std::atan(s(1) / X), std::asin(s(2) / r));
  };
  m.expand = [mu](const Eigen::VectorXd& c, int order) {
    auto v = [](std::size_t k) { return Polynomial::variable(6, k); };
    const Polynomial X = v(0) + Polynomial::constant(6, c(0) - 1.0 + mu);
    const Polynomial Y = v(1) + Polynomial::constant(6, c(1));
    const Polynomial Z = v(2) + Polynomial::constant(6, c(2));
    const Polynomial az = taylor::atan(taylor::multiply(Y, taylor::reciprocal(X, order), order), order);
    const Polynomial r = taylor::sqrt((X * X + Y * Y + Z * Z).truncated(order), order);
    const Polynomial el = taylor::asin(taylor::multiply(Z, taylor::reciprocal(r, order), order), order);
    return std::vector<Polynomial>{az, el};
  };
  return m;
}

Eigen::MatrixXd condition_covariance(const Eigen::MatrixXd& P, double reference_trace) {
  const Eigen::MatrixXd S = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double floor = -1e-10 * std::max(std::abs(S.trace()), std::abs(reference_trace));
  if (es.eigenvalues().minCoeff() >= 0.0) return S;
  if (es.eigenvalues().minCoeff() < floor) {
    std::ostringstream msg;
    msg << "covariance lost positive semi-definiteness (min eigenvalue " << es.eigenvalues().minCoeff() << ")";
    throw NumericalError(msg.str());
  }
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

KofPrediction predict(const FilterState& state, const FlowMap& map, const Eigen::MatrixXcd& flow_coeffs,
                      const MomentOptions& options) {
  KofPrediction out;
  out.center = state.x;
  out.delta_covariance = state.P;
  out.flow = map.shifted(flow_coeffs, state.x);
  const auto m = propagate_moments(out.flow, GaussianBelief{state.x, state.P}, 2, options);
  out.x = m.mean;
  out.P = condition_covariance(m.covariance);
  return out;
}

KofPrediction predict(const FilterState& state, const FlowMap& map, double dt, const MomentOptions& options) {
  return predict(state, map, map.model().flow_coefficients(map.state_observables(), dt), options);
}

std::vector<Polynomial> measurement_polynomial(const MeasurementModel& meas, const FlowMap& map,
                                               const Eigen::VectorXd& center, double dt) {
  if (meas.taylor_order < 1) throw ContractViolation("measurement_polynomial: taylor order must be >= 1");
  const Eigen::VectorXd xbar = map.state_at(center, dt);
  std::vector<Polynomial> g;
  try {
    for (const auto& p : meas.expand(xbar, meas.taylor_order)) g.push_back(shift_center(p, Eigen::VectorXd(-xbar)));
  } catch (const DomainViolation& e) {
    throw DomainViolation(std::string("measurement_polynomial: cannot expand h at the predicted centre: ") + e.what());
  }
  return map.shifted(map.observables(g), dt, center);
}

KofUpdate update(const KofPrediction& prior, const std::vector<Polynomial>& meas_polys, const Eigen::VectorXd& y_obs,
                 const Eigen::MatrixXd& R, double t) {
  const auto q = static_cast<Eigen::Index>(meas_polys.size());
  const auto d = static_cast<Eigen::Index>(prior.flow.size());
  if (y_obs.size() != q || R.rows() != q || R.cols() != q) throw ContractViolation("update: measurement size mismatch");

  const GaussianExpectation ge(prior.delta_covariance);
  std::vector<GaussianExpectation::HermiteCoeffs> hx, hy;
  for (const auto& p : prior.flow) hx.push_back(ge.hermite(p));
  for (const auto& p : meas_polys) hy.push_back(ge.hermite(p));

  KofUpdate out;
  out.y_pred.resize(q);
  for (Eigen::Index j = 0; j < q; ++j) out.y_pred(j) = GaussianExpectation::mean(hy[j]);
  out.Pyy.resize(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = i; j < q; ++j) {
      out.Pyy(i, j) = out.Pyy(j, i) = GaussianExpectation::covariance(hy[i], hy[j]);
    }
  }
  out.Pyy += R;
  Eigen::MatrixXd Pxy(d, q);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) Pxy(i, j) = GaussianExpectation::covariance(hx[i], hy[j]);
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(out.Pyy);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().cwiseAbs().maxCoeff()) {
    throw NumericalError("update: innovation covariance is singular");
  }
  out.gain = ldlt.solve(Pxy.transpose()).transpose();
  out.innovation = y_obs - out.y_pred;
  out.state.t = t;
  out.state.x = prior.x + out.gain * out.innovation;
  out.state.P = condition_covariance(prior.P - out.gain * out.Pyy * out.gain.transpose(), prior.P.trace());
  return out;
}

std::vector<FilterStep> run_filter(const FlowMap& map, const MeasurementModel& meas, const FilterState& initial,
                                   const std::vector<Observation>& observations, const FilterConfig& config) {
  meas.validate();
  const auto q = static_cast<Eigen::Index>(meas.size());
  std::vector<FilterStep> steps;
  steps.push_back({initial, Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN()), false});
  FilterState anchor = initial;
  std::map<double, Eigen::MatrixXcd> cache;
  double last_t = initial.t;
  for (const auto& obs : observations) {
    if (obs.t < last_t) throw ContractViolation("run_filter: observations are not time-ordered");
    last_t = obs.t;
    const double dt = obs.t - anchor.t;
    try {
      auto it = cache.find(dt);
      if (it == cache.end()) it = cache.emplace(dt, map.model().flow_coefficients(map.state_observables(), dt)).first;
      const KofPrediction prior = predict(anchor, map, it->second, config.moments);
      FilterStep step;
      step.innovation = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
      if (obs.y.size() == 0) {
        step.state = {obs.t, prior.x, prior.P};
      } else {
        if (obs.y.size() != q) throw InputError("run_filter: observation has the wrong number of channels");
        const auto ypoly = measurement_polynomial(meas, map, anchor.x, dt);
        const KofUpdate u = update(prior, ypoly, obs.y, meas.R, obs.t);
        step.state = u.state;
        step.innovation = u.innovation;
        step.updated = true;
        anchor = u.state;
      }
      steps.push_back(std::move(step));
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "run_filter: epoch t = " << obs.t << ": " << e.what();
      if (dynamic_cast<const DomainViolation*>(&e)) throw DomainViolation(msg.str());
      throw NumericalError(msg.str());
    }
  }
  return steps;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (!blank(s.substr(pos))) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InputError("observations: line " + std::to_string(line_no) + ": cannot parse '" + s + "'");
  }
}

}  // namespace

std::vector<Observation> read_observations(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("observations: empty file");
  const auto header = split_csv(line);
  if (header.empty() || header[0].rfind("t", 0) != 0) throw InputError("observations: header must start with 't'");
  const std::size_t q = header.size() - 1;
  std::vector<Observation> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != q + 1) throw InputError("observations: line " + std::to_string(line_no) + ": wrong column count");
    Observation o;
    o.t = parse_double(cells[0], line_no);
    std::size_t filled = 0;
    for (std::size_t k = 1; k <= q; ++k) filled += blank(cells[k]) ? 0 : 1;
    if (filled != 0 && filled != q) throw InputError("observations: line " + std::to_string(line_no) + ": partial measurement");
    if (filled == q) {
      o.y.resize(static_cast<Eigen::Index>(q));
      for (std::size_t k = 1; k <= q; ++k) o.y(k - 1) = parse_double(cells[k], line_no);
    }
    if (!out.empty() && o.t < out.back().t) throw InputError("observations: times are not non-decreasing");
    out.push_back(std::move(o));
  }
  return out;
}

void write_observations(std::ostream& out, const std::vector<Observation>& obs, std::size_t q) {
  out << "t";
  for (std::size_t k = 1; k <= q; ++k) out << ",y_" << k;
  out << "\n";
  out.precision(17);
  for (const auto& o : obs) {
    out << o.t;
    for (std::size_t k = 0; k < q; ++k) {
      out << ",";
      if (o.y.size() != 0) out << o.y(static_cast<Eigen::Index>(k));
    }
    out << "\n";
  }
}

void write_filter_csv(std::ostream& out, const std::vector<FilterStep>& steps, std::size_t q) {
  const std::size_t d = steps.empty() ? 0 : static_cast<std::size_t>(steps.front().state.x.size());
  out << "t";
  for (std::size_t k = 1; k <= d; ++k) out << ",x_" << k;
  for (std::size_t k = 1; k <= d; ++k) out << ",P_" << k << k;
  for (std::size_t k = 1; k <= q; ++k) out << ",nu_" << k;
  out << "\n";
  out.precision(17);
  for (const auto& s : steps) {
    out << s.state.t;
    for (std::size_t k = 0; k < d; ++k) out << "," << s.state.x(static_cast<Eigen::Index>(k));
    for (std::size_t k = 0; k < d; ++k) out << "," << s.state.P(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t k = 0; k < q; ++k) out << "," << s.innovation(static_cast<Eigen::Index>(k));
    out << "\n";
  }
}

}  // namespace kuq
