#include "kuq/flow_map.hpp"

#include <cmath>
#include <sstream>

#include "kuq/errors.hpp"

namespace kuq {

namespace {
constexpr double kImagTolerance = 1e-8;
}  // namespace

AffineChart::AffineChart(Eigen::MatrixXd M, Eigen::VectorXd b) : M_(std::move(M)), b_(std::move(b)) {
  if (M_.rows() != M_.cols() || M_.rows() != b_.size()) throw ContractViolation("AffineChart: shape mismatch");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M_);
  if (!lu.isInvertible()) throw ContractViolation("AffineChart: matrix is singular");
  M_inv_ = lu.inverse();
}

AffineChart AffineChart::identity(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return AffineChart(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));
}

Polynomial AffineChart::pull_to_model(const Polynomial& g_of_s) const {
  if (g_of_s.dim() != dim()) throw ContractViolation("AffineChart::pull_to_model: dimension mismatch");
  return g_of_s.compose_affine(M_inv_.cast<cplx>(), (-M_inv_ * b_).cast<cplx>());
}

Domain fit_domain(const std::vector<Eigen::VectorXd>& points, double pad, double min_half_width) {
  if (points.empty()) throw ContractViolation("fit_domain: no points");
  if (!(pad >= 1.0) || !(min_half_width > 0.0)) throw ContractViolation("fit_domain: pad must be >= 1 and the floor positive");
  Eigen::VectorXd lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    if (p.size() != lo.size()) throw ContractViolation("fit_domain: inconsistent point dimensions");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::VectorXd half = ((hi - lo) * 0.5 * pad).cwiseMax(min_half_width);
  return Domain::centered((lo + hi) * 0.5, half);
}

FlowMap::FlowMap(KoopmanModel model, AffineChart chart) : model_(std::move(model)), chart_(std::move(chart)) {
  if (model_.dim() != chart_.dim()) throw ContractViolation("FlowMap: model and chart dimensions differ");
  std::vector<Polynomial> ids;
  for (std::size_t k = 0; k < dim(); ++k) ids.push_back(Polynomial::variable(dim(), k));
  state_obs_ = observables(ids);
}

bool FlowMap::contains(const Eigen::VectorXd& s) const { return model_.basis().domain().contains(chart_.to_model(s)); }

ObservableSet FlowMap::observables(const std::vector<Polynomial>& g_of_s) const {
  std::vector<Polynomial> pulled;
  pulled.reserve(g_of_s.size());
  for (const auto& g : g_of_s) pulled.push_back(chart_.pull_to_model(g));
  ObservableSet obs = make_observables(std::move(pulled), model_.basis());
  obs.observables = g_of_s;
  return obs;
}

std::vector<Polynomial> FlowMap::shifted(const Eigen::MatrixXcd& flow_coeffs, const Eigen::VectorXd& center) const {
  if (static_cast<std::size_t>(center.size()) != dim()) throw ContractViolation("FlowMap::shifted: center dimension mismatch");
  const Domain& dom = model_.basis().domain();
  const Eigen::VectorXd wc = chart_.to_model(center);
  if (!dom.contains(wc)) throw DomainViolation("FlowMap::shifted: center lies outside the basis domain");
  // u = (w - mid) / h with w = M delta + wc.
  const Eigen::VectorXd h = dom.half_width();
  const Eigen::MatrixXcd Mu = (h.cwiseInverse().asDiagonal() * chart_.matrix()).cast<cplx>();
  const Eigen::VectorXcd bu = ((wc - dom.mid()).cwiseQuotient(h)).cast<cplx>();
  const double norm = 1.0 / std::sqrt(h.prod());
  std::vector<Polynomial> out;
  out.reserve(static_cast<std::size_t>(flow_coeffs.rows()));
  for (Eigen::Index r = 0; r < flow_coeffs.rows(); ++r) {
    // The flow of a real observable under a real K is real: the imaginary
    // part of the basis coefficients is round-off and is checked there,
    // before the change of variables rescales individual terms.
    const double scale = flow_coeffs.row(r).cwiseAbs().maxCoeff();
    const double imag = flow_coeffs.row(r).imag().cwiseAbs().maxCoeff();
    if (imag > kImagTolerance * scale) {
      std::ostringstream msg;
      msg << "FlowMap::shifted: imaginary residual " << imag / scale << " in observable " << r;
      throw NumericalError(msg.str());
    }
    const Eigen::VectorXcd real_coeffs = flow_coeffs.row(r).real().transpose().cast<cplx>() * norm;
    out.push_back(model_.basis().reconstruct_unit(real_coeffs).compose_affine(Mu, bu));
  }
  return out;
}

std::vector<Polynomial> FlowMap::shifted(const ObservableSet& obs, double t, const Eigen::VectorXd& center) const {
  return shifted(model_.flow_coefficients(obs, t), center);
}

std::vector<Polynomial> FlowMap::shifted_state(double t, const Eigen::VectorXd& center) const {
  return shifted(state_obs_, t, center);
}

Eigen::VectorXd FlowMap::state_at(const Eigen::VectorXd& s0, double t) const {
  const Eigen::VectorXd w0 = chart_.to_model(s0);
  if (!model_.basis().domain().contains(w0)) throw DomainViolation("FlowMap::state_at: state lies outside the basis domain");
  const Eigen::VectorXcd v = model_.flow_coefficients(state_obs_, t) * model_.basis().evaluate(w0.cast<cplx>());
  return v.real();
}

}  // namespace kuq
