#include "kuq/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "kuq/errors.hpp"

namespace kuq {

void VectorField::validate() const {
  if (components.size() != domain.dim()) throw ContractViolation("VectorField: component count must equal domain dimension");
  for (const auto& c : components) {
    if (c.dim() != components.size()) throw ContractViolation("VectorField: component dimension mismatch");
  }
}

Eigen::VectorXcd VectorField::evaluate(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < dim(); ++i) out(i) = components[i].evaluate(x);
  return out;
}

Eigen::MatrixXcd build_koopman_matrix(const VectorField& f, const BasisSet& basis) {
  if (f.dim() != basis.dim()) throw ContractViolation("build_koopman_matrix: vector field and basis dimensions differ");
  for (const auto& c : f.components) {
    if (c.dim() != basis.dim()) throw ContractViolation("build_koopman_matrix: component dimension mismatch");
  }
  const std::size_t d = basis.dim();
  const std::size_t m = basis.size();
  const Domain& dom = basis.domain();
  const Eigen::VectorXd h = dom.half_width();

  // du/dt = f(mid + h u) / h in unit-box coordinates, truncated onto the basis.
  std::vector<Polynomial> fu;
  fu.reserve(d);
  for (std::size_t k = 0; k < d; ++k) {
    Polynomial c = dom.to_unit(f.components[k]) * cplx(1.0 / h(k));
    if (c.degree() > basis.max_degree()) c = basis.reconstruct_unit(basis.project_unit(c));
    fu.push_back(std::move(c));
  }

  Eigen::MatrixXcd K(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    Polynomial g(d);
    for (std::size_t k = 0; k < d; ++k) {
      if (fu[k].is_zero()) continue;
      const Polynomial dl = basis.unit_function(i).differentiate(k);
      if (dl.is_zero()) continue;
      g += dl * fu[k];
    }
    K.row(static_cast<Eigen::Index>(i)) = basis.project_unit(g).transpose();
  }
  return K;
}

namespace {

double inf_norm(const Eigen::MatrixXcd& M) {
  if (M.size() == 0) return 0.0;
  return M.cwiseAbs().rowwise().sum().maxCoeff();
}

// Unit 2-norm and a fixed phase: the first component within 1e-9 of the
// largest magnitude is made real and positive.
Eigen::RowVectorXcd normalize_row(Eigen::RowVectorXcd v) {
  const double n = v.norm();
  if (n == 0.0) return v;
  v /= n;
  const double big = v.cwiseAbs().maxCoeff();
  Eigen::Index pivot = 0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (std::abs(v(j)) >= big * (1.0 - 1e-9)) {
      pivot = j;
      break;
    }
  }
  const cplx phase = std::abs(v(pivot)) > 0 ? std::conj(v(pivot)) / std::abs(v(pivot)) : cplx(1.0);
  v *= phase;
  v(pivot) = cplx(v(pivot).real(), 0.0);
  return v;
}

long long quantize(double x, double step) { return std::llround(x / step); }

}  // namespace

Eigendecomposition eigendecompose(const Eigen::MatrixXcd& K, const EigenOptions& options) {
  if (K.rows() != K.cols()) throw ContractViolation("eigendecompose: matrix must be square");
  if (!K.allFinite()) throw ContractViolation("eigendecompose: matrix has non-finite entries");
  const Eigen::Index m = K.rows();
  Eigendecomposition out;
  if (m == 0) return out;

  const bool real_matrix = K.imag().cwiseAbs().maxCoeff() == 0.0;
  // Left eigenvectors of K are right eigenvectors of K^T.
  Eigen::VectorXcd vals;
  Eigen::MatrixXcd vecs;
  if (real_matrix) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(K.real().transpose(), true);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecompose: eigen solver did not converge");
    vals = solver.eigenvalues();
    vecs = solver.eigenvectors();
  } else {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(K.transpose(), true);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecompose: eigen solver did not converge");
    vals = solver.eigenvalues();
    vecs = solver.eigenvectors();
  }

  const double scale = std::max(1.0, inf_norm(K));
  const double tol = 1e-9 * scale;

  struct Pair {
    cplx value;
    Eigen::RowVectorXcd vec;
  };
  std::vector<Pair> pairs;
  pairs.reserve(m);
  for (Eigen::Index i = 0; i < m; ++i) pairs.push_back({vals(i), normalize_row(vecs.col(i).transpose())});

  std::vector<Pair> ordered;
  ordered.reserve(m);
  bool paired = false;
  if (real_matrix) {
    // Conjugate closure: keep upper-half-plane eigenpairs and mirror them.
    std::vector<Pair> upper, reals;
    std::size_t lower_count = 0;
    for (const auto& p : pairs) {
      if (p.value.imag() > tol) {
        upper.push_back(p);
      } else if (p.value.imag() < -tol) {
        ++lower_count;
      } else {
        Pair r = p;
        r.value = cplx(p.value.real(), 0.0);
        // Real eigenvalue of a real matrix: keep the real direction when the
        // solver returned one up to phase.
        if (r.vec.imag().norm() < 1e-10) r.vec = r.vec.real().cast<cplx>();
        reals.push_back(std::move(r));
      }
    }
    if (upper.size() == lower_count) {
      paired = true;
      struct Unit {
        std::vector<Pair> members;
        long long re_key, im_key;
        double mag;
      };
      std::vector<Unit> units;
      for (auto& p : upper) {
        Pair c{std::conj(p.value), p.vec.conjugate()};
        units.push_back({{p, c}, quantize(p.value.real(), tol), quantize(p.value.imag(), tol), std::abs(p.value)});
      }
      for (auto& p : reals) units.push_back({{p}, quantize(p.value.real(), tol), 0, std::abs(p.value)});
      std::stable_sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
        if (a.re_key != b.re_key) return a.re_key > b.re_key;
        if (a.im_key != b.im_key) return a.im_key > b.im_key;
        return a.mag > b.mag;
      });
      for (auto& u : units) {
        for (auto& p : u.members) ordered.push_back(std::move(p));
      }
    }
  }
  if (!paired) {
    ordered = std::move(pairs);
    std::stable_sort(ordered.begin(), ordered.end(), [tol](const Pair& a, const Pair& b) {
      const auto ra = quantize(a.value.real(), tol), rb = quantize(b.value.real(), tol);
      if (ra != rb) return ra > rb;
      const auto ia = quantize(a.value.imag(), tol), ib = quantize(b.value.imag(), tol);
      if (ia != ib) return ia > ib;
      return std::abs(a.value) > std::abs(b.value);
    });
  }

  out.C.resize(m, m);
  out.lambda.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.C.row(i) = ordered[i].vec;
    out.lambda(i) = ordered[i].value;
  }

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(out.C);
  const auto& sv = svd.singularValues();
  out.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(out.condition <= options.max_condition)) {
    std::ostringstream msg;
    msg << "eigendecompose: non-diagonalizable within tolerance (eigenvector condition number " << out.condition
        << " > " << options.max_condition << ")";
    throw NumericalError(msg.str());
  }
  out.C_inv = out.C.partialPivLu().inverse();

  const double residual = inf_norm(out.C * K - out.lambda.asDiagonal() * out.C) / std::max(inf_norm(K), 1e-300);
  if (inf_norm(K) > 0.0 && residual > 1e-8) {
    std::ostringstream msg;
    msg << "eigendecompose: eigen residual " << residual << " exceeds 1e-8";
    throw NumericalError(msg.str());
  }
  return out;
}

ObservableSet make_observables(std::vector<Polynomial> observables, const BasisSet& basis) {
  ObservableSet s;
  s.A.resize(static_cast<Eigen::Index>(observables.size()), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < observables.size(); ++i) {
    if (observables[i].dim() != basis.dim()) throw ContractViolation("make_observables: dimension mismatch");
    s.A.row(static_cast<Eigen::Index>(i)) = basis.project(observables[i]).transpose();
  }
  s.observables = std::move(observables);
  return s;
}

ObservableSet identity_observables(const BasisSet& basis) {
  std::vector<Polynomial> ids;
  for (std::size_t k = 0; k < basis.dim(); ++k) ids.push_back(Polynomial::variable(basis.dim(), k));
  return make_observables(std::move(ids), basis);
}

KoopmanModel::KoopmanModel(BasisSet basis, Eigen::MatrixXcd K, const EigenOptions& options)
    : basis_(std::move(basis)), K_(std::move(K)), solve_threshold_(options.solve_threshold) {
  if (static_cast<std::size_t>(K_.rows()) != basis_.size() || K_.rows() != K_.cols()) {
    throw ContractViolation("KoopmanModel: K shape does not match basis size");
  }
  eig_ = eigendecompose(K_, options);
}

KoopmanModel KoopmanModel::build(const VectorField& f, int max_degree, const EigenOptions& options) {
  f.validate();
  BasisSet basis(max_degree, f.domain);
  Eigen::MatrixXcd K = build_koopman_matrix(f, basis);
  return KoopmanModel(std::move(basis), std::move(K), options);
}

double KoopmanModel::eigen_residual() const {
  const double nk = inf_norm(K_);
  const double r = inf_norm(eig_.C * K_ - eig_.lambda.asDiagonal() * eig_.C);
  return nk > 0.0 ? r / nk : r;
}

double KoopmanModel::inverse_residual() const {
  const Eigen::Index m = eig_.C.rows();
  return inf_norm(eig_.C * eig_.C_inv - Eigen::MatrixXcd::Identity(m, m));
}

Eigen::MatrixXcd KoopmanModel::modes(const ObservableSet& obs) const {
  if (static_cast<std::size_t>(obs.A.cols()) != size()) throw ContractViolation("KoopmanModel::modes: observable basis mismatch");
  if (solves_against_C()) {
    // B C = A  <=>  C^T B^T = A^T
    return eig_.C.transpose().fullPivLu().solve(obs.A.transpose()).transpose();
  }
  return obs.A * eig_.C_inv;
}

Eigen::MatrixXcd KoopmanModel::flow_coefficients(const ObservableSet& obs, double t) const {
  if (!std::isfinite(t)) throw ContractViolation("flow: time must be finite");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < eig_.lambda.size(); ++i) worst = std::max(worst, eig_.lambda(i).real() * t);
  if (worst > 700.0) {
    std::ostringstream msg;
    msg << "flow: exp(lambda t) overflows (max Re(lambda)*t = " << worst << ")";
    throw NumericalError(msg.str());
  }
  Eigen::VectorXcd e(eig_.lambda.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = std::exp(eig_.lambda(i) * t);
  return modes(obs) * e.asDiagonal() * eig_.C;
}

std::vector<Polynomial> flow_polynomial(const KoopmanModel& model, const ObservableSet& obs, double t) {
  const Eigen::MatrixXcd coeffs = model.flow_coefficients(obs, t);
  std::vector<Polynomial> out;
  out.reserve(obs.size());
  for (Eigen::Index i = 0; i < coeffs.rows(); ++i) out.push_back(model.basis().reconstruct(coeffs.row(i).transpose()));
  return out;
}

std::vector<Polynomial> shifted_flow(const KoopmanModel& model, const ObservableSet& obs, double t,
                                     const Eigen::VectorXd& center) {
  if (static_cast<std::size_t>(center.size()) != model.dim()) throw ContractViolation("shifted_flow: center dimension mismatch");
  if (!model.basis().domain().contains(center)) throw DomainViolation("shifted_flow: center lies outside the basis domain");
  auto flow = flow_polynomial(model, obs, t);
  for (auto& p : flow) p = shift_center(p, center);
  return flow;
}

std::vector<Polynomial> real_parts(const std::vector<Polynomial>& polys, double rel_tol) {
  std::vector<Polynomial> out;
  out.reserve(polys.size());
  for (const auto& p : polys) out.push_back(p.real_part(rel_tol));
  return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXcd& M) {
  std::vector<double> re, im;
  re.reserve(M.size());
  im.reserve(M.size());
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      re.push_back(M(i, j).real());
      im.push_back(M(i, j).imag());
    }
  }
  return {{"rows", M.rows()}, {"cols", M.cols()}, {"re", re}, {"im", im}};
}

Eigen::MatrixXcd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(re.size()) != rows * cols || re.size() != im.size()) {
    throw InputError("matrix JSON: element count does not match shape");
  }
  Eigen::MatrixXcd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) M(i, j2) = cplx(re[i * cols + j2], im[i * cols + j2]);
  }
  return M;
}

namespace {
constexpr int kModelFormatVersion = 1;

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
}  // namespace

nlohmann::json to_json(const KoopmanModel& model) {
  const auto& dom = model.basis().domain();
  nlohmann::json j;
  j["format"] = "kuq-koopman-model";
  j["version"] = kModelFormatVersion;
  j["basis"] = {{"dim", model.dim()},
                {"max_degree", model.basis().max_degree()},
                {"ordering", "graded-lex"},
                {"lower", to_std(dom.lower())},
                {"upper", to_std(dom.upper())}};
  j["K"] = matrix_to_json(model.K());
  j["C"] = matrix_to_json(model.C());
  j["lambda"] = matrix_to_json(model.lambda());
  j["diagnostics"] = {{"condition_number", model.condition_number()},
                      {"eigen_residual", model.eigen_residual()},
                      {"inverse_residual", model.inverse_residual()}};
  return j;
}

KoopmanModel koopman_model_from_json(const nlohmann::json& j, const EigenOptions& options) {
  try {
    if (j.at("format").get<std::string>() != "kuq-koopman-model") throw InputError("model JSON: unknown format");
    if (j.at("version").get<int>() != kModelFormatVersion) throw InputError("model JSON: unsupported version");
    const auto& b = j.at("basis");
    const auto lower = b.at("lower").get<std::vector<double>>();
    const auto upper = b.at("upper").get<std::vector<double>>();
    Domain dom(Eigen::Map<const Eigen::VectorXd>(lower.data(), static_cast<Eigen::Index>(lower.size())),
               Eigen::Map<const Eigen::VectorXd>(upper.data(), static_cast<Eigen::Index>(upper.size())));
    BasisSet basis(b.at("max_degree").get<int>(), std::move(dom));
    // The eigendecomposition is recomputed deterministically from K and
    // checked against the stored spectrum.
    KoopmanModel model(std::move(basis), matrix_from_json(j.at("K")), options);
    const Eigen::MatrixXcd stored = matrix_from_json(j.at("lambda"));
    if (stored.size() != model.lambda().size() ||
        (stored.reshaped() - model.lambda()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, model.lambda().cwiseAbs().maxCoeff())) {
      throw InputError("model JSON: stored spectrum does not match K");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model JSON: ") + e.what());
  }
}

}  // namespace kuq
