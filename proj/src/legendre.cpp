#include "kuq/legendre.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kuq/errors.hpp"

namespace kuq {

Domain::Domain(Eigen::VectorXd lower, Eigen::VectorXd upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) throw ContractViolation("Domain: bound lengths differ");
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_(i) < upper_(i))) {
      throw ContractViolation("Domain: lower[" + std::to_string(i) + "] must be < upper[" + std::to_string(i) + "]");
    }
  }
}

Domain Domain::unit(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return Domain(Eigen::VectorXd::Constant(n, -1.0), Eigen::VectorXd::Constant(n, 1.0));
}

Domain Domain::centered(const Eigen::VectorXd& center, const Eigen::VectorXd& half_width) {
  return Domain(center - half_width, center + half_width);
}

double Domain::volume() const { return (upper_ - lower_).prod(); }

bool Domain::contains(const Eigen::VectorXd& x) const {
  if (x.size() != lower_.size()) throw ContractViolation("Domain::contains: dimension mismatch");
  return ((x.array() >= lower_.array()) && (x.array() <= upper_.array())).all();
}

bool Domain::contains(const Eigen::VectorXcd& x) const {
  if (x.size() != lower_.size()) throw ContractViolation("Domain::contains: dimension mismatch");
  const Eigen::VectorXd h = half_width();
  const Eigen::VectorXd c = mid();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i).real() - c(i)) > h(i) || std::abs(x(i).imag()) > h(i)) return false;
  }
  return true;
}

Eigen::VectorXd Domain::to_unit(const Eigen::VectorXd& x) const {
  return ((x - mid()).array() / half_width().array()).matrix();
}

Eigen::VectorXd Domain::from_unit(const Eigen::VectorXd& u) const {
  return mid() + (u.array() * half_width().array()).matrix();
}

Polynomial Domain::to_unit(const Polynomial& p_of_x) const {
  // x = mid + half * u
  const Eigen::VectorXd h = half_width();
  return p_of_x.compose_affine(h.cast<cplx>().asDiagonal().toDenseMatrix(), mid().cast<cplx>());
}

Polynomial Domain::from_unit(const Polynomial& p_of_u) const {
  // u = (x - mid) / half
  const Eigen::VectorXd inv_h = half_width().cwiseInverse();
  const Eigen::VectorXd off = -mid().cwiseProduct(inv_h);
  return p_of_u.compose_affine(inv_h.cast<cplx>().asDiagonal().toDenseMatrix(), off.cast<cplx>());
}

GaussRule gauss_legendre(int n) {
  if (n < 1) throw ContractViolation("gauss_legendre: need at least one node");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node for the weight.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

std::vector<double> normalized_legendre_1d(int n) {
  if (n < 0) throw ContractViolation("normalized_legendre_1d: negative degree");
  std::vector<double> p0{1.0};
  std::vector<double> p1{0.0, 1.0};
  std::vector<double> pn = n == 0 ? p0 : p1;
  for (int k = 1; k < n; ++k) {
    // (k+1) P_{k+1} = (2k+1) u P_k - k P_{k-1}
    std::vector<double> next(k + 2, 0.0);
    for (int i = 0; i <= k; ++i) next[i + 1] += (2.0 * k + 1.0) * p1[i];
    for (int i = 0; i < k; ++i) next[i] -= k * p0[i];
    for (double& c : next) c /= (k + 1.0);
    p0 = std::move(p1);
    p1 = std::move(next);
    pn = p1;
  }
  const double scale = std::sqrt((2.0 * n + 1.0) / 2.0);
  for (double& c : pn) c *= scale;
  return pn;
}

namespace {

Polynomial unit_legendre(const MultiIndex& index) {
  const std::size_t d = index.size();
  Polynomial result = Polynomial::constant(d, 1.0);
  for (std::size_t k = 0; k < d; ++k) {
    const auto coeffs = normalized_legendre_1d(index[k]);
    Polynomial factor(d);
    for (std::size_t e = 0; e < coeffs.size(); ++e) {
      if (coeffs[e] == 0.0) continue;
      MultiIndex m(d);
      m.set(k, static_cast<int>(e));
      factor.add_term(m, coeffs[e]);
    }
    factor.cleanup();
    result = result * factor;
  }
  return result;
}

double monomial_box_integral(const MultiIndex& k, const Domain& domain) {
  double v = 1.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double lo = domain.lower()(i), hi = domain.upper()(i);
    const int n = k[i] + 1;
    v *= (std::pow(hi, n) - std::pow(lo, n)) / n;
  }
  return v;
}

// integral_{-1}^{1} u^n l_j(u) du for j = 0..n (zero for j > n).
std::vector<double> unit_moment_row(int n) {
  std::vector<double> row(n + 1, 0.0);
  for (int j = n % 2; j <= n; j += 2) {
    const GaussRule rule = gauss_legendre((n + j) / 2 + 1);
    const auto lj = normalized_legendre_1d(j);
    double s = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double u = rule.nodes[q];
      double lv = 0.0;
      for (int e = j; e >= 0; --e) lv = lv * u + lj[e];
      s += rule.weights[q] * std::pow(u, n) * lv;
    }
    row[j] = s;
  }
  return row;
}

}  // namespace

Polynomial legendre_poly(const MultiIndex& index, const Domain& domain) {
  if (index.size() != domain.dim()) throw ContractViolation("legendre_poly: index length does not match domain");
  Polynomial p = unit_legendre(index);
  p *= 1.0 / std::sqrt(domain.half_width().prod());
  return domain.from_unit(p);
}

cplx integrate(const Polynomial& f, const Domain& domain, IntegrationRoute route) {
  if (f.dim() != domain.dim()) throw ContractViolation("integrate: dimension mismatch");
  if (route == IntegrationRoute::kAnalytic) {
    cplx s = 0.0;
    for (const auto& [k, c] : f.terms()) s += c * monomial_box_integral(k, domain);
    return s;
  }
  // Tensor Gauss-Legendre with enough nodes per axis for exactness.
  const std::size_t d = f.dim();
  int max_e = 0;
  for (const auto& [k, c] : f.terms()) {
    for (std::size_t i = 0; i < d; ++i) max_e = std::max(max_e, k[i]);
  }
  const GaussRule rule = gauss_legendre(max_e / 2 + 1);
  const std::size_t nq = rule.nodes.size();
  const Eigen::VectorXd mid = domain.mid(), half = domain.half_width();
  std::vector<std::size_t> idx(d, 0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(d));
  cplx s = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      x(i) = mid(i) + half(i) * rule.nodes[idx[i]];
      w *= rule.weights[idx[i]] * half(i);
    }
    s += w * f.evaluate(x);
    std::size_t i = 0;
    while (i < d && ++idx[i] == nq) idx[i++] = 0;
    if (i == d) break;
  }
  return s;
}

cplx inner_product(const Polynomial& f, const Polynomial& g, const Domain& domain, IntegrationRoute route) {
  if (f.dim() != g.dim() || f.dim() != domain.dim()) throw ContractViolation("inner_product: dimension mismatch");
  return integrate(f * g, domain, route);
}

BasisSet::BasisSet(int max_degree, Domain domain) : max_degree_(max_degree), domain_(std::move(domain)) {
  if (max_degree < 0) throw ContractViolation("BasisSet: negative max_degree");
  indices_ = graded_indices(domain_.dim(), max_degree);
  const double norm = 1.0 / std::sqrt(domain_.half_width().prod());
  functions_.reserve(indices_.size());
  unit_functions_.reserve(indices_.size());
  for (std::size_t l = 0; l < indices_.size(); ++l) {
    lookup_.emplace(indices_[l], l);
    Polynomial u = unit_legendre(indices_[l]);
    unit_functions_.push_back(u);
    functions_.push_back(domain_.from_unit(u * norm));
  }
  const int rows = 4 * max_degree + 8;
  moment_table_.reserve(rows + 1);
  for (int n = 0; n <= rows; ++n) moment_table_.push_back(unit_moment_row(n));
}

long BasisSet::position(const MultiIndex& index) const {
  auto it = lookup_.find(index);
  return it == lookup_.end() ? -1 : static_cast<long>(it->second);
}

Eigen::VectorXcd BasisSet::project_unit(const Polynomial& f) const {
  if (f.dim() != dim()) throw ContractViolation("BasisSet::project: dimension mismatch");
  const std::size_t d = dim();
  // Rows beyond the precomputed table are built locally.
  std::vector<std::vector<double>> extra;
  auto row = [&](int n) -> const std::vector<double>& {
    if (n < static_cast<int>(moment_table_.size())) return moment_table_[n];
    const std::size_t off = n - moment_table_.size();
    if (extra.size() <= off) {
      for (int k = static_cast<int>(moment_table_.size() + extra.size()); k <= n; ++k) {
        extra.push_back(unit_moment_row(k));
      }
    }
    return extra[off];
  };

  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(size()));
  std::vector<int> beta(d);
  for (const auto& [k, c] : f.terms()) {
    // beta_i runs over k_i, k_i - 2, ... >= 0 with total degree <= max_degree.
    for (std::size_t i = 0; i < d; ++i) beta[i] = k[i] % 2;
    while (true) {
      int total = 0;
      for (std::size_t i = 0; i < d; ++i) total += beta[i];
      if (total <= max_degree_) {
        double w = 1.0;
        for (std::size_t i = 0; i < d; ++i) w *= row(k[i])[beta[i]];
        const long pos = position(MultiIndex(std::span<const int>(beta)));
        a(pos) += c * w;
      }
      std::size_t i = 0;
      while (i < d && beta[i] + 2 > k[i]) {
        beta[i] = k[i] % 2;
        ++i;
      }
      if (i == d) break;
      beta[i] += 2;
    }
  }
  return a;
}

Eigen::VectorXcd BasisSet::project(const Polynomial& f) const {
  // <f, L_l>_x = sqrt(prod half) * <f(x(u)), l_l(u)>_u
  return project_unit(domain_.to_unit(f)) * std::sqrt(domain_.half_width().prod());
}

Polynomial BasisSet::reconstruct_unit(const Eigen::VectorXcd& coeffs) const {
  if (static_cast<std::size_t>(coeffs.size()) != size()) throw ContractViolation("BasisSet::reconstruct: length mismatch");
  Polynomial r(dim());
  for (std::size_t l = 0; l < size(); ++l) {
    if (coeffs(l) == cplx(0.0)) continue;
    for (const auto& [k, c] : unit_functions_[l].terms()) r.add_term(k, coeffs(l) * c);
  }
  r.cleanup();
  return r;
}

Polynomial BasisSet::reconstruct(const Eigen::VectorXcd& coeffs) const {
  return domain_.from_unit(reconstruct_unit(coeffs) * (1.0 / std::sqrt(domain_.half_width().prod())));
}

Eigen::VectorXcd BasisSet::evaluate(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(size()));
  for (std::size_t l = 0; l < size(); ++l) v(l) = functions_[l].evaluate(x);
  return v;
}

}  // namespace kuq
