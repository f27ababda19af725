#include "kuq/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "kuq/errors.hpp"

namespace kuq {

std::vector<MultiIndex> graded_indices(std::size_t dim, int max_degree) {
  std::vector<MultiIndex> out;
  if (max_degree < 0) return out;
  out.reserve(count_up_to_degree(dim, max_degree));
  if (dim == 0) {
    out.emplace_back(0);
    return out;
  }
  // For each degree, enumerate compositions in descending lex order.
  std::vector<int> e(dim, 0);
  for (int deg = 0; deg <= max_degree; ++deg) {
    std::fill(e.begin(), e.end(), 0);
    e[0] = deg;
    while (true) {
      out.emplace_back(std::span<const int>(e));
      // Next composition in descending lex order: find the rightmost
      // non-last position with a positive entry, move one unit right and
      // gather everything after it.
      int j = static_cast<int>(dim) - 2;
      while (j >= 0 && e[j] == 0) --j;
      if (j < 0) break;
      --e[j];
      int rest = 1;
      for (std::size_t k = j + 1; k < dim; ++k) {
        rest += e[k];
        e[k] = 0;
      }
      e[j + 1] = rest;
    }
  }
  return out;
}

std::size_t count_up_to_degree(std::size_t dim, int degree) {
  if (degree < 0) return 0;
  // C(dim + degree, dim)
  double c = 1.0;
  for (std::size_t i = 1; i <= dim; ++i) c = c * static_cast<double>(degree + i) / static_cast<double>(i);
  return static_cast<std::size_t>(std::llround(c));
}

Polynomial Polynomial::constant(std::size_t dim, cplx c) {
  Polynomial p(dim);
  p.add_term(MultiIndex(dim), c);
  p.cleanup();
  return p;
}

Polynomial Polynomial::variable(std::size_t dim, std::size_t axis) {
  if (axis >= dim) throw ContractViolation("Polynomial::variable: axis out of range");
  return monomial(MultiIndex::unit(dim, axis));
}

Polynomial Polynomial::monomial(const MultiIndex& exponents, cplx c) {
  Polynomial p(exponents.size());
  p.add_term(exponents, c);
  p.cleanup();
  return p;
}

int Polynomial::degree() const {
  // The map is graded, so the last key has maximal degree.
  return terms_.empty() ? -1 : terms_.rbegin()->first.total_degree();
}

cplx Polynomial::coeff(const MultiIndex& exponents) const {
  auto it = terms_.find(exponents);
  return it == terms_.end() ? cplx(0.0) : it->second;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [k, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

void Polynomial::add_term(const MultiIndex& exponents, cplx c) {
  if (exponents.size() != dim_) throw ContractViolation("Polynomial: term dimension mismatch");
  auto [it, inserted] = terms_.try_emplace(exponents, c);
  if (!inserted) it->second += c;
}

void Polynomial::cleanup(double rel_tol) {
  const double cut = rel_tol * max_abs_coeff();
  for (auto it = terms_.begin(); it != terms_.end();) {
    const double a = std::abs(it->second);
    if (a == 0.0 || a < cut) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

void Polynomial::check_dim(const Polynomial& o) const {
  if (o.dim_ != dim_) {
    throw ContractViolation("Polynomial: dimension mismatch (" + std::to_string(dim_) + " vs " +
                            std::to_string(o.dim_) + ")");
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  check_dim(o);
  for (const auto& [k, c] : o.terms_) add_term(k, c);
  cleanup();
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  check_dim(o);
  for (const auto& [k, c] : o.terms_) add_term(k, -c);
  cleanup();
  return *this;
}

Polynomial& Polynomial::operator*=(cplx s) {
  if (s == cplx(0.0)) {
    terms_.clear();
    return *this;
  }
  for (auto& [k, c] : terms_) c *= s;
  cleanup();
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check_dim(b);
  std::unordered_map<MultiIndex, cplx, MultiIndexHash> acc;
  acc.reserve(a.size() * b.size());
  for (const auto& [ka, ca] : a.terms_) {
    for (const auto& [kb, cb] : b.terms_) acc[ka + kb] += ca * cb;
  }
  Polynomial r(a.dim_);
  for (const auto& [k, c] : acc) r.terms_.emplace(k, c);
  r.cleanup();
  return r;
}

Polynomial Polynomial::differentiate(std::size_t axis) const {
  if (axis >= dim_) throw ContractViolation("Polynomial::differentiate: axis out of range");
  Polynomial r(dim_);
  for (const auto& [k, c] : terms_) {
    const int e = k[axis];
    if (e == 0) continue;
    MultiIndex d = k;
    d.set(axis, e - 1);
    r.add_term(d, c * static_cast<double>(e));
  }
  r.cleanup();
  return r;
}

Polynomial Polynomial::truncated(int max_degree) const {
  Polynomial r(dim_);
  for (const auto& [k, c] : terms_) {
    if (k.total_degree() <= max_degree) r.terms_.emplace_hint(r.terms_.end(), k, c);
  }
  return r;
}

Polynomial Polynomial::pow(int n) const {
  if (n < 0) throw ContractViolation("Polynomial::pow: negative exponent");
  Polynomial result = constant(dim_, 1.0);
  Polynomial base = *this;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

namespace {

template <typename T>
cplx evaluate_impl(const Polynomial::TermMap& terms, std::size_t dim, std::span<const T> x) {
  if (x.size() != dim) throw ContractViolation("Polynomial::evaluate: point dimension mismatch");
  // Per-axis power tables up to the largest exponent in use.
  int max_e = 0;
  for (const auto& [k, c] : terms) {
    for (std::size_t i = 0; i < dim; ++i) max_e = std::max(max_e, k[i]);
  }
  std::vector<std::vector<cplx>> powers(dim, std::vector<cplx>(max_e + 1, 1.0));
  for (std::size_t i = 0; i < dim; ++i) {
    for (int e = 1; e <= max_e; ++e) powers[i][e] = powers[i][e - 1] * cplx(x[i]);
  }
  cplx sum = 0.0;
  for (const auto& [k, c] : terms) {
    cplx term = c;
    for (std::size_t i = 0; i < dim; ++i) term *= powers[i][k[i]];
    sum += term;
  }
  return sum;
}

}  // namespace

cplx Polynomial::evaluate(std::span<const cplx> x) const { return evaluate_impl(terms_, dim_, x); }
cplx Polynomial::evaluate(std::span<const double> x) const { return evaluate_impl(terms_, dim_, x); }

Polynomial Polynomial::compose(std::span<const Polynomial> subs) const {
  if (subs.size() != dim_) throw ContractViolation("Polynomial::compose: need one substitute per variable");
  const std::size_t out_dim = subs.empty() ? 0 : subs[0].dim();
  for (const auto& s : subs) {
    if (s.dim() != out_dim) throw ContractViolation("Polynomial::compose: substitutes differ in dimension");
  }
  // Cache powers of each substitute on demand.
  std::vector<std::vector<Polynomial>> powers(dim_);
  auto power_of = [&](std::size_t i, int e) -> const Polynomial& {
    auto& pw = powers[i];
    if (pw.empty()) pw.push_back(constant(out_dim, 1.0));
    while (static_cast<int>(pw.size()) <= e) pw.push_back(pw.back() * subs[i]);
    return pw[e];
  };
  std::unordered_map<MultiIndex, cplx, MultiIndexHash> acc;
  for (const auto& [k, c] : terms_) {
    Polynomial term = constant(out_dim, c);
    for (std::size_t i = 0; i < dim_; ++i) {
      if (k[i] > 0) term = term * power_of(i, k[i]);
    }
    for (const auto& [kt, ct] : term.terms_) acc[kt] += ct;
  }
  Polynomial r(out_dim);
  for (const auto& [k, c] : acc) r.terms_.emplace(k, c);
  r.cleanup();
  return r;
}

Polynomial Polynomial::compose_affine(const Eigen::MatrixXcd& M, const Eigen::VectorXcd& b) const {
  if (static_cast<std::size_t>(M.rows()) != dim_ || b.size() != M.rows()) {
    throw ContractViolation("Polynomial::compose_affine: shape mismatch");
  }
  const std::size_t n = static_cast<std::size_t>(M.cols());
  std::vector<Polynomial> subs;
  subs.reserve(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    Polynomial s(n);
    s.add_term(MultiIndex(n), b(i));
    for (std::size_t j = 0; j < n; ++j) s.add_term(MultiIndex::unit(n, j), M(i, j));
    s.cleanup();
    subs.push_back(std::move(s));
  }
  return compose(subs);
}

double Polynomial::imag_residual() const {
  const double m = max_abs_coeff();
  if (m == 0.0) return 0.0;
  double im = 0.0;
  for (const auto& [k, c] : terms_) im = std::max(im, std::abs(c.imag()));
  return im / m;
}

Polynomial Polynomial::real_part(double rel_tol) const {
  const double res = imag_residual();
  if (res > rel_tol) {
    throw NumericalError("Polynomial::real_part: imaginary residual " + std::to_string(res) +
                         " exceeds tolerance " + std::to_string(rel_tol));
  }
  Polynomial r(dim_);
  for (const auto& [k, c] : terms_) r.terms_.emplace_hint(r.terms_.end(), k, cplx(c.real(), 0.0));
  r.cleanup();
  return r;
}

namespace {

// Binomial expansion of (c + d)^e for every e up to max_e, as coefficient
// rows: row[e][j] is the coefficient of d^j.
template <typename T>
std::vector<std::vector<cplx>> binomial_rows(T c, int max_e) {
  std::vector<std::vector<cplx>> rows(max_e + 1);
  rows[0] = {1.0};
  for (int e = 1; e <= max_e; ++e) {
    rows[e].assign(e + 1, 0.0);
    for (int j = 0; j < e; ++j) {
      rows[e][j] += rows[e - 1][j] * cplx(c);
      rows[e][j + 1] += rows[e - 1][j];
    }
  }
  return rows;
}

template <typename T>
Polynomial shift_impl(const Polynomial& f, std::span<const T> center) {
  const std::size_t d = f.dim();
  if (center.size() != d) throw ContractViolation("shift_center: center dimension mismatch");
  int max_e = 0;
  for (const auto& [k, c] : f.terms()) {
    for (std::size_t i = 0; i < d; ++i) max_e = std::max(max_e, k[i]);
  }
  std::vector<std::vector<std::vector<cplx>>> rows(d);
  for (std::size_t i = 0; i < d; ++i) rows[i] = binomial_rows(center[i], max_e);

  std::unordered_map<MultiIndex, cplx, MultiIndexHash> acc;
  std::vector<int> j(d, 0);
  for (const auto& [k, c] : f.terms()) {
    // Odometer over 0 <= j_i <= k_i.
    std::fill(j.begin(), j.end(), 0);
    while (true) {
      cplx w = c;
      for (std::size_t i = 0; i < d; ++i) w *= rows[i][k[i]][j[i]];
      if (w != cplx(0.0)) acc[MultiIndex(std::span<const int>(j))] += w;
      std::size_t i = 0;
      while (i < d && j[i] == k[i]) j[i++] = 0;
      if (i == d) break;
      ++j[i];
    }
  }
  Polynomial r(d);
  for (const auto& [k, c] : acc) r.add_term(k, c);
  r.cleanup();
  return r;
}

}  // namespace

Polynomial shift_center(const Polynomial& f, std::span<const double> center) { return shift_impl(f, center); }
Polynomial shift_center(const Polynomial& f, std::span<const cplx> center) { return shift_impl(f, center); }

double max_coeff_diff(const Polynomial& a, const Polynomial& b) {
  if (a.dim() != b.dim()) throw ContractViolation("max_coeff_diff: dimension mismatch");
  double m = 0.0;
  for (const auto& [k, c] : a.terms()) m = std::max(m, std::abs(c - b.coeff(k)));
  for (const auto& [k, c] : b.terms()) {
    if (a.terms().find(k) == a.terms().end()) m = std::max(m, std::abs(c));
  }
  return m;
}

nlohmann::json to_json(const Polynomial& p) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [k, c] : p.terms()) {
    terms.push_back({{"exp", k.to_vector()}, {"re", c.real()}, {"im", c.imag()}});
  }
  return {{"dim", p.dim()}, {"terms", std::move(terms)}};
}

Polynomial polynomial_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    Polynomial p(dim);
    for (const auto& t : j.at("terms")) {
      const auto exps = t.at("exp").get<std::vector<int>>();
      if (exps.size() != dim) throw InputError("polynomial JSON: exponent length does not match dim");
      p.add_term(MultiIndex(std::span<const int>(exps)), cplx(t.at("re").get<double>(), t.value("im", 0.0)));
    }
    p.cleanup();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("polynomial JSON: ") + e.what());
  }
}

}  // namespace kuq
