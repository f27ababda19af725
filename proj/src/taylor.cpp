#include "kuq/taylor.hpp"

#include <cmath>

#include "kuq/errors.hpp"

namespace kuq::taylor {

namespace {

std::pair<double, Polynomial> split(const Polynomial& u) {
  const double a = u.coeff(MultiIndex(u.dim())).real();
  return {a, u - Polynomial::constant(u.dim(), a)};
}

// Univariate truncated series helpers, coefficients in q.
std::vector<double> series_power(double c, const std::vector<double>& r, double alpha, int order) {
  // (c + r(q))^alpha with r(0) = 0.
  std::vector<double> out(order + 1, 0.0), rn(order + 1, 0.0);
  rn[0] = 1.0;
  double binom = 1.0;
  for (int n = 0; n <= order; ++n) {
    const double scale = binom * std::pow(c, alpha - n);
    for (int k = 0; k <= order; ++k) out[k] += scale * rn[k];
    std::vector<double> next(order + 1, 0.0);
    for (int i = 0; i <= order; ++i) {
      if (rn[i] == 0.0) continue;
      for (int j = 1; i + j <= order && j < static_cast<int>(r.size()); ++j) next[i + j] += rn[i] * r[j];
    }
    rn = std::move(next);
    binom *= (alpha - n) / (n + 1);
  }
  return out;
}

std::vector<double> integrate_series(double c0, const std::vector<double>& d, int order) {
  std::vector<double> out(order + 1, 0.0);
  out[0] = c0;
  for (int n = 1; n <= order; ++n) out[n] = d[n - 1] / n;
  return out;
}

}  // namespace

Polynomial multiply(const Polynomial& a, const Polynomial& b, int order) { return (a * b).truncated(order); }

Polynomial compose_series(const std::vector<double>& c, const Polynomial& q, int order) {
  if (q.coeff(MultiIndex(q.dim())) != cplx(0.0)) throw ContractViolation("compose_series: q must have no constant term");
  // Horner from the highest retained coefficient.
  const int top = std::min<int>(order, static_cast<int>(c.size()) - 1);
  Polynomial acc = Polynomial::constant(q.dim(), top >= 0 ? c[top] : 0.0);
  for (int n = top - 1; n >= 0; --n) acc = multiply(acc, q, order) + Polynomial::constant(q.dim(), c[n]);
  return acc.truncated(order);
}

Polynomial power(const Polynomial& u, double alpha, int order) {
  const auto [a, q] = split(u);
  const bool integer = alpha == std::floor(alpha);
  if (a == 0.0 || (!integer && a < 0.0)) throw DomainViolation("taylor::power: expansion point outside the domain of x^alpha");
  std::vector<double> c(order + 1);
  double binom = 1.0;
  for (int n = 0; n <= order; ++n) {
    c[n] = binom * std::pow(a, alpha - n);
    binom *= (alpha - n) / (n + 1);
  }
  return compose_series(c, q, order);
}

Polynomial reciprocal(const Polynomial& u, int order) { return power(u, -1.0, order); }

Polynomial sqrt(const Polynomial& u, int order) { return power(u, 0.5, order); }

Polynomial atan(const Polynomial& u, int order) {
  const auto [a, q] = split(u);
  // d/dq atan(a + q) = (1 + a^2 + 2 a q + q^2)^-1.
  const auto d = series_power(1.0 + a * a, {0.0, 2.0 * a, 1.0}, -1.0, order);
  return compose_series(integrate_series(std::atan(a), d, order), q, order);
}

Polynomial asin(const Polynomial& u, int order) {
  const auto [a, q] = split(u);
  if (!(std::abs(a) < 1.0)) throw DomainViolation("taylor::asin: expansion point outside (-1, 1)");
  // d/dq asin(a + q) = (1 - a^2 - 2 a q - q^2)^-1/2.
  const auto d = series_power(1.0 - a * a, {0.0, -2.0 * a, -1.0}, -0.5, order);
  return compose_series(integrate_series(std::asin(a), d, order), q, order);
}

}  // namespace kuq::taylor
