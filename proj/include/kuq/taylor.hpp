#pragma once

#include <vector>

#include "kuq/polynomial.hpp"

/// Truncated Taylor arithmetic on polynomials in a deviation: every result
/// keeps terms of total degree <= order only.
namespace kuq::taylor {

/// sum_n c[n] q^n truncated, for q without constant term.
Polynomial compose_series(const std::vector<double>& c, const Polynomial& q, int order);

/// (u)^alpha around the constant term of u (which must be positive for
/// non-integer alpha).
Polynomial power(const Polynomial& u, double alpha, int order);
Polynomial reciprocal(const Polynomial& u, int order);
Polynomial sqrt(const Polynomial& u, int order);
Polynomial atan(const Polynomial& u, int order);
/// Requires |u(0)| < 1.
Polynomial asin(const Polynomial& u, int order);

Polynomial multiply(const Polynomial& a, const Polynomial& b, int order);

}  // namespace kuq::taylor
