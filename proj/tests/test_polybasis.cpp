#include <doctest.h>

#include <cmath>
#include <random>

#include "kuq/errors.hpp"
#include "kuq/legendre.hpp"
#include "kuq/multi_index.hpp"
#include "kuq/polynomial.hpp"
#include "test_util.hpp"

using namespace kuq;

namespace {

bool no_stored_zeros(const Polynomial& p) {
  for (const auto& [e, c] : p.terms()) {
    if (c == cplx(0.0)) return false;
  }
  return true;
}

Polynomial random_poly(std::size_t d, int degree, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Polynomial p(d);
  for (const auto& e : graded_indices(d, degree)) p.add_term(e, u(rng));
  p.cleanup();
  return p;
}

}  // namespace

TEST_CASE("graded indices follow total degree then descending lex") {
  const auto idx = graded_indices(2, 2);
  REQUIRE(idx.size() == 6);
  CHECK(idx[0] == MultiIndex{0, 0});
  CHECK(idx[1] == MultiIndex{1, 0});
  CHECK(idx[2] == MultiIndex{0, 1});
  CHECK(idx[3] == MultiIndex{2, 0});
  CHECK(idx[4] == MultiIndex{1, 1});
  CHECK(idx[5] == MultiIndex{0, 2});
  CHECK(count_up_to_degree(6, 5) == 462);
  CHECK(graded_indices(3, 4).size() == count_up_to_degree(3, 4));
}

TEST_CASE("polynomial arithmetic") {
  const Polynomial x = Polynomial::variable(2, 0);
  const Polynomial y = Polynomial::variable(2, 1);
  const Polynomial one = Polynomial::constant(2, 1.0);

  SUBCASE("differentiate x^2 y") {
    const Polynomial d = (x * x * y).differentiate(0);
    CHECK(d == 2.0 * (x * y));
  }
  SUBCASE("(x + 1)(x - 1)") {
    const Polynomial p = (x + one) * (x - one);
    CHECK(p == x * x - one);
    CHECK(p.size() == 2);
  }
  SUBCASE("f - f is empty") {
    const Polynomial f = x * y + 3.0 * x - one;
    const Polynomial z = f + f * cplx(-1.0);
    CHECK(z.is_zero());
    CHECK(z.terms().empty());
    CHECK(z.degree() == -1);
  }
  SUBCASE("sparsity survives every operation") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 20; ++k) {
      const Polynomial a = random_poly(2, 3, rng);
      const Polynomial b = random_poly(2, 3, rng);
      CHECK(no_stored_zeros(a + b));
      CHECK(no_stored_zeros(a - a));
      CHECK(no_stored_zeros(a * b));
      CHECK(no_stored_zeros(a.differentiate(1)));
      CHECK(no_stored_zeros(a * cplx(0.0)));
      CHECK(no_stored_zeros(a.pow(3)));
    }
  }
  SUBCASE("dimension mismatch is a contract violation") {
    CHECK_THROWS_AS(x + Polynomial::variable(3, 0), ContractViolation);
  }
  SUBCASE("json round trip") {
    const Polynomial p = x * y * cplx(2.0, -1.0) + one;
    CHECK(polynomial_from_json(to_json(p)) == p);
  }
}

TEST_CASE("evaluation and composition agree") {
  std::mt19937_64 rng(11);
  const Polynomial p = random_poly(3, 4, rng);
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Random(3, 2);
  Eigen::VectorXcd b = Eigen::VectorXcd::Random(3);
  const Polynomial q = p.compose_affine(M, b);
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXcd y = Eigen::VectorXcd::Random(2);
    const Eigen::VectorXcd x = M * y + b;
    CHECK(std::abs(q.evaluate(y) - p.evaluate(x)) < 1e-11 * (1.0 + std::abs(p.evaluate(x))));
  }
}

TEST_CASE("shift_center") {
  const Polynomial x = Polynomial::variable(1, 0);
  SUBCASE("zero center leaves f unchanged") {
    const Polynomial f = x.pow(3) + 2.0 * x;
    CHECK(shift_center(f, Eigen::VectorXd::Zero(1)) == f);
  }
  SUBCASE("x^2 about c") {
    const double c = 0.7;
    Eigen::VectorXd cv(1);
    cv << c;
    const Polynomial expected = x * x + (2.0 * c) * x + Polynomial::constant(1, c * c);
    CHECK(max_coeff_diff(shift_center(x * x, cv), expected) < 1e-15);
  }
  SUBCASE("random evaluation oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Polynomial f = random_poly(3, 4, rng);
    const Eigen::VectorXd c = Eigen::VectorXd::Random(3);
    const Polynomial g = shift_center(f, c);
    for (int k = 0; k < 100; ++k) {
      Eigen::VectorXd d(3);
      for (int i = 0; i < 3; ++i) d(i) = u(rng);
      const Eigen::VectorXd xc = c + d;
      CHECK(std::abs(g.evaluate(d) - f.evaluate(xc)) < 1e-12 * (1.0 + std::abs(f.evaluate(xc))));
    }
  }
  SUBCASE("group action") {
    std::mt19937_64 rng(9);
    const Polynomial f = random_poly(2, 4, rng);
    const Eigen::VectorXd c1 = Eigen::VectorXd::Random(2);
    const Eigen::VectorXd c2 = Eigen::VectorXd::Random(2);
    const Eigen::VectorXd c12 = c1 + c2;
    CHECK(max_coeff_diff(shift_center(shift_center(f, c1), c2), shift_center(f, c12)) < 1e-12);
  }
}

TEST_CASE("normalized Legendre functions") {
  const Domain unit1 = Domain::unit(1);
  SUBCASE("degree 0 and 1 on [-1, 1]") {
    const Polynomial l0 = legendre_poly(MultiIndex{0}, unit1);
    const Polynomial l1 = legendre_poly(MultiIndex{1}, unit1);
    CHECK(l0.size() == 1);
    CHECK(l0.coeff(MultiIndex{0}).real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(l1.size() == 1);
    CHECK(l1.coeff(MultiIndex{1}).real() == doctest::Approx(std::sqrt(1.5)).epsilon(1e-15));
  }
  SUBCASE("constant is 1/sqrt(volume) on any box") {
    Eigen::VectorXd lo(3), hi(3);
    lo << -2.0, 0.5, 1.0;
    hi << 1.0, 0.75, 4.0;
    const Domain dom(lo, hi);
    const Polynomial l0 = legendre_poly(MultiIndex{0, 0, 0}, dom);
    CHECK(l0.coeff(MultiIndex{0, 0, 0}).real() == doctest::Approx(1.0 / std::sqrt(dom.volume())).epsilon(1e-14));
  }
  SUBCASE("x against x on [-1, 1]") {
    const Polynomial x = Polynomial::variable(1, 0);
    CHECK(std::abs(inner_product(x, x, unit1) - 2.0 / 3.0) < 1e-15);
  }
  SUBCASE("1-D coefficients match the three-term recurrence") {
    for (int n = 0; n <= 8; ++n) {
      const auto c = normalized_legendre_1d(n);
      for (double u : {-0.9, -0.3, 0.0, 0.41, 0.77}) {
        double p0 = 1.0, p1 = u, pn = n == 0 ? 1.0 : u;
        for (int k = 2; k <= n; ++k) {
          pn = ((2.0 * k - 1.0) * u * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pn;
        }
        double v = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) v = v * u + c[k];
        CHECK(v == doctest::Approx(std::sqrt((2.0 * n + 1.0) / 2.0) * pn).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("orthonormality up to degree 4 in three dimensions") {
  for (std::size_t d = 1; d <= 3; ++d) {
    Eigen::VectorXd lo = -Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(d), 0.5, 2.0);
    Eigen::VectorXd hi = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(d), 1.0, 3.0);
    const BasisSet basis(4, Domain(lo, hi));
    double worst = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      for (std::size_t j = i; j < basis.size(); ++j) {
        const cplx ip = inner_product(basis.function(i), basis.function(j), basis.domain());
        worst = std::max(worst, std::abs(ip - (i == j ? 1.0 : 0.0)));
      }
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("analytic integration agrees with Gauss-Legendre quadrature") {
  std::mt19937_64 rng(21);
  Eigen::VectorXd lo(3), hi(3);
  lo << -1.5, 0.0, -0.2;
  hi << 0.5, 2.0, 0.3;
  const Domain dom(lo, hi);
  for (int k = 0; k < 10; ++k) {
    const Polynomial f = random_poly(3, 8, rng);
    const cplx a = integrate(f, dom, IntegrationRoute::kAnalytic);
    const cplx q = integrate(f, dom, IntegrationRoute::kQuadrature);
    CHECK(std::abs(a - q) <= 1e-12 * std::max(1.0, std::abs(a)));
  }
  const GaussRule rule = gauss_legendre(5);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], 8);
  CHECK(s == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("projection") {
  const BasisSet basis(3, Domain::unit(2));
  SUBCASE("basis function projects onto a unit vector") {
    const Eigen::VectorXcd a = basis.project(basis.function(3));
    for (Eigen::Index l = 0; l < a.size(); ++l) CHECK(std::abs(a(l) - (l == 3 ? 1.0 : 0.0)) < 1e-12);
  }
  SUBCASE("zero projects to zero") {
    CHECK(basis.project(Polynomial(2)).norm() == 0.0);
  }
  SUBCASE("x^2 on [-1, 1] uses indices 0 and 2 only") {
    const BasisSet b1(2, Domain::unit(1));
    const Polynomial x = Polynomial::variable(1, 0);
    const Eigen::VectorXcd a = b1.project(x * x);
    CHECK(std::abs(a(0) - std::sqrt(2.0) / 3.0) < 1e-14);
    CHECK(std::abs(a(1)) < 1e-15);
    CHECK(std::abs(a(2) - 2.0 / 3.0 * std::sqrt(2.0 / 5.0)) < 1e-14);
    CHECK(max_coeff_diff(b1.reconstruct(a), x * x) < 1e-14);
  }
  SUBCASE("reconstruction is exact inside the span on a shifted box") {
    Eigen::VectorXd lo(2), hi(2);
    lo << 0.2, -3.0;
    hi << 0.4, -1.0;
    const BasisSet b(3, Domain(lo, hi));
    std::mt19937_64 rng(4);
    const Polynomial f = random_poly(2, 3, rng);
    CHECK(max_coeff_diff(b.reconstruct(b.project(f)), f) < 1e-9);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(basis.project(Polynomial::variable(3, 0)), ContractViolation);
  }
}

TEST_CASE("domain maps") {
  Eigen::VectorXd lo(2), hi(2);
  lo << -1.0, 2.0;
  hi << 3.0, 2.5;
  const Domain dom(lo, hi);
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.3, 2.1).finished();
  CHECK((dom.from_unit(dom.to_unit(x)) - x).norm() < 1e-15);
  CHECK(dom.contains(x));
  CHECK_FALSE(dom.contains(Eigen::VectorXd(Eigen::Vector2d(3.5, 2.1))));
  CHECK_THROWS_AS(Domain(hi, lo), ContractViolation);
}
