#include <doctest.h>

#include <cmath>
#include <random>

#include "kuq/errors.hpp"
#include "kuq/moments.hpp"
#include "kuq/montecarlo.hpp"
#include "test_util.hpp"

using namespace kuq;

namespace {

struct McMoment {
  double mean;
  double stderr_;
};

/// Sample mean of prod delta_i^alpha_i with delta ~ N(0, P).
McMoment sampled_moment(const MultiIndex& alpha, const Eigen::MatrixXd& P, std::size_t n, std::uint64_t seed) {
  GaussianSampler sampler(GaussianBelief{Eigen::VectorXd::Zero(P.rows()), P});
  std::mt19937_64 rng(seed);
  double s = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::VectorXd x = sampler(rng);
    double v = 1.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) v *= std::pow(x(static_cast<Eigen::Index>(i)), alpha[i]);
    s += v;
    s2 += v * v;
  }
  const double mean = s / static_cast<double>(n);
  const double var = (s2 - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

Eigen::MatrixXd random_spd(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = u(rng);
  return A * A.transpose() / d + 0.2 * Eigen::MatrixXd::Identity(d, d);
}

Polynomial x1() { return Polynomial::variable(1, 0); }

}  // namespace

TEST_CASE("Isserlis analytic cases") {
  Eigen::MatrixXd P1(1, 1);
  P1 << 0.36;
  CHECK(isserlis_moment(MultiIndex{1}, P1) == 0.0);
  CHECK(isserlis_moment(MultiIndex{2}, P1) == doctest::Approx(0.36).epsilon(1e-15));
  CHECK(isserlis_moment(MultiIndex{4}, Eigen::MatrixXd::Identity(1, 1)) == 3.0);
  CHECK(isserlis_moment(MultiIndex{4}, P1) == doctest::Approx(3.0 * 0.36 * 0.36).epsilon(1e-15));
  CHECK(isserlis_moment(MultiIndex{6}, P1) == doctest::Approx(15.0 * std::pow(0.36, 3)).epsilon(1e-15));

  const double rho = 0.3;
  Eigen::MatrixXd P2(2, 2);
  P2 << 1.0, rho, rho, 1.0;
  CHECK(isserlis_moment(MultiIndex{1, 1}, P2) == doctest::Approx(rho).epsilon(1e-15));
  CHECK(isserlis_moment(MultiIndex{2, 2}, Eigen::MatrixXd::Identity(2, 2)) == 1.0);
  CHECK(isserlis_moment(MultiIndex{2, 2}, P2) == doctest::Approx(1.0 + 2.0 * rho * rho).epsilon(1e-15));
  const McMoment mc = sampled_moment(MultiIndex{2, 2}, P2, 1000000, 17);
  CHECK(std::abs(mc.mean - (1.0 + 2.0 * rho * rho)) < 5.0 * mc.stderr_);

  Eigen::MatrixXd P3 = Eigen::MatrixXd::Random(3, 3);
  P3 = P3 * P3.transpose();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      MultiIndex a(3);
      a.set(static_cast<std::size_t>(i), 1);
      a.set(static_cast<std::size_t>(j), a[static_cast<std::size_t>(j)] + 1);
      CHECK(isserlis_moment(a, P3) == doctest::Approx(P3(i, j)).epsilon(1e-14));
    }
}

TEST_CASE("Isserlis against sampling for random multi-indices") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 3);
  for (int trial = 0; trial < 8; ++trial) {
    const int d = dim(rng);
    const Eigen::MatrixXd P = random_spd(d, rng);
    MultiIndex a(static_cast<std::size_t>(d));
    std::uniform_int_distribution<int> ax(0, d - 1);
    const int order = 2 + 2 * (trial % 3);
    for (int k = 0; k < order; ++k) {
      const auto i = static_cast<std::size_t>(ax(rng));
      a.set(i, a[i] + 1);
    }
    const McMoment mc = sampled_moment(a, P, 200000, 100 + static_cast<std::uint64_t>(trial));
    CHECK(std::abs(isserlis_moment(a, P) - mc.mean) < 5.0 * mc.stderr_);
  }
}

TEST_CASE("order cap") {
  CHECK_THROWS_AS(isserlis_moment(MultiIndex{10}, Eigen::MatrixXd::Identity(1, 1)), OrderCapError);
  CHECK_THROWS_AS(expect_polynomial(x1().pow(9), Eigen::MatrixXd::Identity(1, 1)), OrderCapError);
  CHECK(isserlis_moment(MultiIndex{10}, Eigen::MatrixXd::Identity(1, 1), 10) == 945.0);
}

TEST_CASE("expect_polynomial") {
  const double s2 = 0.25;
  Eigen::MatrixXd P(1, 1);
  P << s2;
  CHECK(expect_polynomial(Polynomial::constant(1, 3.5), P) == 3.5);
  CHECK(expect_polynomial(x1() * x1(), P) == doctest::Approx(s2).epsilon(1e-15));
  const Polynomial p = (Polynomial::constant(1, 1.0) + x1()).pow(3);
  CHECK(expect_polynomial(p, P) == doctest::Approx(1.0 + 3.0 * s2).epsilon(1e-15));

  SUBCASE("odd monomials contribute nothing") {
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd P3 = random_spd(3, rng);
    for (const auto& a : graded_indices(3, 7)) {
      if (a.total_degree() % 2 == 1) CHECK(expect_polynomial(Polynomial::monomial(a, 1.7), P3) == 0.0);
    }
  }
}

TEST_CASE("Hermite route agrees with Isserlis") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::MatrixXd P = random_spd(3, rng);
  Polynomial a(3), b(3);
  for (const auto& e : graded_indices(3, 3)) {
    a.add_term(e, u(rng));
    b.add_term(e, u(rng));
  }
  a.cleanup();
  b.cleanup();
  const GaussianExpectation ge(P);
  const auto ha = ge.hermite(a);
  const auto hb = ge.hermite(b);
  const double ea = expect_polynomial(a, P);
  const double eb = expect_polynomial(b, P);
  CHECK(GaussianExpectation::mean(ha) == doctest::Approx(ea).epsilon(1e-12));
  CHECK(GaussianExpectation::product(ha, hb) == doctest::Approx(expect_polynomial(a * b, P)).epsilon(1e-12));
  CHECK(GaussianExpectation::covariance(ha, hb) ==
        doctest::Approx(expect_polynomial(a * b, P) - ea * eb).epsilon(1e-11));
}

TEST_CASE("propagate_moments") {
  SUBCASE("identity flow returns the Gaussian moments") {
    std::mt19937_64 rng(3);
    const GaussianBelief b{kuq::test::vec({0.1, -0.2, 0.3}), random_spd(3, rng)};
    std::vector<Polynomial> flow;
    for (std::size_t i = 0; i < 3; ++i)
      flow.push_back(Polynomial::variable(3, i) + Polynomial::constant(3, b.mean(static_cast<Eigen::Index>(i))));
    const CentralMomentSet m = propagate_moments(flow, b, 4);
    const CentralMomentSet g = gaussian_moments(b, 4);
    CHECK((m.mean - b.mean).norm() < 1e-14);
    CHECK((m.covariance - b.covariance).norm() < 1e-13);
    for (double s : m.skewness) CHECK(std::abs(s) < 1e-14);
    for (std::size_t k = 0; k < m.kurtosis.size(); ++k) CHECK(std::abs(m.kurtosis[k] - g.kurtosis[k]) < 1e-12);
  }
  SUBCASE("linear flows are exact") {
    std::mt19937_64 rng(4);
    const GaussianBelief b{kuq::test::vec({0.5, -1.0}), random_spd(2, rng)};
    Eigen::MatrixXd L(3, 2);
    L << 1.0, 2.0, -0.5, 0.3, 0.0, 1.5;
    const Eigen::VectorXd off = kuq::test::vec({0.1, 0.2, -0.3});
    std::vector<Polynomial> flow;
    for (int i = 0; i < 3; ++i) {
      Polynomial f = Polynomial::constant(2, off(i) + L.row(i).dot(b.mean));
      for (int j = 0; j < 2; ++j) f += Polynomial::variable(2, static_cast<std::size_t>(j)) * cplx(L(i, j));
      flow.push_back(f);
    }
    const CentralMomentSet m = propagate_moments(flow, b, 4);
    const Eigen::MatrixXd Pf = L * b.covariance * L.transpose();
    CHECK((m.mean - (off + L * b.mean)).norm() < 1e-10);
    CHECK((m.covariance - Pf).norm() < 1e-10);
    for (double s : m.skewness) CHECK(std::abs(s) < 1e-10);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 3; ++k)
          for (std::size_t l = 0; l < 3; ++l) {
            const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
            const auto K = static_cast<Eigen::Index>(k), Lx = static_cast<Eigen::Index>(l);
            const double iss = Pf(I, J) * Pf(K, Lx) + Pf(I, K) * Pf(J, Lx) + Pf(I, Lx) * Pf(J, K);
            CHECK(std::abs(m.kurt(i, j, k, l) - iss) < 1e-10);
          }
  }
  SUBCASE("scalar decay") {
    const double s = 0.3, t = 0.8;
    const GaussianBelief b{kuq::test::vec({0.0}), Eigen::MatrixXd::Constant(1, 1, s * s)};
    const CentralMomentSet m = propagate_moments({x1() * cplx(std::exp(-t))}, b, 4);
    CHECK(std::abs(m.mean(0)) < 1e-15);
    CHECK(m.covariance(0, 0) == doctest::Approx(s * s * std::exp(-2 * t)).epsilon(1e-14));
    CHECK(m.skew(0, 0, 0) == 0.0);
    CHECK(m.kurt(0, 0, 0, 0) == doctest::Approx(3 * std::pow(s, 4) * std::exp(-4 * t)).epsilon(1e-14));
  }
  SUBCASE("chi-square with one degree of freedom") {
    const GaussianBelief b{kuq::test::vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
    const CentralMomentSet m = propagate_moments({x1() * x1()}, b, 4);
    CHECK(m.mean(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.covariance(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(m.skew(0, 0, 0) == doctest::Approx(8.0).epsilon(1e-14));
    CHECK(m.kurt(0, 0, 0, 0) == doctest::Approx(60.0).epsilon(1e-14));
  }
  SUBCASE("random cubic flows against sampling") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const Eigen::MatrixXd P = 0.1 * random_spd(2, rng);
    const GaussianBelief b{Eigen::VectorXd::Zero(2), P};
    std::vector<Polynomial> flow(2, Polynomial(2));
    for (auto& f : flow) {
      for (const auto& e : graded_indices(2, 3)) f.add_term(e, u(rng));
      f.cleanup();
    }
    const CentralMomentSet m = propagate_moments(flow, b, 2);
    GaussianSampler sampler(b);
    std::mt19937_64 g(5);
    const std::size_t n = 1000000;
    std::vector<Eigen::VectorXd> ys;
    ys.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::VectorXd x = sampler(g);
      ys.push_back(kuq::test::vec({flow[0].evaluate(x).real(), flow[1].evaluate(x).real()}));
    }
    const SampleStatistics st = sample_statistics(ys);
    for (int i = 0; i < 2; ++i) {
      const double se_mean = st.sigma(i) / std::sqrt(double(n));
      CHECK(std::abs(m.mean(i) - st.mean(i)) < 5.0 * se_mean);
      // Variance standard error from the fourth central moment of the samples.
      double m4 = 0.0;
      for (const auto& y : ys) m4 += std::pow(y(i) - st.mean(i), 4);
      m4 /= double(n);
      const double var = st.sigma(i) * st.sigma(i);
      const double se_var = std::sqrt((m4 - var * var) / double(n));
      CHECK(std::abs(m.covariance(i, i) - var) < 5.0 * se_var);
    }
  }
  SUBCASE("tensors are permutation symmetric") {
    const GaussianBelief b{Eigen::VectorXd::Zero(2), 0.1 * Eigen::MatrixXd::Identity(2, 2)};
    const Polynomial x = Polynomial::variable(2, 0), y = Polynomial::variable(2, 1);
    const CentralMomentSet m = propagate_moments({x + x * y, y - 0.5 * (x * x)}, b, 4);
    CHECK(m.skew(0, 1, 1) == m.skew(1, 0, 1));
    CHECK(m.skew(0, 1, 1) == m.skew(1, 1, 0));
    CHECK(m.kurt(0, 1, 0, 1) == m.kurt(1, 1, 0, 0));
    CHECK(m.kurt(0, 0, 0, 1) == m.kurt(1, 0, 0, 0));
  }
  SUBCASE("unsupported order and bad covariance") {
    const GaussianBelief b{kuq::test::vec({0.0}), Eigen::MatrixXd::Identity(1, 1)};
    CHECK_THROWS_AS(propagate_moments({x1()}, b, 5), ContractViolation);
    const GaussianBelief bad{kuq::test::vec({0.0}), Eigen::MatrixXd::Constant(1, 1, -1.0)};
    CHECK_THROWS_AS(propagate_moments({x1()}, bad, 2), ContractViolation);
  }
}
