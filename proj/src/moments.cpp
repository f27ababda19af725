#include "kuq/moments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "kuq/errors.hpp"

namespace kuq {

void GaussianBelief::validate() const {
  const auto d = mean.size();
  if (covariance.rows() != d || covariance.cols() != d) throw ContractViolation("GaussianBelief: covariance shape mismatch");
  if (!mean.allFinite() || !covariance.allFinite()) throw ContractViolation("GaussianBelief: non-finite entries");
  if (d == 0) return;
  const double scale = std::max(1e-300, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ContractViolation("GaussianBelief: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * std::abs(covariance.trace())) {
    std::ostringstream msg;
    msg << "GaussianBelief: covariance is not positive semi-definite (min eigenvalue " << es.eigenvalues().minCoeff() << ")";
    throw ContractViolation(msg.str());
  }
}

namespace {

std::size_t flat(std::size_t d, std::initializer_list<std::size_t> idx) {
  std::size_t r = 0;
  for (auto i : idx) r = r * d + i;
  return r;
}

}  // namespace

double CentralMomentSet::skew(std::size_t i, std::size_t j, std::size_t k) const {
  if (order < 3) throw ContractViolation("CentralMomentSet: skewness not computed");
  return skewness[flat(dim(), {i, j, k})];
}

double CentralMomentSet::kurt(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
  if (order < 4) throw ContractViolation("CentralMomentSet: kurtosis not computed");
  return kurtosis[flat(dim(), {i, j, k, l})];
}

Eigen::VectorXd CentralMomentSet::sigma() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }

Eigen::VectorXd CentralMomentSet::sigma_skew() const {
  Eigen::VectorXd s(mean.size());
  for (std::size_t j = 0; j < dim(); ++j) s(j) = std::cbrt(skew(j, j, j));
  return s;
}

Eigen::VectorXd CentralMomentSet::sigma_kurt() const {
  Eigen::VectorXd s(mean.size());
  for (std::size_t j = 0; j < dim(); ++j) s(j) = std::pow(std::max(0.0, kurt(j, j, j, j)), 0.25);
  return s;
}

IsserlisTable::IsserlisTable(Eigen::MatrixXd covariance, int cap) : P_(std::move(covariance)), cap_(cap) {
  if (P_.rows() != P_.cols()) throw ContractViolation("IsserlisTable: covariance must be square");
  if (static_cast<std::size_t>(P_.rows()) > MultiIndex::kMaxDim) throw ContractViolation("IsserlisTable: dimension too large");
}

double IsserlisTable::moment(const MultiIndex& alpha) {
  if (alpha.size() != static_cast<std::size_t>(P_.rows())) throw ContractViolation("isserlis_moment: dimension mismatch");
  const int n = alpha.total_degree();
  if (n > cap_) {
    std::ostringstream msg;
    msg << "isserlis_moment: order " << n << " exceeds the cap " << cap_;
    throw OrderCapError(msg.str());
  }
  if (n == 0) return 1.0;
  if (n % 2 == 1) return 0.0;
  if (auto it = memo_.find(alpha); it != memo_.end()) return it->second;
  // Match the first factor with every remaining one.
  std::size_t i = 0;
  while (alpha[i] == 0) ++i;
  MultiIndex rest = alpha;
  rest.set(i, alpha[i] - 1);
  double sum = 0.0;
  for (std::size_t j = 0; j < rest.size(); ++j) {
    if (rest[j] == 0 || P_(i, j) == 0.0) continue;
    MultiIndex sub = rest;
    sub.set(j, rest[j] - 1);
    sum += rest[j] * P_(i, j) * moment(sub);
  }
  memo_.emplace(alpha, sum);
  return sum;
}

double isserlis_moment(const MultiIndex& alpha, const Eigen::MatrixXd& covariance, int cap) {
  IsserlisTable table(covariance, cap);
  return table.moment(alpha);
}

double expect_polynomial(const Polynomial& p, const Eigen::MatrixXd& covariance, int cap) {
  if (p.dim() != static_cast<std::size_t>(covariance.rows())) throw ContractViolation("expect_polynomial: dimension mismatch");
  const Polynomial r = p.real_part();
  IsserlisTable table(covariance, cap);
  double sum = 0.0;
  for (const auto& [k, c] : r.terms()) sum += c.real() * table.moment(k);
  return sum;
}

namespace {

// x^n = sum_k hermite_power[n][j] He_j(x).
constexpr int kMaxHermitePower = 48;

const std::vector<double>& hermite_power(int n) {
  if (n > kMaxHermitePower) throw OrderCapError("GaussianExpectation: exponent too large for the Hermite table");
  static const std::vector<std::vector<double>> table = [] {
    std::vector<std::vector<double>> t(kMaxHermitePower + 1);
    for (int m = 0; m <= kMaxHermitePower; ++m) {
      t[m].assign(m + 1, 0.0);
      // n! / (2^k k! (n - 2k)!) built up multiplicatively.
      double c = 1.0;
      for (int k = 0; 2 * k <= m; ++k) {
        t[m][m - 2 * k] = c;
        c *= static_cast<double>(m - 2 * k) * (m - 2 * k - 1) / (2.0 * (k + 1));
      }
    }
    return t;
  }();
  return table[n];
}

double factorial_weight(const MultiIndex& a) {
  double w = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int k = 2; k <= a[i]; ++k) w *= k;
  }
  return w;
}

void expand_term(const MultiIndex& alpha, double c, std::size_t axis, MultiIndex& current,
                 GaussianExpectation::HermiteCoeffs& out) {
  if (axis == alpha.size()) {
    out[current] += c;
    return;
  }
  const auto& row = hermite_power(alpha[axis]);
  for (int j = alpha[axis] % 2; j <= alpha[axis]; j += 2) {
    current.set(axis, j);
    expand_term(alpha, c * row[j], axis + 1, current, out);
  }
  current.set(axis, 0);
}

GaussianExpectation::HermiteCoeffs to_hermite(const Polynomial& p_of_z) {
  GaussianExpectation::HermiteCoeffs out;
  out.reserve(p_of_z.size() * 2);
  MultiIndex cur(p_of_z.dim());
  for (const auto& [k, c] : p_of_z.terms()) expand_term(k, c.real(), 0, cur, out);
  return out;
}

}  // namespace

GaussianExpectation::GaussianExpectation(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols()) throw ContractViolation("GaussianExpectation: covariance must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (covariance + covariance.transpose()));
  S_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

GaussianExpectation::HermiteCoeffs GaussianExpectation::hermite(const Polynomial& p_of_delta) const {
  if (p_of_delta.dim() != static_cast<std::size_t>(S_.rows())) throw ContractViolation("GaussianExpectation: dimension mismatch");
  const Polynomial z = p_of_delta.real_part().compose_affine(S_.cast<cplx>(), Eigen::VectorXcd::Zero(S_.rows()));
  return to_hermite(z);
}

double GaussianExpectation::mean(const HermiteCoeffs& u) {
  for (const auto& [k, c] : u) {
    if (k.total_degree() == 0) return c;
  }
  return 0.0;
}

double GaussianExpectation::product(const HermiteCoeffs& u, const HermiteCoeffs& v) {
  const HermiteCoeffs& small = u.size() <= v.size() ? u : v;
  const HermiteCoeffs& large = u.size() <= v.size() ? v : u;
  double sum = 0.0;
  for (const auto& [k, c] : small) {
    auto it = large.find(k);
    if (it != large.end()) sum += c * it->second * factorial_weight(k);
  }
  return sum;
}

double GaussianExpectation::covariance(const HermiteCoeffs& u, const HermiteCoeffs& v) {
  // The constant Hermite term carries the mean; dropping it avoids the
  // cancellation in E[uv] - E[u]E[v].
  const HermiteCoeffs& small = u.size() <= v.size() ? u : v;
  const HermiteCoeffs& large = u.size() <= v.size() ? v : u;
  double sum = 0.0;
  for (const auto& [k, c] : small) {
    if (k.total_degree() == 0) continue;
    auto it = large.find(k);
    if (it != large.end()) sum += c * it->second * factorial_weight(k);
  }
  return sum;
}

CentralMomentSet propagate_moments(const std::vector<Polynomial>& flow, const GaussianBelief& belief, int psi,
                                   const MomentOptions& options) {
  if (psi < 2 || psi > 4) throw ContractViolation("propagate_moments: unsupported order (psi must be 2, 3 or 4)");
  belief.validate();
  const std::size_t n = flow.size();
  int degree = 0;
  for (const auto& f : flow) {
    if (f.dim() != belief.dim()) throw ContractViolation("propagate_moments: flow and belief dimensions differ");
    degree = std::max(degree, f.degree());
  }
  if (psi * degree > options.order_cap) {
    std::ostringstream msg;
    msg << "propagate_moments: moment order " << psi * degree << " (psi " << psi << " x degree " << degree
        << ") exceeds the cap " << options.order_cap;
    throw OrderCapError(msg.str());
  }

  const GaussianExpectation ge(belief.covariance);
  const Eigen::MatrixXcd S = ge.whitening().cast<cplx>();
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(S.rows());

  CentralMomentSet out;
  out.order = psi;
  out.mean.resize(static_cast<Eigen::Index>(n));
  out.covariance.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  // Centred components in the whitened variable.
  std::vector<Polynomial> u;
  std::vector<GaussianExpectation::HermiteCoeffs> hu;
  for (std::size_t i = 0; i < n; ++i) {
    Polynomial z = flow[i].real_part().compose_affine(S, zero);
    auto h = to_hermite(z);
    const double m = GaussianExpectation::mean(h);
    out.mean(static_cast<Eigen::Index>(i)) = m;
    z -= Polynomial::constant(z.dim(), m);
    h = to_hermite(z);
    u.push_back(std::move(z));
    hu.push_back(std::move(h));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double c = GaussianExpectation::product(hu[i], hu[j]);
      out.covariance(i, j) = c;
      out.covariance(j, i) = c;
    }
  }
  if (psi == 2) return out;

  // Pair products u_i u_j, i <= j.
  std::vector<std::vector<GaussianExpectation::HermiteCoeffs>> pairs(n, std::vector<GaussianExpectation::HermiteCoeffs>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) pairs[i][j] = to_hermite(u[i] * u[j]);
  }

  out.skewness.assign(n * n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t k = j; k < n; ++k) {
        const double v = GaussianExpectation::product(pairs[i][j], hu[k]);
        std::array<std::size_t, 3> idx{i, j, k};
        do {
          out.skewness[flat(n, {idx[0], idx[1], idx[2]})] = v;
        } while (std::next_permutation(idx.begin(), idx.end()));
      }
    }
  }
  if (psi == 3) return out;

  out.kurtosis.assign(n * n * n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t k = j; k < n; ++k) {
        for (std::size_t l = k; l < n; ++l) {
          const double v = GaussianExpectation::product(pairs[i][j], pairs[k][l]);
          std::array<std::size_t, 4> idx{i, j, k, l};
          do {
            out.kurtosis[flat(n, {idx[0], idx[1], idx[2], idx[3]})] = v;
          } while (std::next_permutation(idx.begin(), idx.end()));
        }
      }
    }
  }
  return out;
}

CentralMomentSet gaussian_moments(const GaussianBelief& belief, int psi) {
  if (psi < 2 || psi > 4) throw ContractViolation("gaussian_moments: unsupported order (psi must be 2, 3 or 4)");
  belief.validate();
  const std::size_t n = belief.dim();
  CentralMomentSet out;
  out.order = psi;
  out.mean = belief.mean;
  out.covariance = belief.covariance;
  if (psi >= 3) out.skewness.assign(n * n * n, 0.0);
  if (psi >= 4) {
    out.kurtosis.assign(n * n * n * n, 0.0);
    const Eigen::MatrixXd& P = belief.covariance;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
          for (std::size_t l = 0; l < n; ++l)
            out.kurtosis[flat(n, {i, j, k, l})] = P(i, j) * P(k, l) + P(i, k) * P(j, l) + P(i, l) * P(j, k);
  }
  return out;
}

namespace {

nlohmann::json tensor_json(const std::vector<double>& data, std::size_t d, int rank) {
  return {{"shape", std::vector<std::size_t>(static_cast<std::size_t>(rank), d)}, {"data", data}};
}

}  // namespace

nlohmann::json to_json(const CentralMomentSet& m) {
  const std::size_t d = m.dim();
  nlohmann::json j;
  j["order"] = m.order;
  j["mean"] = std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size());
  std::vector<double> cov;
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) cov.push_back(m.covariance(r, c));
  j["covariance"] = tensor_json(cov, d, 2);
  if (m.order >= 3) j["skewness"] = tensor_json(m.skewness, d, 3);
  if (m.order >= 4) j["kurtosis"] = tensor_json(m.kurtosis, d, 4);
  return j;
}

}  // namespace kuq
