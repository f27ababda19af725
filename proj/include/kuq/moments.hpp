#pragma once

#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kuq/multi_index.hpp"
#include "kuq/polynomial.hpp"

namespace kuq {

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  /// Symmetric to 1e-12 (relative) and min eigenvalue >= -1e-10 trace.
  void validate() const;
};

/// Mean, covariance and (optionally) the full third and fourth central
/// moment tensors, stored flattened in row-major order.
struct CentralMomentSet {
  int order = 2;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::vector<double> skewness;
  std::vector<double> kurtosis;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  double skew(std::size_t i, std::size_t j, std::size_t k) const;
  double kurt(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const;
  /// Per-axis summaries: sqrt(P_jj), cbrt(S_jjj), Sigma_jjjj^(1/4).
  Eigen::VectorXd sigma() const;
  Eigen::VectorXd sigma_skew() const;
  Eigen::VectorXd sigma_kurt() const;
};

constexpr int kDefaultOrderCap = 8;

/// E[prod delta_i^alpha_i] for delta ~ N(0, P), with a call-scoped memo.
class IsserlisTable {
 public:
  explicit IsserlisTable(Eigen::MatrixXd covariance, int cap = kDefaultOrderCap);
  double moment(const MultiIndex& alpha);
  int cap() const { return cap_; }

 private:
  Eigen::MatrixXd P_;
  int cap_;
  std::unordered_map<MultiIndex, double, MultiIndexHash> memo_;
};

double isserlis_moment(const MultiIndex& alpha, const Eigen::MatrixXd& covariance, int cap = kDefaultOrderCap);

/// E[p(delta)] for delta ~ N(0, P), term by term over the monomials.
double expect_polynomial(const Polynomial& p, const Eigen::MatrixXd& covariance, int cap = kDefaultOrderCap);

/// Gaussian expectations of real polynomials in delta ~ N(0, P) through
/// whitening delta = S z and a probabilists' Hermite expansion in z, where
/// E[u v] = sum_alpha u_alpha v_alpha alpha!.
class GaussianExpectation {
 public:
  explicit GaussianExpectation(const Eigen::MatrixXd& covariance);

  using HermiteCoeffs = std::unordered_map<MultiIndex, double, MultiIndexHash>;
  HermiteCoeffs hermite(const Polynomial& p_of_delta) const;

  static double mean(const HermiteCoeffs& u);
  /// E[u v].
  static double product(const HermiteCoeffs& u, const HermiteCoeffs& v);
  /// E[(u - E u)(v - E v)].
  static double covariance(const HermiteCoeffs& u, const HermiteCoeffs& v);

  const Eigen::MatrixXd& whitening() const { return S_; }

 private:
  Eigen::MatrixXd S_;
};

struct MomentOptions {
  /// Highest monomial order (psi times the flow degree) accepted.
  int order_cap = kDefaultOrderCap;
};

/// Central moments up to order psi of flow(delta), delta ~ N(0, belief.P).
/// `flow` must be expressed in the deviation from belief.mean.
CentralMomentSet propagate_moments(const std::vector<Polynomial>& flow, const GaussianBelief& belief, int psi,
                                   const MomentOptions& options = {});

/// Gaussian moments of a belief (S = 0, kurtosis from Isserlis).
CentralMomentSet gaussian_moments(const GaussianBelief& belief, int psi);

nlohmann::json to_json(const CentralMomentSet& m);

}  // namespace kuq
