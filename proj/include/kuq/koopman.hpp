#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kuq/legendre.hpp"
#include "kuq/polynomial.hpp"

namespace kuq {

/// Polynomial dynamics dx/dt = f(x) together with the box the Galerkin basis
/// lives on.
struct VectorField {
  std::vector<Polynomial> components;
  Domain domain;

  std::size_t dim() const { return components.size(); }
  void validate() const;
  Eigen::VectorXcd evaluate(const Eigen::VectorXcd& x) const;
};

/// K_ij = <grad L_i . f, L_j>. Components of f with degree above the basis
/// degree are first replaced by their projection onto the basis.
Eigen::MatrixXcd build_koopman_matrix(const VectorField& f, const BasisSet& basis);

struct EigenOptions {
  /// Eigenvector matrices with a larger 2-norm condition number are treated
  /// as defective.
  double max_condition = 1e12;
  /// Above this condition number C is never inverted explicitly.
  double solve_threshold = 1e10;
};

/// Left eigen-structure C K = diag(lambda) C.
///
/// Rows of C are unit-norm left eigenvectors, ordered by real part
/// (descending), then imaginary part (descending, or by magnitude with
/// conjugate partners adjacent when K is real), then |lambda|.
struct Eigendecomposition {
  Eigen::MatrixXcd C;
  Eigen::VectorXcd lambda;
  Eigen::MatrixXcd C_inv;
  double condition = 1.0;
};

Eigendecomposition eigendecompose(const Eigen::MatrixXcd& K, const EigenOptions& options = {});

/// Observables projected on a basis: g(x) ~ A L(x).
struct ObservableSet {
  std::vector<Polynomial> observables;
  Eigen::MatrixXcd A;

  std::size_t size() const { return observables.size(); }
};

ObservableSet make_observables(std::vector<Polynomial> observables, const BasisSet& basis);
/// g(x) = x on the basis.
ObservableSet identity_observables(const BasisSet& basis);

/// The solved system: Koopman matrix on a Legendre basis and its
/// eigendecomposition. Immutable after construction.
class KoopmanModel {
 public:
  KoopmanModel() = default;
  KoopmanModel(BasisSet basis, Eigen::MatrixXcd K, const EigenOptions& options = {});
  static KoopmanModel build(const VectorField& f, int max_degree, const EigenOptions& options = {});

  const BasisSet& basis() const { return basis_; }
  std::size_t dim() const { return basis_.dim(); }
  std::size_t size() const { return basis_.size(); }
  const Eigen::MatrixXcd& K() const { return K_; }
  const Eigen::MatrixXcd& C() const { return eig_.C; }
  const Eigen::MatrixXcd& C_inv() const { return eig_.C_inv; }
  const Eigen::VectorXcd& lambda() const { return eig_.lambda; }
  double condition_number() const { return eig_.condition; }
  bool solves_against_C() const { return eig_.condition > solve_threshold_; }

  /// ||C K - diag(lambda) C||_inf / ||K||_inf (absolute when K = 0).
  double eigen_residual() const;
  /// ||C C_inv - I||_inf.
  double inverse_residual() const;

  /// B = A C^{-1}, q x m.
  Eigen::MatrixXcd modes(const ObservableSet& obs) const;
  /// Rows of A C^{-1} exp(Lambda t) C: basis coefficients of the flowed
  /// observables.
  Eigen::MatrixXcd flow_coefficients(const ObservableSet& obs, double t) const;

 private:
  BasisSet basis_;
  Eigen::MatrixXcd K_;
  Eigendecomposition eig_;
  double solve_threshold_ = 1e10;
};

/// Observables carried along the flow, as polynomials in the initial state x0:
/// A C^{-1} exp(Lambda t) C L(x0).
std::vector<Polynomial> flow_polynomial(const KoopmanModel& model, const ObservableSet& obs, double t);

/// Same map re-expressed in the deviation delta from `center`.
std::vector<Polynomial> shifted_flow(const KoopmanModel& model, const ObservableSet& obs, double t,
                                     const Eigen::VectorXd& center);

/// Real parts of a set of polynomials, after checking each imaginary residual.
std::vector<Polynomial> real_parts(const std::vector<Polynomial>& polys, double rel_tol = 1e-8);

/// Versioned JSON artifact: basis descriptor plus K, C and lambda.
nlohmann::json to_json(const KoopmanModel& model);
KoopmanModel koopman_model_from_json(const nlohmann::json& j, const EigenOptions& options = {});

/// Complex matrices as {"rows", "cols", "re": [...], "im": [...]} (row-major).
nlohmann::json matrix_to_json(const Eigen::MatrixXcd& M);
Eigen::MatrixXcd matrix_from_json(const nlohmann::json& j);

}  // namespace kuq
