#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kuq/filters.hpp"
#include "kuq/flow_map.hpp"
#include "kuq/kof.hpp"
#include "kuq/moments.hpp"

namespace kuq {

/// Per-component sample statistics with the N - 1 divisor:
///   sigma      = sqrt(sum e^2 / (N - 1))
///   sigma_skew = cbrt(sum e^3 / (N - 1))      (sign kept)
///   sigma_kurt = (sum e^4 / (N - 1))^(1/4)
/// where e is the deviation from the sample mean. With fewer than two
/// samples the sigmas are NaN.
struct SampleStatistics {
  std::size_t count = 0;
  Eigen::VectorXd mean;
  Eigen::VectorXd sigma;
  Eigen::VectorXd sigma_skew;
  Eigen::VectorXd sigma_kurt;
};

SampleStatistics sample_statistics(const std::vector<Eigen::VectorXd>& samples);

/// Counter-based stream: the engine state depends only on (seed, run).
std::mt19937_64 run_engine(std::uint64_t seed, std::uint64_t run);

/// x = mean + sqrt(P) z, z ~ N(0, I), with a symmetric square root.
class GaussianSampler {
 public:
  explicit GaussianSampler(const GaussianBelief& belief);
  Eigen::VectorXd operator()(std::mt19937_64& rng) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd root_;
};

/// Samples N(x0, P0), integrates each sample with RK7(8) and reports sample
/// statistics at every requested time.
std::vector<SampleStatistics> propagation_monte_carlo(const DynamicsModel& dynamics, const GaussianBelief& initial,
                                                      const std::vector<double>& times, std::size_t samples,
                                                      std::uint64_t seed, unsigned threads = 0);

enum class FilterMethod { kKof, kEkf, kIkf, kUkf };

FilterMethod parse_filter_method(const std::string& name);
std::string to_string(FilterMethod m);

/// Everything a filter Monte Carlo needs. `map` is required for the KOF only.
struct FilterProblem {
  DynamicsModel dynamics;
  MeasurementModel measurement;
  GaussianBelief initial;
  double t0 = 0.0;
  std::vector<double> observation_times;
  const FlowMap* map = nullptr;
  /// Scales the simulated measurement noise (0 gives noise-free data while
  /// the filters keep R).
  double simulation_noise_scale = 1.0;
  FilterConfig kof;
  IkfConfig ikf;
  UkfConfig ukf;
};

/// A truth trajectory and its noisy measurements.
struct SimulatedRun {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> truth;
  std::vector<Observation> observations;
};

/// Truth from x0 integrated to every observation time, measured with
/// N(0, R) noise.
SimulatedRun simulate(const FilterProblem& problem, const Eigen::VectorXd& x0, std::mt19937_64& rng);

/// One filter pass; the first step is the initial belief at t0.
std::vector<FilterStep> run_method(const FilterProblem& problem, FilterMethod method,
                                   const std::vector<Observation>& observations);

struct MCEpoch {
  double t = 0.0;
  /// Successful runs contributing to this epoch.
  std::size_t runs = 0;
  Eigen::VectorXd mean_error;
  Eigen::VectorXd sigma_eff;
  /// sqrt of the run-averaged filter variance.
  Eigen::VectorXd sigma_pred;
  Eigen::VectorXd sigma_skew;
  Eigen::VectorXd sigma_kurt;
  /// Position and velocity summaries: the state splits into halves and
  /// sigma = sqrt(sum of the component variances of that half).
  double sigma_pos_eff = 0.0;
  double sigma_vel_eff = 0.0;
  double sigma_pos_pred = 0.0;
  double sigma_vel_pred = 0.0;
};

struct MCRunFailure {
  std::size_t run = 0;
  std::string message;
};

struct MCReport {
  std::string method;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::vector<MCEpoch> epochs;
  std::vector<MCRunFailure> failures;
};

/// Filter Monte Carlo. Runs execute on `threads` workers (0 = hardware
/// concurrency); the reduction is done in run order so the report does not
/// depend on scheduling.
MCReport monte_carlo(const FilterProblem& problem, FilterMethod method, std::size_t runs, std::uint64_t seed,
                     unsigned threads = 0);

/// method,t,statistic,x_1..x_d with one row per epoch per statistic.
void write_report_csv(std::ostream& out, const MCReport& report);
nlohmann::json to_json(const MCReport& report);

/// method,t,runs,sigma_pos_pred,sigma_vel_pred,sigma_pos_eff,sigma_vel_eff.
void write_comparison_csv(std::ostream& out, const std::vector<MCReport>& reports);

}  // namespace kuq
