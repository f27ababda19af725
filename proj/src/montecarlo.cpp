#include "kuq/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

#include <boost/random/normal_distribution.hpp>
#include <Eigen/Eigenvalues>

#include "kuq/errors.hpp"

namespace kuq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Calls job(i) for i in [0, count) on a small pool. Each job writes only to
// its own slot.
template <class Job>
void parallel_for(std::size_t count, unsigned threads, Job job) {
  const unsigned n = worker_count(threads, count);
  if (n <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& th : pool) th.join();
}

Eigen::MatrixXd symmetric_root(const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()));
  const Eigen::VectorXd r = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd standard_normal(std::mt19937_64& rng, Eigen::Index n) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = dist(rng);
  return z;
}

double half_norm(const Eigen::VectorXd& variances, bool first) {
  const Eigen::Index h = variances.size() / 2;
  const Eigen::Index n = first ? h : variances.size() - h;
  return std::sqrt(first ? variances.head(n).sum() : variances.tail(n).sum());
}

}  // namespace

SampleStatistics sample_statistics(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) throw ContractViolation("sample_statistics: no samples");
  const Eigen::Index d = samples.front().size();
  SampleStatistics s;
  s.count = samples.size();
  s.mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : samples) {
    if (x.size() != d) throw ContractViolation("sample_statistics: samples differ in dimension");
    s.mean += x;
  }
  s.mean /= static_cast<double>(samples.size());
  if (samples.size() < 2) {
    s.sigma = s.sigma_skew = s.sigma_kurt = Eigen::VectorXd::Constant(d, kNaN);
    return s;
  }
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(d), m3 = m2, m4 = m2;
  for (const auto& x : samples) {
    const Eigen::ArrayXd e = (x - s.mean).array();
    const Eigen::ArrayXd e2 = e * e;
    m2.array() += e2;
    m3.array() += e2 * e;
    m4.array() += e2 * e2;
  }
  const double div = static_cast<double>(samples.size() - 1);
  s.sigma = (m2 / div).cwiseSqrt();
  s.sigma_skew = (m3 / div).unaryExpr([](double v) { return std::cbrt(v); });
  s.sigma_kurt = (m4 / div).unaryExpr([](double v) { return std::pow(v, 0.25); });
  return s;
}

std::mt19937_64 run_engine(std::uint64_t seed, std::uint64_t run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32)};
  return std::mt19937_64(seq);
}

GaussianSampler::GaussianSampler(const GaussianBelief& belief) {
  belief.validate();
  mean_ = belief.mean;
  root_ = symmetric_root(belief.covariance);
}

Eigen::VectorXd GaussianSampler::operator()(std::mt19937_64& rng) const {
  return mean_ + root_ * standard_normal(rng, mean_.size());
}

std::vector<SampleStatistics> propagation_monte_carlo(const DynamicsModel& dynamics, const GaussianBelief& initial,
                                                      const std::vector<double>& times, std::size_t samples,
                                                      std::uint64_t seed, unsigned threads) {
  if (samples == 0) throw ContractViolation("propagation_monte_carlo: need at least one sample");
  if (!std::is_sorted(times.begin(), times.end())) {
    throw ContractViolation("propagation_monte_carlo: times must be non-decreasing");
  }
  const GaussianSampler draw(initial);
  std::vector<std::vector<Eigen::VectorXd>> paths(samples);
  parallel_for(samples, threads, [&](std::size_t i) {
    auto rng = run_engine(seed, i);
    const Eigen::VectorXd x0 = draw(rng);
    const OdeRhs rhs = [&dynamics](double, const Eigen::VectorXd& x) { return dynamics.rhs(x); };
    paths[i] = rk78_integrate(rhs, x0, 0.0, times, dynamics.integrator).x;
  });
  std::vector<SampleStatistics> out;
  std::vector<Eigen::VectorXd> column(samples);
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t i = 0; i < samples; ++i) column[i] = paths[i][k];
    out.push_back(sample_statistics(column));
  }
  return out;
}

FilterMethod parse_filter_method(const std::string& name) {
  if (name == "kof") return FilterMethod::kKof;
  if (name == "ekf") return FilterMethod::kEkf;
  if (name == "ikf") return FilterMethod::kIkf;
  if (name == "ukf") return FilterMethod::kUkf;
  throw InputError("unknown filter method '" + name + "' (expected kof, ekf, ikf or ukf)");
}

std::string to_string(FilterMethod m) {
  switch (m) {
    case FilterMethod::kKof: return "kof";
    case FilterMethod::kEkf: return "ekf";
    case FilterMethod::kIkf: return "ikf";
    case FilterMethod::kUkf: return "ukf";
  }
  return "unknown";
}

SimulatedRun simulate(const FilterProblem& problem, const Eigen::VectorXd& x0, std::mt19937_64& rng) {
  SimulatedRun run;
  run.t.push_back(problem.t0);
  run.t.insert(run.t.end(), problem.observation_times.begin(), problem.observation_times.end());
  const OdeRhs rhs = [&problem](double, const Eigen::VectorXd& x) { return problem.dynamics.rhs(x); };
  run.truth = rk78_integrate(rhs, x0, problem.t0, run.t, problem.dynamics.integrator).x;
  const Eigen::MatrixXd noise_root = problem.simulation_noise_scale * symmetric_root(problem.measurement.R);
  for (std::size_t k = 1; k < run.t.size(); ++k) {
    const Eigen::VectorXd eta = noise_root * standard_normal(rng, noise_root.rows());
    run.observations.push_back({run.t[k], problem.measurement.h(run.truth[k]) + eta});
  }
  return run;
}

std::vector<FilterStep> run_method(const FilterProblem& problem, FilterMethod method,
                                   const std::vector<Observation>& observations) {
  const FilterState initial{problem.t0, problem.initial.mean, problem.initial.covariance};
  if (method == FilterMethod::kKof) {
    if (problem.map == nullptr) throw ContractViolation("run_method: the KOF needs a flow map");
    return run_filter(*problem.map, problem.measurement, initial, observations, problem.kof);
  }
  std::vector<FilterStep> steps;
  const Eigen::VectorXd no_innovation =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(problem.measurement.size()), kNaN);
  steps.push_back({initial, no_innovation, false});
  FilterState state = initial;
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const Observation& obs = observations[k];
    try {
      StepResult r;
      switch (method) {
        case FilterMethod::kEkf: r = ekf_step(state, problem.dynamics, problem.measurement, obs); break;
        case FilterMethod::kIkf: r = ikf_step(state, problem.dynamics, problem.measurement, obs, problem.ikf); break;
        case FilterMethod::kUkf: r = ukf_step(state, problem.dynamics, problem.measurement, obs, problem.ukf); break;
        case FilterMethod::kKof: break;
      }
      state = r.state;
      steps.push_back({state, r.innovation, obs.y.size() > 0});
    } catch (const NumericalError& e) {
      throw NumericalError(to_string(method) + " failed at t = " + std::to_string(obs.t) + ": " + e.what());
    }
  }
  return steps;
}

MCReport monte_carlo(const FilterProblem& problem, FilterMethod method, std::size_t runs, std::uint64_t seed,
                     unsigned threads) {
  if (runs == 0) throw ContractViolation("monte_carlo: need at least one run");
  if (!std::is_sorted(problem.observation_times.begin(), problem.observation_times.end())) {
    throw ContractViolation("monte_carlo: observation times must be non-decreasing");
  }
  problem.measurement.validate();
  const GaussianSampler draw(problem.initial);

  struct RunResult {
    bool ok = false;
    std::string message;
    std::vector<Eigen::VectorXd> errors;
    std::vector<Eigen::VectorXd> variances;
  };
  std::vector<RunResult> results(runs);
  parallel_for(runs, threads, [&](std::size_t i) {
    RunResult& res = results[i];
    try {
      auto rng = run_engine(seed, i);
      const Eigen::VectorXd x0 = draw(rng);
      const SimulatedRun sim = simulate(problem, x0, rng);
      const std::vector<FilterStep> steps = run_method(problem, method, sim.observations);
      for (std::size_t k = 0; k < steps.size(); ++k) {
        res.errors.push_back(steps[k].state.x - sim.truth[k]);
        res.variances.push_back(steps[k].state.P.diagonal());
      }
      res.ok = true;
    } catch (const std::exception& e) {
      res.message = e.what();
    }
  });

  MCReport report;
  report.method = to_string(method);
  report.runs = runs;
  report.seed = seed;
  for (std::size_t i = 0; i < runs; ++i) {
    if (!results[i].ok) report.failures.push_back({i, results[i].message});
  }
  const std::size_t epochs = problem.observation_times.size() + 1;
  const auto d = static_cast<Eigen::Index>(problem.initial.dim());
  for (std::size_t k = 0; k < epochs; ++k) {
    MCEpoch ep;
    ep.t = k == 0 ? problem.t0 : problem.observation_times[k - 1];
    std::vector<Eigen::VectorXd> errs;
    Eigen::VectorXd var_sum = Eigen::VectorXd::Zero(d);
    for (const auto& r : results) {
      if (!r.ok) continue;
      errs.push_back(r.errors[k]);
      var_sum += r.variances[k];
    }
    ep.runs = errs.size();
    if (errs.empty()) {
      ep.mean_error = ep.sigma_eff = ep.sigma_pred = ep.sigma_skew = ep.sigma_kurt = Eigen::VectorXd::Constant(d, kNaN);
      ep.sigma_pos_eff = ep.sigma_vel_eff = ep.sigma_pos_pred = ep.sigma_vel_pred = kNaN;
    } else {
      const SampleStatistics s = sample_statistics(errs);
      const Eigen::VectorXd mean_var = var_sum / static_cast<double>(errs.size());
      ep.mean_error = s.mean;
      ep.sigma_eff = s.sigma;
      ep.sigma_skew = s.sigma_skew;
      ep.sigma_kurt = s.sigma_kurt;
      ep.sigma_pred = mean_var.cwiseMax(0.0).cwiseSqrt();
      const Eigen::VectorXd eff_var = s.sigma.cwiseProduct(s.sigma);
      ep.sigma_pos_eff = half_norm(eff_var, true);
      ep.sigma_vel_eff = half_norm(eff_var, false);
      ep.sigma_pos_pred = half_norm(mean_var, true);
      ep.sigma_vel_pred = half_norm(mean_var, false);
    }
    report.epochs.push_back(std::move(ep));
  }
  return report;
}

namespace {

void write_value(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
  } else {
    out << v;
  }
}

}  // namespace

void write_report_csv(std::ostream& out, const MCReport& report) {
  const Eigen::Index d = report.epochs.empty() ? 0 : report.epochs.front().mean_error.size();
  out << "method,t,statistic";
  for (Eigen::Index i = 0; i < d; ++i) out << ",x_" << (i + 1);
  out << '\n' << std::setprecision(17);
  for (const auto& ep : report.epochs) {
    const std::pair<const char*, const Eigen::VectorXd*> rows[] = {{"mean_error", &ep.mean_error},
                                                                   {"sigma_eff", &ep.sigma_eff},
                                                                   {"sigma_pred", &ep.sigma_pred},
                                                                   {"sigma_skew", &ep.sigma_skew},
                                                                   {"sigma_kurt", &ep.sigma_kurt}};
    for (const auto& [name, v] : rows) {
      out << report.method << ',' << ep.t << ',' << name;
      for (Eigen::Index i = 0; i < d; ++i) {
        out << ',';
        write_value(out, (*v)(i));
      }
      out << '\n';
    }
  }
}

nlohmann::json to_json(const MCReport& report) {
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      a.push_back(std::isnan(v(i)) ? nlohmann::json(nullptr) : nlohmann::json(v(i)));
    }
    return a;
  };
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json j;
  j["method"] = report.method;
  j["runs"] = report.runs;
  j["seed"] = report.seed;
  j["failures"] = nlohmann::json::array();
  for (const auto& f : report.failures) j["failures"].push_back({{"run", f.run}, {"message", f.message}});
  j["epochs"] = nlohmann::json::array();
  for (const auto& ep : report.epochs) {
    j["epochs"].push_back({{"t", ep.t},
                           {"runs", ep.runs},
                           {"mean_error", vec(ep.mean_error)},
                           {"sigma_eff", vec(ep.sigma_eff)},
                           {"sigma_pred", vec(ep.sigma_pred)},
                           {"sigma_skew", vec(ep.sigma_skew)},
                           {"sigma_kurt", vec(ep.sigma_kurt)},
                           {"sigma_pos_eff", num(ep.sigma_pos_eff)},
                           {"sigma_vel_eff", num(ep.sigma_vel_eff)},
                           {"sigma_pos_pred", num(ep.sigma_pos_pred)},
                           {"sigma_vel_pred", num(ep.sigma_vel_pred)}});
  }
  return j;
}

void write_comparison_csv(std::ostream& out, const std::vector<MCReport>& reports) {
  out << "method,t,runs,sigma_pos_pred,sigma_vel_pred,sigma_pos_eff,sigma_vel_eff\n" << std::setprecision(17);
  for (const auto& r : reports) {
    for (const auto& ep : r.epochs) {
      out << r.method << ',' << ep.t << ',' << ep.runs;
      for (double v : {ep.sigma_pos_pred, ep.sigma_vel_pred, ep.sigma_pos_eff, ep.sigma_vel_eff}) {
        out << ',';
        write_value(out, v);
      }
      out << '\n';
    }
  }
}

}  // namespace kuq
