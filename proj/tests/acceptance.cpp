// Acceptance run: one PASS/FAIL line per criterion, diagnostics indented below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "cli.hpp"
#include "kuq/crtbp.hpp"
#include "kuq/filters.hpp"
#include "kuq/integrator.hpp"
#include "kuq/kof.hpp"
#include "kuq/koopman.hpp"
#include "kuq/moments.hpp"
#include "kuq/montecarlo.hpp"
#include "kuq/scenario.hpp"
#include "test_util.hpp"

using namespace kuq;
using namespace kuq::crtbp;
namespace fs = std::filesystem;

namespace {

constexpr double kMuEM = 0.012153281419431;
constexpr double kMuSE = 3.003410642560030e-06;

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> notes;
};

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

/// Every element of `got` matched to a distinct element of `want`.
bool same_multiset(std::vector<cplx> got, std::vector<cplx> want, double tol, double* worst) {
  *worst = 0.0;
  if (got.size() != want.size()) return false;
  for (const cplx& g : got) {
    auto best = want.end();
    double dist = std::numeric_limits<double>::infinity();
    for (auto it = want.begin(); it != want.end(); ++it) {
      if (std::abs(*it - g) < dist) {
        dist = std::abs(*it - g);
        best = it;
      }
    }
    *worst = std::max(*worst, dist);
    if (dist > tol) return false;
    want.erase(best);
  }
  return true;
}

Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const double em = solve_euler_quintic(kMuEM, LibrationPoint::kL1);
  const double se = solve_euler_quintic(kMuSE, LibrationPoint::kL1);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  const double e1 = std::abs(em - 0.150944856782713);
  const double e2 = std::abs(se - 0.009970325504020);
  o.pass = e1 <= 1e-12 && e2 <= 1e-12 && ms < 1.0;
  o.summary = "Euler quintic gamma: |err| EM " + fmt(e1) + ", SE " + fmt(e2) + " (tol 1e-12), both solves " +
              fmt(ms) + " ms (target < 1 ms)";
  return o;
}

Outcome criterion2() {
  Outcome o;
  o.pass = true;
  double worst_all = 0.0;
  for (int m = 2; m <= 4; ++m) {
    const VectorField f{{Polynomial::variable(1, 0) * cplx(-1.0)}, Domain::unit(1)};
    const KoopmanModel model = KoopmanModel::build(f, m);
    std::vector<cplx> want;
    for (int k = 0; k <= m; ++k) want.emplace_back(-k, 0.0);
    double worst = 0.0;
    o.pass = same_multiset(kuq::test::to_vector(model.lambda()), want, 1e-8, &worst) && o.pass;
    worst_all = std::max(worst_all, worst);
  }
  // z = x + i v obeys dz/dt = -i z, so z^a conj(z)^b has eigenvalue i (b - a).
  const Polynomial x = Polynomial::variable(2, 0);
  const Polynomial v = Polynomial::variable(2, 1);
  const VectorField osc{{v, -x}, Domain::unit(2)};
  for (int m = 2; m <= 4; ++m) {
    const KoopmanModel model = KoopmanModel::build(osc, m);
    std::vector<cplx> want;
    for (int a = 0; a <= m; ++a)
      for (int b = 0; a + b <= m; ++b) want.emplace_back(0.0, b - a);
    double worst = 0.0;
    o.pass = same_multiset(kuq::test::to_vector(model.lambda()), want, 1e-8, &worst) && o.pass;
    worst_all = std::max(worst_all, worst);
  }
  o.summary = "Koopman spectra of dx/dt = -x and the harmonic oscillator, degrees 2..4: worst eigenvalue error " +
              fmt(worst_all) + " (tol 1e-8)";
  return o;
}

Outcome criterion3() {
  Outcome o;
  const Scenario s = scenario_preset("linear-oscillator");
  const FlowMap map = build_flow_map(s);
  const FilterProblem prob = make_filter_problem(s, &map);
  std::mt19937_64 rng = run_engine(3, 0);
  const SimulatedRun sim = simulate(prob, prob.initial.mean, rng);
  const double dt = s.cadence;
  const Eigen::MatrixXd F = (s.A * dt).exp();

  std::vector<FilterState> kf{FilterState{0.0, prob.initial.mean, prob.initial.covariance}};
  for (const Observation& obs : sim.observations)
    kf.push_back(kalman_step(kf.back(), F, s.H, prob.measurement.R, obs.y, obs.t));

  o.pass = true;
  std::string detail;
  for (FilterMethod m : {FilterMethod::kKof, FilterMethod::kEkf, FilterMethod::kIkf, FilterMethod::kUkf}) {
    const auto steps = run_method(prob, m, sim.observations);
    if (steps.size() != kf.size()) {
      o.pass = false;
      detail += " " + to_string(m) + " step count mismatch;";
      continue;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < kf.size(); ++k)
      worst = std::max({worst, (steps[k].state.x - kf[k].x).norm(), (steps[k].state.P - kf[k].P).norm()});
    o.pass = o.pass && worst < 1e-8;
    detail += " " + to_string(m) + " " + fmt(worst);
  }
  o.summary = "linear 2-state scenario, " + std::to_string(sim.observations.size()) +
              " updates, max |estimate - KF| and |P - P_KF|:" + detail + " (tol 1e-8)";
  return o;
}

Outcome criterion4() {
  Outcome o;
  const Scenario s = scenario_preset("earth-moon-L1-halo");
  const FlowMap map = build_flow_map(s);
  const GaussianBelief b0 = s.initial_belief();
  const std::vector<double> times{0.2, 0.4, 0.6, 0.8, 1.0};
  const auto mc = propagation_monte_carlo(make_dynamics(s), b0, times, 2000, 2024);
  MomentOptions options;
  options.order_cap = std::max(kDefaultOrderCap, 2 * map.model().basis().max_degree());
  double worst_mean = 0.0, worst_sigma = 0.0, worst_mean_in_sigma = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const CentralMomentSet m = propagate_moments(map.shifted_state(times[k], b0.mean), b0, 2, options);
    const Eigen::VectorXd sig = m.sigma();
    double em = 0.0, es = 0.0, ems = 0.0;
    for (Eigen::Index i = 0; i < sig.size(); ++i) {
      em = std::max(em, std::abs(m.mean(i) - mc[k].mean(i)) / std::abs(mc[k].mean(i)));
      es = std::max(es, std::abs(sig(i) - mc[k].sigma(i)) / mc[k].sigma(i));
      ems = std::max(ems, std::abs(m.mean(i) - mc[k].mean(i)) / mc[k].sigma(i));
    }
    o.notes.push_back("t = " + fmt(times[k], 2) + ": max rel mean err " + fmt(em) + ", max rel sigma err " + fmt(es) +
                      ", max |mean err| / sigma_MC " + fmt(ems));
    worst_mean = std::max(worst_mean, em);
    worst_sigma = std::max(worst_sigma, es);
    worst_mean_in_sigma = std::max(worst_mean_in_sigma, ems);
  }
  o.pass = worst_mean <= 0.1 && worst_sigma <= 0.1;
  o.summary = "halo moments vs 2000-sample RK78 MC, t = 0.2..1.0: worst relative mean error " + fmt(worst_mean) +
              ", sigma error " + fmt(worst_sigma) + " (tol 0.1); mean offset <= " + fmt(worst_mean_in_sigma) +
              " sigma_MC";
  return o;
}

Outcome criterion5() {
  Outcome o;
  std::mt19937_64 rng(555);
  std::uniform_int_distribution<int> dim(1, 3), order(1, 6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int passed = 0;
  double worst_z = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = dim(rng);
    Eigen::MatrixXd A(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) A(i, j) = u(rng);
    const Eigen::MatrixXd P = A * A.transpose() / d + 0.2 * Eigen::MatrixXd::Identity(d, d);
    MultiIndex alpha(static_cast<std::size_t>(d));
    std::uniform_int_distribution<int> axis(0, d - 1);
    const int n_order = order(rng);
    for (int k = 0; k < n_order; ++k) {
      const auto i = static_cast<std::size_t>(axis(rng));
      alpha.set(i, alpha[i] + 1);
    }
    const GaussianSampler sampler(GaussianBelief{Eigen::VectorXd::Zero(d), P});
    std::mt19937_64 draw = run_engine(909, static_cast<std::uint64_t>(trial));
    const std::size_t n = 1000000;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::VectorXd x = sampler(draw);
      double v = 1.0;
      for (std::size_t i = 0; i < alpha.size(); ++i) v *= std::pow(x(static_cast<Eigen::Index>(i)), alpha[i]);
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / static_cast<double>(n);
    const double se = std::sqrt((s2 / static_cast<double>(n) - mean * mean) / static_cast<double>(n - 1));
    const double z = std::abs(isserlis_moment(alpha, P) - mean) / se;
    worst_z = std::max(worst_z, z);
    if (z <= 5.0) ++passed;
  }

  double analytic = 0.0;
  for (double sigma : {0.3, 1.0, 2.5}) {
    const Eigen::MatrixXd P1 = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
    const double want = 3.0 * std::pow(sigma, 4);
    analytic = std::max(analytic, std::abs(isserlis_moment(MultiIndex{4}, P1) - want) / want);
  }
  Eigen::MatrixXd P3(3, 3);
  P3 << 2.0, 0.3, -0.5, 0.3, 1.0, 0.2, -0.5, 0.2, 0.7;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      MultiIndex a(3);
      a.set(i, 1);
      a.set(j, a[j] + 1);
      const double want = P3(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      analytic = std::max(analytic, std::abs(isserlis_moment(a, P3) - want) / std::abs(want));
    }
  o.pass = passed == 20 && analytic <= 4 * std::numeric_limits<double>::epsilon();
  o.summary = "Isserlis vs 1e6-sample MC: " + std::to_string(passed) + "/20 within 5 SE (worst " + fmt(worst_z) +
              " SE); analytic E[d^4] and E[d_i d_j] max relative error " + fmt(analytic) + " (round-off only)";
  return o;
}

struct WindowRatio {
  double pos = 0.0;
  double vel = 0.0;
  bool finite = true;
};

/// Mean of the sigma_eff / sigma_pred ratios over the epochs with t >= t_min.
WindowRatio window_ratio(const MCReport& r, double t_min) {
  WindowRatio w;
  int count = 0;
  for (const MCEpoch& e : r.epochs) {
    if (e.t < t_min) continue;
    const double rp = e.sigma_pos_eff / e.sigma_pos_pred;
    const double rv = e.sigma_vel_eff / e.sigma_vel_pred;
    if (e.runs < 2 || !std::isfinite(rp) || !std::isfinite(rv)) w.finite = false;
    w.pos += rp;
    w.vel += rv;
    ++count;
  }
  if (count == 0) w.finite = false;
  w.pos /= std::max(count, 1);
  w.vel /= std::max(count, 1);
  return w;
}

Outcome criterion6() {
  Outcome o;
  const Scenario s = scenario_preset("sun-earth-L1-lyapunov");
  const std::size_t runs = 50;
  const std::uint64_t seed = 2023;
  const double steady = 0.5 * s.final_time;
  const FlowMap map = build_flow_map(s);
  const FilterProblem prob = make_filter_problem(s, &map);

  std::vector<MCReport> reports;
  for (FilterMethod m : {FilterMethod::kKof, FilterMethod::kEkf, FilterMethod::kIkf, FilterMethod::kUkf})
    reports.push_back(monte_carlo(prob, m, runs, seed));

  for (const MCReport& r : reports) {
    const WindowRatio w = window_ratio(r, steady);
    std::string line = r.method + ": " + std::to_string(r.failures.size()) + "/" + std::to_string(runs) +
                       " runs failed; steady-state (t >= " + fmt(steady) + ") sigma_eff/sigma_pred pos " +
                       fmt(w.pos) + ", vel " + fmt(w.vel);
    if (!r.failures.empty()) line += "; first failure: " + r.failures.front().message;
    o.notes.push_back(line);
  }

  const MCReport& kof = reports[0];
  const MCReport& ekf = reports[1];
  const WindowRatio wk = window_ratio(kof, steady);
  const WindowRatio we = window_ratio(ekf, steady);
  const bool ratios = wk.finite && wk.pos >= 0.5 && wk.pos <= 2.0 && wk.vel >= 0.5 && wk.vel <= 2.0;
  bool unbiased = true;
  for (const MCEpoch& e : kof.epochs) {
    if (e.t < steady) continue;
    if (e.runs < 2) unbiased = false;
    for (Eigen::Index i = 0; i < e.mean_error.size(); ++i)
      if (!(std::abs(e.mean_error(i)) <= 4.0 * e.sigma_eff(i) / std::sqrt(static_cast<double>(e.runs))))
        unbiased = false;
  }
  const bool ordering = wk.finite && we.finite && we.pos > wk.pos && we.vel > wk.vel;
  o.pass = ratios && unbiased && ordering;
  o.summary = std::string("Sun-Earth 50-run consistency: KOF ratios in [0.5, 2] ") + (ratios ? "yes" : "no") +
              ", KOF unbiased " + (unbiased ? "yes" : "no") + ", EKF ratio > KOF ratio " + (ordering ? "yes" : "no");

  // Early window before the truths leave the libration-point neighbourhood.
  FilterProblem early = prob;
  early.observation_times.clear();
  for (double t : prob.observation_times)
    if (t <= 1.2 + 1e-12) early.observation_times.push_back(t);
  for (FilterMethod m : {FilterMethod::kKof, FilterMethod::kEkf, FilterMethod::kUkf}) {
    const MCReport r = monte_carlo(early, m, runs, seed);
    std::string line = "early window t <= 1.2, " + r.method + " (" + std::to_string(r.failures.size()) + " failed):";
    for (const MCEpoch& e : r.epochs) {
      if (e.t == 0.0) continue;
      line += " t=" + fmt(e.t, 2) + " pos " + fmt(e.sigma_pos_eff / e.sigma_pos_pred) + " vel " +
              fmt(e.sigma_vel_eff / e.sigma_vel_pred) + ";";
    }
    o.notes.push_back(line);
  }

  const CRTBPParams params = CRTBPParams::make(s.mu, LibrationPoint::kL1);
  const std::vector<double> times{1.2, 2.0, 4.0, 6.0};
  try {
    const auto spread = propagation_monte_carlo(make_dynamics(s), s.initial_belief(), times, 2000, seed);
    std::string line = "unfiltered ensemble position sigma / gamma:";
    for (std::size_t k = 0; k < times.size(); ++k)
      line += " t=" + fmt(times[k], 2) + " " + fmt(spread[k].sigma.head(3).norm() / params.gamma);
    o.notes.push_back(line);
  } catch (const std::exception& e) {
    o.notes.push_back(std::string("unfiltered ensemble propagation failed: ") + e.what());
  }
  return o;
}

Outcome criterion7() {
  Outcome o;
  Vector6d x0;
  x0 << 0.823376807050253, 0.0, 0.001386166961157, 0.0, 0.126366690232230, 0.0;
  const OdeRhs rhs = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd { return full_rhs(Vector6d(x), kMuEM); };
  std::vector<double> times;
  for (int k = 1; k <= 40; ++k) times.push_back(0.05 * k);
  const Trajectory tr = rk78_integrate(rhs, x0, 0.0, times);
  const double C0 = jacobi_constant(x0, kMuEM);
  double drift = 0.0;
  for (const auto& x : tr.x) drift = std::max(drift, std::abs(jacobi_constant(Vector6d(x), kMuEM) - C0) / std::abs(C0));

  const CRTBPParams base = CRTBPParams::make(kMuEM, LibrationPoint::kL1, 2);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vector6d> pts;
  for (int k = 0; k < 100; ++k) {
    Vector6d v;
    for (int i = 0; i < 6; ++i) v(i) = n(rng);
    pts.push_back(1e-3 * v / v.norm());
  }
  std::vector<double> res;
  std::string listing;
  for (int N = 2; N <= 6; ++N) {
    CRTBPParams p = base;
    p.expansion_order = N;
    const VectorField f = polynomial_eom(p, Domain::unit(6));
    double worst = 0.0;
    for (const auto& x : pts) {
      const Vector6d fx = f.evaluate(x.cast<cplx>()).real();
      worst = std::max(worst, (fx - libration_full_rhs(x, p)).norm());
    }
    res.push_back(worst);
    listing += " N=" + std::to_string(N) + " " + fmt(worst);
  }
  bool drops = true;
  for (std::size_t k = 0; k + 1 < res.size(); ++k) {
    if (res[k + 1] < 1e-13) break;
    if (res[k] / res[k + 1] < 100.0) drops = false;
  }
  o.pass = drift < 1e-10 && drops;
  o.summary = "Jacobi relative drift over t = 2: " + fmt(drift) + " (tol 1e-10); eom residual at |x| = 1e-3 drops >= 100x per order " +
              (drops ? "yes" : "no") + ":" + listing;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion8() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("kuq_acceptance_" + std::to_string(::getpid()));
  o.pass = true;
  std::string detail;
  for (const std::string scenario : {"linear-oscillator", "sun-earth-L1-lyapunov"}) {
    std::vector<fs::path> dirs;
    for (int k = 0; k < 2; ++k) {
      const fs::path dir = root / (scenario + "_" + std::to_string(k));
      fs::remove_all(dir);
      std::ostringstream out, err;
      const int code = cli::run({"kuq", "compare", "--scenario", scenario, "--runs", "8", "--seed", "99", "--out",
                                 dir.string()},
                                out, err);
      if (code != cli::kExitOk) {
        o.pass = false;
        o.notes.push_back(scenario + ": compare exited with " + std::to_string(code) + ": " + err.str());
      }
      dirs.push_back(dir);
    }
    int files = 0;
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      if (slurp(entry.path()) != slurp(dirs[1] / entry.path().filename())) {
        o.pass = false;
        o.notes.push_back(scenario + ": " + entry.path().filename().string() + " differs");
      }
    }
    if (files == 0) o.pass = false;
    detail += " " + scenario + " (" + std::to_string(files) + " CSVs)";
  }
  fs::remove_all(root);
  o.summary = "compare twice with seed 99 gives byte-identical CSVs:" + detail;
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << k + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.summary << " ["
              << fmt(sec) << " s]" << std::endl;
    for (const auto& note : o.notes) std::cout << "    " << note << '\n';
    if (!o.pass) ++failed;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << " of " << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
