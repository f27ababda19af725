#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kuq/errors.hpp"
#include "kuq/moments.hpp"
#include "kuq/montecarlo.hpp"
#include "kuq/scenario.hpp"

#ifndef KUQ_VERSION
#define KUQ_VERSION "0.0.0"
#endif

namespace kuq::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string scenario = "earth-moon-L1-halo";
  std::string out_dir;
  std::uint64_t seed = 1;
  std::optional<int> max_degree;
  std::optional<int> order_n;
  std::optional<int> psi;
  std::optional<double> noise;
};

struct PropagateArgs {
  std::string model_path;
  std::string belief_path;
  std::vector<double> times;
  std::size_t mc_samples = 0;
};

struct FilterArgs {
  std::string model_path;
  std::string observations;
  bool simulate = false;
  double noise_scale = 1.0;
  std::string method = "kof";
};

struct CompareArgs {
  std::vector<std::string> methods{"kof", "ekf", "ikf", "ukf"};
  std::size_t runs = 50;
  unsigned threads = 0;
};

fs::path output_dir(const Common& c) {
  fs::path dir = c.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv(kOutDirEnv);
    dir = env != nullptr && *env != '\0' ? fs::path(env) : fs::path(".");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  f << text;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  }
}

Scenario scenario_with_overrides(const Common& c) {
  Scenario s = load_scenario(c.scenario);
  if (c.max_degree) s.max_degree = *c.max_degree;
  if (c.order_n) s.expansion_order = *c.order_n;
  if (c.psi) s.psi = *c.psi;
  if (c.noise) s.noise = *c.noise;
  s.validate();
  return s;
}

void write_manifest(const fs::path& dir, const std::string& command, const Common& c, const Scenario& s,
                    nlohmann::json parameters, const std::vector<std::string>& outputs) {
  nlohmann::json m;
  m["tool"] = "kuq";
  m["version"] = KUQ_VERSION;
  m["csv_schema"] = kCsvSchemaVersion;
  m["command"] = command;
  m["scenario"] = c.scenario;
  m["scenario_resolved"] = to_json(s);
  m["seed"] = c.seed;
  m["output_dir"] = dir.string();
  m["parameters"] = std::move(parameters);
  m["outputs"] = outputs;
  write_text(dir / ("manifest_" + command + ".json"), dump(m));
}

FlowMap load_or_build(const std::string& model_path, const Scenario& s) {
  if (!model_path.empty()) return flow_map_from_json(read_json(model_path));
  return build_flow_map(s);
}

void write_vector_cells(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << ',';
    if (std::isnan(v(i))) {
      out << "nan";
    } else {
      out << v(i);
    }
  }
}

std::string moments_header(std::size_t d) {
  std::ostringstream h;
  h << "t";
  for (const char* name : {"mean", "sigma", "sigma_skew", "sigma_kurt"}) {
    for (std::size_t i = 1; i <= d; ++i) h << ',' << name << '_' << i;
  }
  return h.str();
}

// ---------------------------------------------------------------- build

int cmd_build(const Common& c, std::ostream& out) {
  const Scenario s = scenario_with_overrides(c);
  const fs::path dir = output_dir(c);
  const FlowMap map = build_flow_map(s);
  nlohmann::json artifact = to_json(map);
  artifact["scenario"] = to_json(s);
  write_text(dir / "model.json", dump(artifact));
  const auto& diag = artifact.at("model").at("diagnostics");
  write_manifest(dir, "build", c, s, {{"max_degree", s.max_degree}, {"order_n", s.expansion_order}}, {"model.json"});
  out << "model: " << (dir / "model.json").string() << "\n"
      << "basis size: " << map.model().size() << "\n"
      << "condition number: " << diag.at("condition_number").get<double>() << "\n"
      << "eigen residual: " << diag.at("eigen_residual").get<double>() << "\n"
      << "inverse residual: " << diag.at("inverse_residual").get<double>() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------ propagate

GaussianBelief read_belief(const std::string& path) {
  const nlohmann::json j = read_json(path);
  try {
    GaussianBelief b;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<std::vector<double>>>();
    const auto d = static_cast<Eigen::Index>(mean.size());
    b.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    b.covariance.resize(d, d);
    if (static_cast<Eigen::Index>(cov.size()) != d) throw InputError("belief: covariance shape mismatch");
    for (Eigen::Index r = 0; r < d; ++r) {
      if (static_cast<Eigen::Index>(cov[static_cast<std::size_t>(r)].size()) != d) {
        throw InputError("belief: covariance shape mismatch");
      }
      for (Eigen::Index k = 0; k < d; ++k) b.covariance(r, k) = cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)];
    }
    b.validate();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("belief: ") + e.what());
  } catch (const ContractViolation& e) {
    throw InputError(std::string("belief: ") + e.what());
  }
}

int cmd_propagate(const Common& c, const PropagateArgs& a, std::ostream& out) {
  const Scenario s = scenario_with_overrides(c);
  const fs::path dir = output_dir(c);
  const FlowMap map = load_or_build(a.model_path, s);
  const GaussianBelief belief = a.belief_path.empty() ? s.initial_belief() : read_belief(a.belief_path);
  if (belief.dim() != map.dim()) throw InputError("belief dimension does not match the model");
  std::vector<double> times = a.times.empty() ? s.report_times : a.times;
  if (times.empty() || times.front() != 0.0) times.insert(times.begin(), 0.0);
  const int psi = s.psi;
  const std::size_t d = belief.dim();
  MomentOptions options;
  options.order_cap = std::max(kDefaultOrderCap, psi * map.model().basis().max_degree());

  std::ostringstream csv;
  csv << moments_header(d) << '\n' << std::setprecision(17);
  const Eigen::VectorXd nan = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), std::numeric_limits<double>::quiet_NaN());
  for (double t : times) {
    CentralMomentSet m;
    try {
      m = t == 0.0 ? gaussian_moments(belief, psi) : propagate_moments(map.shifted_state(t, belief.mean), belief, psi, options);
    } catch (const OrderCapError& e) {
      std::ostringstream msg;
      msg << "t = " << t << ": " << e.what();
      throw OrderCapError(msg.str());
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "t = " << t << ": " << e.what();
      throw NumericalError(msg.str());
    }
    csv << t;
    write_vector_cells(csv, m.mean);
    write_vector_cells(csv, m.sigma());
    write_vector_cells(csv, psi >= 3 ? m.sigma_skew() : nan);
    write_vector_cells(csv, psi >= 4 ? m.sigma_kurt() : nan);
    csv << '\n';
  }
  write_text(dir / "moments.csv", csv.str());
  std::vector<std::string> outputs{"moments.csv"};

  if (a.mc_samples > 0) {
    const auto stats = propagation_monte_carlo(make_dynamics(s), belief, times, a.mc_samples, c.seed);
    std::ostringstream mc;
    mc << moments_header(d) << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k < times.size(); ++k) {
      mc << times[k];
      write_vector_cells(mc, stats[k].mean);
      write_vector_cells(mc, stats[k].sigma);
      write_vector_cells(mc, stats[k].sigma_skew);
      write_vector_cells(mc, stats[k].sigma_kurt);
      mc << '\n';
    }
    write_text(dir / "moments_mc.csv", mc.str());
    outputs.push_back("moments_mc.csv");
  }
  write_manifest(dir, "propagate", c, s,
                 {{"model", a.model_path}, {"belief", a.belief_path}, {"times", times}, {"psi", psi},
                  {"mc_samples", a.mc_samples}},
                 outputs);
  out << "wrote " << (dir / "moments.csv").string() << " (" << times.size() << " epochs)\n";
  return kExitOk;
}

// --------------------------------------------------------------- filter

void write_truth_csv(std::ostream& out, const SimulatedRun& run) {
  const std::size_t d = run.truth.empty() ? 0 : static_cast<std::size_t>(run.truth.front().size());
  out << "t";
  for (std::size_t i = 1; i <= d; ++i) out << ",x_" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < run.t.size(); ++k) {
    out << run.t[k];
    write_vector_cells(out, run.truth[k]);
    out << '\n';
  }
}

int cmd_filter(const Common& c, const FilterArgs& a, std::ostream& out) {
  const Scenario s = scenario_with_overrides(c);
  const FilterMethod method = parse_filter_method(a.method);
  if (a.simulate == !a.observations.empty()) throw InputError("filter: give exactly one of --observations or --simulate");
  std::vector<Observation> observations;
  if (!a.simulate) {
    std::ifstream in(a.observations);
    if (!in) throw InputError("cannot open observation file '" + a.observations + "'");
    observations = read_observations(in);
  }
  const fs::path dir = output_dir(c);
  std::optional<FlowMap> map;
  if (method == FilterMethod::kKof) map = load_or_build(a.model_path, s);
  FilterProblem problem = make_filter_problem(s, map ? &*map : nullptr);
  problem.simulation_noise_scale = a.noise_scale;
  std::vector<std::string> outputs;
  if (a.simulate) {
    auto rng = run_engine(c.seed, 0);
    const Eigen::VectorXd x0 = GaussianSampler(problem.initial)(rng);
    const SimulatedRun sim = simulate(problem, x0, rng);
    observations = sim.observations;
    std::ostringstream truth, obs;
    write_truth_csv(truth, sim);
    write_observations(obs, observations, problem.measurement.size());
    write_text(dir / "truth.csv", truth.str());
    write_text(dir / "observations.csv", obs.str());
    outputs = {"truth.csv", "observations.csv"};
  }
  const std::vector<FilterStep> steps = run_method(problem, method, observations);
  std::ostringstream csv;
  write_filter_csv(csv, steps, problem.measurement.size());
  write_text(dir / "filter.csv", csv.str());
  outputs.push_back("filter.csv");
  write_manifest(dir, "filter", c, s,
                 {{"method", a.method}, {"model", a.model_path}, {"observations", a.observations},
                  {"simulate", a.simulate}, {"noise_scale", a.noise_scale}},
                 outputs);
  out << "wrote " << (dir / "filter.csv").string() << " (" << steps.size() << " epochs)\n";
  return kExitOk;
}

// -------------------------------------------------------------- compare

int cmd_compare(const Common& c, const CompareArgs& a, std::ostream& out, std::ostream& err) {
  const Scenario s = scenario_with_overrides(c);
  if (a.runs == 0) throw InputError("compare: --runs must be at least 1");
  std::vector<FilterMethod> methods;
  for (const auto& m : a.methods) methods.push_back(parse_filter_method(m));
  if (a.runs == 1) err << "warning: a single run leaves the sample standard deviation undefined; sigma_eff is NaN\n";
  const fs::path dir = output_dir(c);

  std::optional<FlowMap> map;
  std::string map_error;
  for (FilterMethod m : methods) {
    if (m != FilterMethod::kKof || map) continue;
    try {
      map = build_flow_map(s);
    } catch (const NumericalError& e) {
      map_error = e.what();
    }
  }
  const FilterProblem problem = make_filter_problem(s, map ? &*map : nullptr);

  std::vector<MCReport> reports;
  nlohmann::json summary;
  summary["scenario"] = s.name;
  summary["runs"] = a.runs;
  summary["seed"] = c.seed;
  summary["reports"] = nlohmann::json::array();
  std::vector<std::string> outputs{"compare.csv", "compare_summary.json"};
  for (FilterMethod m : methods) {
    MCReport r;
    if (m == FilterMethod::kKof && !map) {
      // The whole method failed before any run could start.
      r.method = to_string(m);
      r.runs = a.runs;
      r.seed = c.seed;
      for (std::size_t i = 0; i < a.runs; ++i) r.failures.push_back({i, "model build failed: " + map_error});
    } else {
      r = monte_carlo(problem, m, a.runs, c.seed, a.threads);
    }
    if (!r.failures.empty()) {
      err << "warning: " << r.method << ": " << r.failures.size() << " of " << a.runs
          << " runs failed (first: " << r.failures.front().message << ")\n";
    }
    std::ostringstream csv;
    write_report_csv(csv, r);
    const std::string name = "mc_" + r.method + ".csv";
    write_text(dir / name, csv.str());
    outputs.push_back(name);
    summary["reports"].push_back(to_json(r));
    reports.push_back(std::move(r));
  }
  std::ostringstream csv;
  write_comparison_csv(csv, reports);
  write_text(dir / "compare.csv", csv.str());
  write_text(dir / "compare_summary.json", dump(summary));
  write_manifest(dir, "compare", c, s, {{"methods", a.methods}, {"runs", a.runs}}, outputs);
  out << "wrote " << (dir / "compare.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Koopman-operator uncertainty propagation and filtering"};
  app.set_version_flag("--version", KUQ_VERSION);
  app.require_subcommand(1);

  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--scenario", common.scenario, "Preset name or scenario JSON file")->capture_default_str();
    sub->add_option("--out", common.out_dir, std::string("Output directory (default: $") + kOutDirEnv + " or .)");
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    sub->add_option("--max-degree", common.max_degree, "Legendre basis degree p");
    sub->add_option("--order-n", common.order_n, "CRTBP expansion order N");
    sub->add_option("--psi", common.psi, "Highest central moment order (2, 3 or 4)");
    sub->add_option("--noise", common.noise, "Measurement noise (arcsec for az/el, std for linear)");
  };

  CLI::App* build = app.add_subcommand("build", "Build and serialize the Koopman model of a scenario");
  add_common(build);

  PropagateArgs prop;
  CLI::App* propagate = app.add_subcommand("propagate", "Propagate central moments of the initial belief");
  add_common(propagate);
  propagate->add_option("--model", prop.model_path, "Model artifact from 'build' (built on the fly if absent)");
  propagate->add_option("--belief", prop.belief_path, "JSON belief {mean, covariance} (default: scenario)");
  propagate->add_option("--times", prop.times, "Report epochs (default: scenario)")->delimiter(',');
  propagate->add_option("--mc-samples", prop.mc_samples, "Also write RK7(8) Monte Carlo moments with this many samples");

  FilterArgs filt;
  CLI::App* filter = app.add_subcommand("filter", "Run a filter over observations");
  add_common(filter);
  filter->add_option("--model", filt.model_path, "Model artifact from 'build' (KOF only)");
  filter->add_option("--observations", filt.observations, "Observation CSV (t,y_1..y_q)");
  filter->add_flag("--simulate", filt.simulate, "Simulate truth and measurements internally");
  filter->add_option("--noise-scale", filt.noise_scale, "Scale of the simulated measurement noise")->capture_default_str();
  filter->add_option("--method", filt.method, "kof, ekf, ikf or ukf")->capture_default_str();

  CompareArgs cmp;
  CLI::App* compare = app.add_subcommand("compare", "Monte Carlo comparison of filters");
  add_common(compare);
  compare->add_option("--methods", cmp.methods, "Methods to compare")->delimiter(',')->capture_default_str();
  compare->add_option("--runs", cmp.runs, "Monte Carlo runs")->capture_default_str();
  compare->add_option("--threads", cmp.threads, "Worker threads (0: hardware concurrency)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  try {
    if (build->parsed()) return cmd_build(common, out);
    if (propagate->parsed()) return cmd_propagate(common, prop, out);
    if (filter->parsed()) return cmd_filter(common, filt, out);
    if (compare->parsed()) return cmd_compare(common, cmp, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace kuq::cli
