// epimn: simulate, filter, smooth and fit compartmental epidemic models.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "epimn/estimate.hpp"
#include "epimn/experiments.hpp"
#include "epimn/io.hpp"
#include "epimn/smc.hpp"

namespace {

using epimn::Error;
using epimn::ErrorCode;
using json = epimn::io::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

struct Run {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out_dir = ".";
  std::vector<std::string> outputs;
  json results = json::object();

  fs::path out(const std::string& name) {
    outputs.push_back(name);
    return out_dir / name;
  }
};

json section(const json& cfg, const char* key) {
  if (!cfg.contains(key)) return json::object();
  if (!cfg.at(key).is_object()) throw Error(ErrorCode::Config, std::string("'") + key + "' must be an object");
  return cfg.at(key);
}

std::string absolute_path(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::Config, std::string("missing '") + key + "'");
  return fs::absolute(j.at(key).get<std::string>()).lexically_normal().string();
}

std::vector<double> grid_from_json(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  const double from = j.at("from").get<double>(), to = j.at("to").get<double>(), step = j.at("step").get<double>();
  if (!(step > 0.0) || to < from) throw Error(ErrorCode::Config, "grid needs from <= to and step > 0");
  std::vector<double> g;
  const auto count = std::size_t(std::floor((to - from) / step + 1e-9)) + 1;
  for (std::size_t k = 0; k < count; ++k) g.push_back(from + double(k) * step);
  return g;
}

// ---- simulate -------------------------------------------------------------

void cmd_simulate(Run& run) {
  json& cfg = run.config;
  const epimn::ModelSpec spec = epimn::io::model_from_json(cfg.at("model"));
  const int horizon = cfg.value("horizon", 0);
  const bool until_extinction = cfg.value("until_extinction", false);
  cfg["horizon"] = horizon;
  cfg["until_extinction"] = until_extinction;
  if (horizon < 0) throw Error(ErrorCode::Config, "horizon must be nonnegative");

  std::optional<epimn::CountVector> x0;
  if (cfg.at("model").contains("x0")) {
    x0 = epimn::CountVector(
        epimn::IVec(Eigen::Map<const epimn::IVec>(cfg.at("model").at("x0").get<std::vector<std::int64_t>>().data(), spec.m)));
    if (x0->total() != spec.n) throw Error(ErrorCode::Config, "x0 must sum to n");
  }
  epimn::LatentTrajectory traj;
  if (until_extinction) {
    traj = epimn::simulate_until_extinction(spec, x0, run.seed, cfg.value("cap", epimn::kExtinctionCap));
  } else if (x0) {
    traj = epimn::simulate_latent(spec, *x0, horizon, run.seed);
  } else {
    traj = epimn::simulate_latent(spec, horizon, run.seed);
  }
  const epimn::io::ReportingSpec rep = epimn::io::reporting_from_json(cfg.at("reporting"), spec.m);
  const std::uint64_t obs_seed = epimn::stream_seed(run.seed, 1);
  if (rep.z_form) {
    epimn::ObservationsZ obs;
    obs.y = epimn::simulate_obs_z(traj, {rep.q_z}, obs_seed);
    obs.q.assign(obs.y.size(), rep.q_z);
    epimn::io::write_obs_z(run.out("observations.csv"), obs);
  } else {
    epimn::ObservationsX obs;
    obs.y = epimn::simulate_obs_x(traj, {rep.q_x}, obs_seed);
    obs.q.assign(obs.y.size(), rep.q_x);
    epimn::io::write_obs_x(run.out("observations.csv"), obs);
  }
  epimn::io::write_latent(run.out("latent.csv"), traj, epimn::family_compartment_names(spec.kernel.family));
  epimn::io::write_transitions(run.out("transitions.csv"), traj);
  run.results["horizon"] = traj.horizon();
}

// ---- filter / smooth ------------------------------------------------------

void filter_or_smooth(Run& run, bool smooth) {
  json& cfg = run.config;
  const epimn::ModelSpec spec = epimn::io::model_from_json(cfg.at("model"));
  const std::string form = cfg.value("form", std::string("z"));
  cfg["form"] = form;
  const std::string path = absolute_path(cfg, "observations");
  cfg["observations"] = path;
  const int horizon = cfg.value("horizon", -1);
  if (form == "z") {
    const auto obs = epimn::io::read_obs_z(path, spec.m, horizon);
    const auto trace = epimn::filter_z(spec, obs);
    epimn::io::write_filter_trace(run.out("filter_trace.csv"), trace);
    if (smooth) epimn::io::write_smooth_trace(run.out("smooth_trace.csv"), epimn::smooth_z(trace));
    run.results["loglik"] = trace.loglik;
    run.results["horizon"] = trace.horizon();
  } else if (form == "x") {
    const auto obs = epimn::io::read_obs_x(path, spec.m, horizon);
    const auto trace = epimn::filter_x(spec, obs);
    epimn::io::write_filter_trace(run.out("filter_trace.csv"), trace);
    if (smooth) epimn::io::write_smooth_trace(run.out("smooth_trace.csv"), epimn::smooth_x(trace, spec));
    run.results["loglik"] = trace.loglik;
    run.results["horizon"] = trace.horizon();
  } else {
    throw Error(ErrorCode::Config, "form must be 'x' or 'z'");
  }
}

// ---- Ebola fitting --------------------------------------------------------

epimn::EbolaData ebola_data_from_config(json& cfg) {
  json data = section(cfg, "data");
  const std::string path = absolute_path(data, "observations");
  data["observations"] = path;
  const auto n = data.value("n", epimn::kEbolaPopulation);
  const double t_star = data.value("t_star", 130.0);
  data["n"] = n;
  data["t_star"] = t_star;
  cfg["data"] = data;
  const epimn::ObservationsZ obs = epimn::io::read_obs_z(path, 4, data.value("horizon", -1));
  epimn::EbolaData d;
  d.n = n;
  d.pi0 = epimn::EbolaData::default_pi0(n);
  if (data.contains("x0")) {
    const auto x0 = data.at("x0").get<std::vector<std::int64_t>>();
    if (x0.size() != 4) throw Error(ErrorCode::Config, "data.x0 needs 4 entries");
    epimn::Vec v(4);
    for (int i = 0; i < 4; ++i) v[i] = double(x0[std::size_t(i)]) / double(n);
    if (x0[0] + x0[1] + x0[2] + x0[3] != n) throw Error(ErrorCode::Config, "data.x0 must sum to n");
    d.pi0 = epimn::ProbVector(v);
  }
  d.t_star = t_star;
  d.y = obs.y;
  for (const auto& q : obs.q) d.reported.push_back((q.array() > 0.0).cast<double>().matrix());
  return d;
}

epimn::EbolaParams params_from_json(const json& j, epimn::EbolaParams base) {
  base.beta = j.value("beta", base.beta);
  base.lambda = j.value("lambda", base.lambda);
  base.rho = j.value("rho", base.rho);
  base.gamma = j.value("gamma", base.gamma);
  base.q23 = j.value("q23", base.q23);
  base.q34 = j.value("q34", base.q34);
  return base;
}

json params_to_json(const epimn::EbolaParams& p) {
  return {{"beta", p.beta}, {"lambda", p.lambda}, {"rho", p.rho}, {"gamma", p.gamma},
          {"q23", p.q23},   {"q34", p.q34},       {"R0", p.r0()}};
}

void cmd_fit_em(Run& run) {
  json& cfg = run.config;
  const epimn::EbolaData data = ebola_data_from_config(cfg);
  json em = section(cfg, "em");
  const auto beta_grid = grid_from_json(em.value("beta_grid", json{{"from", 0.1}, {"to", 0.4}, {"step", 0.01}}));
  const auto lambda_grid = grid_from_json(em.value("lambda_grid", json{{"from", 0.05}, {"to", 0.5}, {"step", 0.01}}));
  const epimn::EbolaParams start =
      params_from_json(em.value("start", json::object()), {0.0, 0.0, 0.1, 0.1, 1.0, 1.0});
  epimn::EMOptions opts;
  opts.tolerance = em.value("tolerance", opts.tolerance);
  opts.max_iters = em.value("max_iters", opts.max_iters);
  opts.prefer_converged = em.value("prefer_converged", opts.prefer_converged);
  opts.safeguard = em.value("safeguard", opts.safeguard);
  em["beta_grid"] = beta_grid;
  em["lambda_grid"] = lambda_grid;
  em["start"] = {{"rho", start.rho}, {"gamma", start.gamma}, {"q23", start.q23}, {"q34", start.q34}};
  em["tolerance"] = opts.tolerance;
  em["max_iters"] = opts.max_iters;
  em["prefer_converged"] = opts.prefer_converged;
  em["safeguard"] = opts.safeguard;
  cfg["em"] = em;

  const epimn::ProfileFit fit = epimn::profile_em(data, beta_grid, lambda_grid, start, opts, run.threads);
  {
    std::ofstream out(run.out("em_grid.csv"));
    out << std::setprecision(12) << "beta,lambda,rho,gamma,q23,q34,loglik,iterations,converged,max_decrease,backtracks,stalled\n";
    for (const auto& g : fit.grid) {
      out << g.theta.beta << ',' << g.theta.lambda << ',' << g.theta.rho << ',' << g.theta.gamma << ','
          << g.theta.q23 << ',' << g.theta.q34 << ',' << g.loglik << ',' << g.iterations << ','
          << (g.converged ? 1 : 0) << ',' << g.max_decrease << ',' << g.backtracks << ','
          << (g.stalled ? 1 : 0) << '\n';
    }
  }
  int violations = 0;
  double max_decrease = 0.0;
  for (const auto& g : fit.grid) {
    violations += g.violations;
    max_decrease = std::max(max_decrease, g.max_decrease);
  }
  run.results["mle"] = params_to_json(fit.best.theta);
  run.results["loglik"] = fit.best.loglik;
  run.results["iterations"] = fit.best.iterations;
  run.results["converged"] = fit.best.converged;
  run.results["monotonicity_violations"] = violations;
  run.results["max_loglik_decrease"] = max_decrease;
}

epimn::PriorSpec prior_from_json(json& cfg) {
  if (!cfg.contains("prior")) cfg["prior"] = "vague";
  const json& j = cfg.at("prior");
  if (j.is_string()) return epimn::PriorSpec::preset(j.get<std::string>());
  epimn::PriorSpec p = epimn::PriorSpec::preset(j.value("preset", std::string("vague")));
  for (const auto& name : epimn::EbolaParams::names()) {
    if (!j.contains(name)) continue;
    const json& c = j.at(name);
    const std::string fam = c.at("family").get<std::string>();
    if (fam == "gamma") {
      p.components[name] = epimn::PriorComponent::gamma(c.at("shape").get<double>(), c.at("rate").get<double>());
    } else if (fam == "uniform") {
      p.components[name] = epimn::PriorComponent::uniform(c.value("lower", 0.0), c.value("upper", 1.0));
    } else {
      throw Error(ErrorCode::Config, "unknown prior family '" + fam + "'");
    }
  }
  return p;
}

void cmd_fit_mcmc(Run& run) {
  json& cfg = run.config;
  const epimn::EbolaData data = ebola_data_from_config(cfg);
  const epimn::PriorSpec prior = prior_from_json(cfg);
  json mc = section(cfg, "mcmc");
  epimn::MCMCConfig c;
  c.iterations = mc.value("iterations", 10000);
  c.burn_in = mc.value("burn_in", c.iterations / 5);
  c.thin = mc.value("thin", 1);
  c.proposal_sd = mc.value("proposal_sd", std::vector<double>{});
  c.tune = mc.value("tune", true);
  c.seed = run.seed;
  const int chains = mc.value("chains", 1);
  mc["iterations"] = c.iterations;
  mc["burn_in"] = c.burn_in;
  mc["thin"] = c.thin;
  mc["tune"] = c.tune;
  mc["chains"] = chains;
  std::optional<epimn::EbolaParams> init;
  if (mc.contains("init")) init = params_from_json(mc.at("init"), epimn::prior_mean_start(prior));
  cfg["mcmc"] = mc;

  const auto outs = epimn::mcmc_run_chains(data, prior, c, chains, run.threads, init ? &*init : nullptr);
  {
    std::ofstream out(run.out("mcmc_samples.csv"));
    out << std::setprecision(12) << "chain,sample";
    for (const auto& n : epimn::EbolaParams::names()) out << ',' << n;
    out << ",R0,log_post\n";
    for (std::size_t ch = 0; ch < outs.size(); ++ch) {
      const auto& o = outs[ch];
      for (std::size_t k = 0; k < o.samples.size(); ++k) {
        out << ch << ',' << k;
        for (Eigen::Index i = 0; i < o.samples[k].size(); ++i) out << ',' << o.samples[k][i];
        out << ',' << (o.r0.empty() ? 0.0 : o.r0[k]) << ',' << o.log_post[k] << '\n';
      }
    }
  }
  json chains_json = json::array();
  for (const auto& o : outs) {
    json cj;
    const epimn::Vec m = o.mean(), s = o.sd();
    for (std::size_t i = 0; i < o.names.size(); ++i) {
      cj["mean"][o.names[i]] = m.size() ? m[Eigen::Index(i)] : 0.0;
      cj["sd"][o.names[i]] = s.size() ? s[Eigen::Index(i)] : 0.0;
      cj["acceptance_rate"][o.names[i]] = o.acceptance_rate[Eigen::Index(i)];
      cj["proposal_sd"][o.names[i]] = o.proposal_sd[Eigen::Index(i)];
    }
    if (!o.r0.empty()) {
      double mean = 0.0;
      for (double r : o.r0) mean += r;
      cj["mean"]["R0"] = mean / double(o.r0.size());
    }
    cj["samples"] = o.samples.size();
    chains_json.push_back(cj);
  }
  run.results["chains"] = chains_json;
}

// ---- SMC ------------------------------------------------------------------

void cmd_smc(Run& run) {
  json& cfg = run.config;
  const epimn::ModelSpec spec = epimn::io::model_from_json(cfg.at("model"));
  const std::string path = absolute_path(cfg, "observations");
  cfg["observations"] = path;
  const auto obs = epimn::io::read_obs_z(path, spec.m, cfg.value("horizon", -1));
  json sj = section(cfg, "smc");
  epimn::SMCRunConfig c;
  c.sigma_v = sj.value("sigma_v", spec.theta.get_or("sigma_V", 0.1));
  c.beta0 = sj.value("beta0", spec.theta.get_or("beta", 1.0));
  c.n_part = sj.value("n_part", 3000);
  c.runs = sj.value("runs", 100);
  c.draws_per_run = sj.value("draws_per_run", 1);
  const std::string scheme = sj.value("resampling", std::string("multinomial"));
  if (scheme != "multinomial" && scheme != "systematic") throw Error(ErrorCode::Config, "unknown resampling scheme");
  c.options.resampling = scheme == "systematic" ? epimn::Resampling::Systematic : epimn::Resampling::Multinomial;
  c.seed = run.seed;
  c.threads = run.threads;
  sj["sigma_v"] = c.sigma_v;
  sj["beta0"] = c.beta0;
  sj["n_part"] = c.n_part;
  sj["runs"] = c.runs;
  sj["draws_per_run"] = c.draws_per_run;
  sj["resampling"] = scheme;
  cfg["smc"] = sj;

  json dj = section(cfg, "derived");
  epimn::DerivedParams d;
  d.gamma = dj.value("gamma", spec.theta.get("gamma"));
  d.kappa = dj.value("kappa", spec.theta.get_or("kappa", 6.0));
  d.q_w = dj.value("q_w", spec.theta.get_or("q_W", 0.00175));
  d.q_t = dj.value("q_t", spec.theta.get_or("q_T", 0.8));
  d.predictive_draws = dj.value("predictive_draws", 1);
  dj["gamma"] = d.gamma;
  dj["kappa"] = d.kappa;
  dj["q_w"] = d.q_w;
  dj["q_t"] = d.q_t;
  dj["predictive_draws"] = d.predictive_draws;
  cfg["derived"] = dj;

  const epimn::SMCRunsResult res = epimn::smc_runs(spec, obs, c);
  const auto summaries = epimn::derived_quantities(res.draws, spec.n, d, epimn::stream_seed(run.seed, 0xd1ce));
  {
    std::ofstream out(run.out("smc_summary.csv"));
    out << std::setprecision(12) << "series,t,mean,q025,q25,q75,q975\n";
    for (const auto& [name, b] : summaries)
      for (std::size_t t = 0; t < b.mean.size(); ++t)
        out << name << ',' << t + 1 << ',' << b.mean[t] << ',' << b.q025[t] << ',' << b.q25[t] << ','
            << b.q75[t] << ',' << b.q975[t] << '\n';
  }
  {
    std::ofstream out(run.out("smc_ess.csv"));
    out << std::setprecision(12) << "run,t,ess\n";
    for (std::size_t r = 0; r < res.ess.size(); ++r)
      for (std::size_t t = 0; t < res.ess[r].size(); ++t) out << r << ',' << t + 1 << ',' << res.ess[r][t] << '\n';
  }
  {
    std::ofstream out(run.out("smc_beta_draws.csv"));
    out << std::setprecision(12) << "draw,t,beta\n";
    for (std::size_t k = 0; k < res.draws.size(); ++k)
      for (std::size_t t = 0; t < res.draws[k].beta_tilde.size(); ++t)
        out << k << ',' << t + 1 << ',' << res.draws[k].beta_tilde[t] << '\n';
  }
  run.results["loglik_per_run"] = res.loglik;
  run.results["draws"] = res.draws.size();
}

// ---- bias / coverage ------------------------------------------------------

void cmd_bias_coverage(Run& run) {
  json& cfg = run.config;
  epimn::BiasCoverageConfig c;
  c.n_values = cfg.value("n_values", c.n_values);
  c.replicates = cfg.value("replicates", c.replicates);
  c.horizon = cfg.value("horizon", c.horizon);
  c.theta = params_from_json(cfg.value("theta", json::object()), c.theta);
  c.t_star = cfg.value("t_star", c.t_star);
  c.level = cfg.value("level", c.level);
  c.seed = run.seed;
  c.threads = run.threads;
  cfg["n_values"] = c.n_values;
  cfg["replicates"] = c.replicates;
  cfg["horizon"] = c.horizon;
  json th = params_to_json(c.theta);
  th.erase("R0");
  cfg["theta"] = th;
  cfg["t_star"] = c.t_star;
  cfg["level"] = c.level;

  const epimn::BiasCoverageResult r = epimn::bias_coverage(c);
  std::ofstream out(run.out("bias_coverage.csv"));
  out << std::setprecision(12) << "n,t,compartment,bias,coverage\n";
  for (const auto& cell : r.cells)
    out << cell.n << ',' << cell.t << ',' << cell.compartment + 1 << ',' << cell.bias << ',' << cell.coverage << '\n';
  run.results["max_abs_bias"] = r.max_abs_bias;
  run.results["min_coverage"] = r.min_coverage;
}

// ---- driver ---------------------------------------------------------------

int exit_code(epimn::ErrorCategory c) {
  switch (c) {
    case epimn::ErrorCategory::Config:
      return 2;
    case epimn::ErrorCategory::Data:
      return 3;
    default:
      return 4;
  }
}

void write_manifest(const Run& run, double seconds, int code = 0, const std::string& error = {}) {
  json m;
  m["status"] = code == 0 ? "ok" : "error";
  m["exit_code"] = code;
  if (code != 0) m["error"] = error;
  m["tool"] = "epimn";
  m["version"] = kVersion;
  m["command"] = run.command;
  m["seed"] = run.seed;
  m["threads"] = run.threads;
  m["seed_rule"] = "stream k of master seed s uses splitmix64(s ^ splitmix64(k + 1))";
  m["config"] = run.config;
  m["outputs"] = run.outputs;
  m["results"] = run.results;
  m["elapsed_seconds"] = seconds;
  epimn::io::write_json(run.out_dir / "manifest.json", m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multinomial filtering and smoothing for compartmental epidemic models"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  int threads = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config or a manifest from a previous run");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "simulate latent trajectories and observations"},
      {"filter", "run multinomial filtering"},
      {"smooth", "run filtering then backward smoothing"},
      {"fit-em", "profile-likelihood EM for the Ebola model"},
      {"fit-mcmc", "Metropolis-within-Gibbs for the Ebola model"},
      {"smc", "particle filter and backward sampler over beta_t"},
      {"bias-coverage", "filtering bias and credible-interval coverage study"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Run run;
  run.command = app.get_subcommands().front()->get_name();
  run.threads = threads;
  run.out_dir = out_dir;
  const auto started = std::chrono::steady_clock::now();
  // Failed runs still leave a manifest when the output directory is usable.
  auto fail = [&](int code, const std::string& what) {
    try {
      fs::create_directories(run.out_dir);
      write_manifest(run, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count(), code, what);
    } catch (...) {
    }
    return code;
  };
  try {
    json cfg = json::object();
    if (!config_path.empty()) cfg = epimn::io::read_json(config_path);
    if (cfg.contains("config") && cfg.contains("command")) {
      if (cfg.at("command") != run.command) throw Error(ErrorCode::Config, "manifest was written by another command");
      if (!seed && cfg.contains("seed")) seed = cfg.at("seed").get<std::uint64_t>();
      cfg = cfg.at("config");
    }
    if (!seed) seed = cfg.value("seed", std::uint64_t(0));
    run.seed = *seed;
    cfg.erase("seed");
    run.config = cfg;
    fs::create_directories(run.out_dir);

    if (run.command == "simulate") {
      cmd_simulate(run);
    } else if (run.command == "filter") {
      filter_or_smooth(run, false);
    } else if (run.command == "smooth") {
      filter_or_smooth(run, true);
    } else if (run.command == "fit-em") {
      cmd_fit_em(run);
    } else if (run.command == "fit-mcmc") {
      cmd_fit_mcmc(run);
    } else if (run.command == "smc") {
      cmd_smc(run);
    } else {
      cmd_bias_coverage(run);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(run, secs);
    std::cout << (run.out_dir / "manifest.json").string() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fail(exit_code(epimn::category(e.code())), e.what());
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return fail(2, e.what());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return fail(2, e.what());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fail(4, e.what());
  }
}
