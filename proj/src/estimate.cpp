#include "epimn/estimate.hpp"

#include <cmath>
#include <limits>

#include "epimn/parallel.hpp"

namespace epimn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

Vec EbolaParams::to_vec() const {
  Vec v(6);
  v << beta, lambda, rho, gamma, q23, q34;
  return v;
}

EbolaParams EbolaParams::from_vec(const Vec& v) {
  if (v.size() != 6) throw Error(ErrorCode::ShapeMismatch, "Ebola parameter vector needs 6 entries");
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

ParamRecord EbolaParams::to_record(double t_star, double h) const {
  ParamRecord r;
  declare_family_constraints("ebola", r);
  r.set("beta", beta);
  r.set("lambda", lambda);
  r.set("rho", rho);
  r.set("gamma", gamma);
  r.set("q23", q23);
  r.set("q34", q34);
  r.set("t_star", t_star);
  r.set("h", h);
  return r;
}

EbolaParams EbolaParams::from_record(const ParamRecord& theta) {
  return {theta.get("beta"), theta.get("lambda"), theta.get("rho"),
          theta.get("gamma"), theta.get_or("q23", 1.0), theta.get_or("q34", 1.0)};
}

const std::vector<std::string>& EbolaParams::names() {
  static const std::vector<std::string> n{"beta", "lambda", "rho", "gamma", "q23", "q34"};
  return n;
}

ProbVector EbolaData::default_pi0(std::int64_t n) {
  const double e = 1.0 / double(n);
  return ProbVector(Vec((Vec(4) << 1.0 - e, e, 0.0, 0.0).finished()));
}

EbolaData EbolaData::from_series(std::int64_t n, const std::vector<std::int64_t>& cases,
                                 const std::vector<std::int64_t>& deaths, double t_star) {
  if (cases.size() != deaths.size()) throw Error(ErrorCode::ShapeMismatch, "case and death series differ in length");
  EbolaData d;
  d.n = n;
  d.pi0 = default_pi0(n);
  d.t_star = t_star;
  for (std::size_t t = 0; t < cases.size(); ++t) {
    IMat y = IMat::Zero(4, 4);
    Mat r = Mat::Zero(4, 4);
    if (cases[t] >= 0) {
      y(kCaseFrom, kCaseTo) = cases[t];
      r(kCaseFrom, kCaseTo) = 1.0;
    }
    if (deaths[t] >= 0) {
      y(kDeathFrom, kDeathTo) = deaths[t];
      r(kDeathFrom, kDeathTo) = 1.0;
    }
    d.y.emplace_back(std::move(y));
    d.reported.push_back(std::move(r));
  }
  return d;
}

ModelSpec ebola_model(const EbolaData& data, const EbolaParams& theta) {
  return make_model(kernel_family("ebola"), data.n, data.pi0, theta.to_record(data.t_star, data.h));
}

ObservationsZ ebola_observations(const EbolaData& data, const EbolaParams& theta) {
  if (data.reported.size() != data.y.size()) throw Error(ErrorCode::ShapeMismatch, "reporting mask length differs");
  ObservationsZ obs;
  obs.y = data.y;
  obs.q.reserve(data.y.size());
  for (const Mat& r : data.reported) {
    Mat q = Mat::Zero(4, 4);
    q(kCaseFrom, kCaseTo) = r(kCaseFrom, kCaseTo) > 0.0 ? theta.q23 : 0.0;
    q(kDeathFrom, kDeathTo) = r(kDeathFrom, kDeathTo) > 0.0 ? theta.q34 : 0.0;
    obs.q.push_back(std::move(q));
  }
  return obs;
}

double ebola_loglik(const EbolaData& data, const EbolaParams& theta) {
  return loglik_z(ebola_model(data, theta), ebola_observations(data, theta));
}

EbolaMStep ebola_m_step(const SmoothTraceZ& smooth, const std::vector<CountMatrix>& y,
                        const std::vector<Mat>& reported, std::int64_t n, double h) {
  const int t = smooth.horizon();
  if (int(y.size()) != t || int(reported.size()) != t) {
    throw Error(ErrorCode::ShapeMismatch, "smoothing horizon differs from data");
  }
  double p22 = 0.0, p23 = 0.0, p33 = 0.0, p34 = 0.0;
  double rep23 = 0.0, rep34 = 0.0, y23 = 0.0, y34 = 0.0;
  for (int s = 1; s <= t; ++s) {
    const JointMatrix& p = smooth.at(s);
    const auto k = std::size_t(s - 1);
    p22 += p(1, 1);
    p23 += p(1, 2);
    p33 += p(2, 2);
    p34 += p(2, 3);
    if (reported[k](kCaseFrom, kCaseTo) > 0.0) {
      rep23 += p(kCaseFrom, kCaseTo);
      y23 += double(y[k](kCaseFrom, kCaseTo));
    }
    if (reported[k](kDeathFrom, kDeathTo) > 0.0) {
      rep34 += p(kDeathFrom, kDeathTo);
      y34 += double(y[k](kDeathFrom, kDeathTo));
    }
  }
  if (p22 <= 0.0) throw Error(ErrorCode::ZeroExpectedCount, "no expected E -> E transitions");
  if (p33 <= 0.0) throw Error(ErrorCode::ZeroExpectedCount, "no expected I -> I transitions");
  const double nn = double(n);
  auto q_update = [nn](double ysum, double psum, const char* what) {
    if (psum <= 0.0) {
      if (ysum > 0.0) throw Error(ErrorCode::ZeroExpectedCount, std::string("no expected ") + what + " transitions");
      return 0.0;
    }
    return std::min(1.0, (ysum / nn) / psum);
  };
  EbolaMStep r;
  r.rho = std::log1p(p23 / p22) / h;
  r.gamma = std::log1p(p34 / p33) / h;
  r.q23 = q_update(y23, rep23, "E -> I");
  r.q34 = q_update(y34, rep34, "I -> R");
  return r;
}

EMStep em_step_ebola(const EbolaData& data, const EbolaParams& theta) {
  const ModelSpec spec = ebola_model(data, theta);
  const FilterTraceZ trace = filter_z(spec, ebola_observations(data, theta));
  const SmoothTraceZ sm = smooth_z(trace);
  const EbolaMStep m = ebola_m_step(sm, data.y, data.reported, data.n, data.h);
  EMStep r;
  r.loglik = trace.loglik;
  r.next = theta;
  r.next.rho = m.rho;
  r.next.gamma = m.gamma;
  r.next.q23 = m.q23;
  r.next.q34 = m.q34;
  return r;
}

namespace {

double max_relative_change(const EbolaParams& a, const EbolaParams& b) {
  const double old_v[] = {a.rho, a.gamma, a.q23, a.q34};
  const double new_v[] = {b.rho, b.gamma, b.q23, b.q34};
  double r = 0.0;
  for (int k = 0; k < 4; ++k) {
    r = std::max(r, std::abs(new_v[k] - old_v[k]) / std::max(std::abs(old_v[k]), 1e-12));
  }
  return r;
}

EbolaParams blend(const EbolaParams& from, const EbolaParams& to, double alpha) {
  EbolaParams r = from;
  r.rho = from.rho + alpha * (to.rho - from.rho);
  r.gamma = from.gamma + alpha * (to.gamma - from.gamma);
  r.q23 = from.q23 + alpha * (to.q23 - from.q23);
  r.q34 = from.q34 + alpha * (to.q34 - from.q34);
  return r;
}

void audit(EMFit& fit, double slack) {
  for (std::size_t k = 1; k < fit.loglik_trail.size(); ++k) {
    const double drop = fit.loglik_trail[k - 1] - fit.loglik_trail[k];
    fit.max_decrease = std::max(fit.max_decrease, drop);
    if (drop > slack) ++fit.violations;
  }
}

}  // namespace

EMFit em_fit(const EbolaData& data, const EbolaParams& start, const EMOptions& opts) {
  EMFit fit;
  fit.theta = start;
  for (int it = 0; it < opts.max_iters; ++it) {
    const EMStep step = em_step_ebola(data, fit.theta);
    fit.loglik_trail.push_back(step.loglik);
    fit.iterations = it + 1;
    EbolaParams next = step.next;
    if (opts.safeguard) {
      double ll = ebola_loglik(data, next);
      double alpha = 1.0;
      int halvings = 0;
      while (!(ll >= step.loglik) && halvings < opts.max_halvings) {
        alpha *= 0.5;
        ++halvings;
        next = blend(fit.theta, step.next, alpha);
        ll = ebola_loglik(data, next);
      }
      if (halvings > 0) ++fit.backtracks;
      if (!(ll >= step.loglik)) {
        fit.stalled = true;
        fit.converged = true;
        break;
      }
    }
    // Measured against the full update so short backtracked steps do not end the run.
    const double change = max_relative_change(fit.theta, step.next);
    fit.theta = next;
    if (change < opts.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.loglik = ebola_loglik(data, fit.theta);
  if (std::isnan(fit.loglik)) fit.loglik = kNegInf;
  fit.loglik_trail.push_back(fit.loglik);
  audit(fit, opts.monotone_slack);
  return fit;
}

ProfileFit profile_em(const EbolaData& data, const std::vector<double>& beta_grid,
                      const std::vector<double>& lambda_grid, const EbolaParams& start, const EMOptions& opts,
                      int threads) {
  if (beta_grid.empty() || lambda_grid.empty()) throw Error(ErrorCode::Config, "profile grids must be nonempty");
  ProfileFit out;
  out.beta_grid = beta_grid;
  out.lambda_grid = lambda_grid;
  out.grid.resize(beta_grid.size() * lambda_grid.size());
  parallel_for(out.grid.size(), threads, [&](std::size_t k) {
    EbolaParams s = start;
    s.beta = beta_grid[k / lambda_grid.size()];
    s.lambda = lambda_grid[k % lambda_grid.size()];
    try {
      out.grid[k] = em_fit(data, s, opts);
    } catch (const Error& e) {
      if (category(e.code()) != ErrorCategory::Numerical) throw;
      EMFit failed;
      failed.theta = s;
      failed.loglik = kNegInf;
      out.grid[k] = failed;
    }
  });
  bool any_converged = false;
  for (const EMFit& f : out.grid) any_converged = any_converged || (f.converged && std::isfinite(f.loglik));
  const bool restrict = opts.prefer_converged && any_converged;
  std::size_t best = out.grid.size();
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    if (restrict && !out.grid[k].converged) continue;
    if (best == out.grid.size() || out.grid[k].loglik > out.grid[best].loglik) best = k;
  }
  out.best = out.grid[best];
  return out;
}

double PriorComponent::log_density(double x) const {
  if (family == Family::Uniform) {
    if (!(x >= lower && x <= upper)) return kNegInf;
    return -std::log(upper - lower);
  }
  if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double PriorComponent::mean() const {
  return family == Family::Uniform ? 0.5 * (lower + upper) : shape / rate;
}

double PriorComponent::variance() const {
  if (family == Family::Uniform) return (upper - lower) * (upper - lower) / 12.0;
  return shape / (rate * rate);
}

const PriorComponent& PriorSpec::at(const std::string& name) const {
  auto it = components.find(name);
  if (it == components.end()) throw Error(ErrorCode::MissingParameter, "no prior for '" + name + "'");
  return it->second;
}

PriorSpec PriorSpec::preset(const std::string& name) {
  // Placeholder hyperparameters; override through configuration.
  PriorSpec p;
  p.components["q23"] = PriorComponent::uniform();
  p.components["q34"] = PriorComponent::uniform();
  const auto flat = PriorComponent::gamma(0.1, 0.1);
  p.components["beta"] = flat;
  p.components["lambda"] = flat;
  if (name == "vague") {
    p.components["rho"] = flat;
    p.components["gamma"] = flat;
  } else if (name == "informative") {
    p.components["rho"] = PriorComponent::gamma(36.0, 180.0);
    p.components["gamma"] = PriorComponent::gamma(36.0, 252.0);
  } else if (name == "noncentered") {
    p.components["rho"] = PriorComponent::gamma(16.0, 160.0);
    p.components["gamma"] = PriorComponent::gamma(16.0, 64.0);
  } else {
    throw Error(ErrorCode::Config, "unknown prior preset '" + name + "'");
  }
  return p;
}

std::vector<std::string> PriorSpec::preset_names() { return {"vague", "informative", "noncentered"}; }

void MCMCConfig::validate(std::size_t dim) const {
  if (iterations < 0 || burn_in < 0) throw Error(ErrorCode::Config, "iterations and burn-in must be nonnegative");
  if (iterations > 0 && burn_in >= iterations) throw Error(ErrorCode::Config, "burn-in must be below iterations");
  if (thin < 1) throw Error(ErrorCode::Config, "thinning must be at least 1");
  if (!proposal_sd.empty()) {
    if (proposal_sd.size() != dim) throw Error(ErrorCode::Config, "one proposal SD per parameter required");
    for (double s : proposal_sd) {
      if (!(s > 0.0)) throw Error(ErrorCode::Config, "proposal SDs must be positive");
    }
  }
  if (tune_window < 1) throw Error(ErrorCode::Config, "tuning window must be positive");
}

Vec MCMCOutput::mean() const {
  if (samples.empty()) return Vec();
  Vec m = Vec::Zero(samples.front().size());
  for (const Vec& s : samples) m += s;
  return m / double(samples.size());
}

Vec MCMCOutput::sd() const {
  if (samples.size() < 2) return Vec::Zero(samples.empty() ? 0 : samples.front().size());
  const Vec m = mean();
  Vec v = Vec::Zero(m.size());
  for (const Vec& s : samples) v += (s - m).cwiseAbs2();
  return (v / double(samples.size() - 1)).cwiseSqrt();
}

MCMCOutput metropolis_within_gibbs(const LogTarget& log_target, const Vec& init,
                                   const std::vector<std::string>& names, const MCMCConfig& config) {
  const Eigen::Index d = init.size();
  config.validate(std::size_t(d));
  if (names.size() != std::size_t(d)) throw Error(ErrorCode::ShapeMismatch, "one name per parameter required");

  MCMCOutput out;
  out.names = names;
  out.accepts.assign(std::size_t(d), 0);
  out.attempts.assign(std::size_t(d), 0);
  out.proposal_sd = Vec(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    out.proposal_sd[k] = config.proposal_sd.empty() ? std::max(0.1 * std::abs(init[k]), 1e-3)
                                                    : config.proposal_sd[std::size_t(k)];
  }

  Vec cur = init;
  double cur_lp = log_target(cur);
  if (!std::isfinite(cur_lp)) throw Error(ErrorCode::Config, "initial point has zero posterior density");

  const int kept = config.iterations > 0 ? (config.iterations - config.burn_in) / config.thin : 1;
  out.samples.reserve(std::size_t(kept));
  out.log_post.reserve(std::size_t(kept));
  if (config.iterations == 0) {
    out.samples.push_back(cur);
    out.log_post.push_back(cur_lp);
  }

  Rng rng(config.seed);
  std::vector<int> window_accepts(std::size_t(d), 0);
  for (int it = 1; it <= config.iterations; ++it) {
    const bool burning = it <= config.burn_in;
    for (Eigen::Index k = 0; k < d; ++k) {
      Vec prop = cur;
      prop[k] = sample_normal(rng, cur[k], out.proposal_sd[k]);
      const double lp = log_target(prop);
      const double u = sample_uniform(rng);
      const bool accept = std::isfinite(lp) && std::log(u) < lp - cur_lp;
      if (accept) {
        cur = std::move(prop);
        cur_lp = lp;
      }
      if (burning) {
        window_accepts[std::size_t(k)] += accept ? 1 : 0;
      } else {
        out.attempts[std::size_t(k)] += 1;
        out.accepts[std::size_t(k)] += accept ? 1 : 0;
      }
    }
    if (burning && config.tune && it % config.tune_window == 0) {
      for (Eigen::Index k = 0; k < d; ++k) {
        const double rate = double(window_accepts[std::size_t(k)]) / double(config.tune_window);
        if (rate < config.target_low) out.proposal_sd[k] *= 0.7;
        if (rate > config.target_high) out.proposal_sd[k] *= 1.3;
        window_accepts[std::size_t(k)] = 0;
      }
    }
    if (!burning && (it - config.burn_in) % config.thin == 0) {
      out.samples.push_back(cur);
      out.log_post.push_back(cur_lp);
    }
  }

  out.acceptance_rate = Vec::Zero(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto a = out.attempts[std::size_t(k)];
    if (a > 0) out.acceptance_rate[k] = double(out.accepts[std::size_t(k)]) / double(a);
  }
  const auto find = [&](const char* name) -> Eigen::Index {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return Eigen::Index(k);
    return -1;
  };
  const Eigen::Index ib = find("beta"), ig = find("gamma");
  if (ib >= 0 && ig >= 0) {
    out.r0.reserve(out.samples.size());
    for (const Vec& s : out.samples) out.r0.push_back(s[ib] / s[ig]);
  }
  return out;
}

double ebola_log_posterior(const EbolaData& data, const PriorSpec& prior, const EbolaParams& theta) {
  const Vec v = theta.to_vec();
  double lp = 0.0;
  for (std::size_t k = 0; k < EbolaParams::names().size(); ++k) {
    lp += prior.at(EbolaParams::names()[k]).log_density(v[Eigen::Index(k)]);
    if (!std::isfinite(lp)) return kNegInf;
  }
  try {
    const double ll = ebola_loglik(data, theta);
    return std::isnan(ll) ? kNegInf : lp + ll;
  } catch (const Error& e) {
    if (category(e.code()) == ErrorCategory::Config) throw;
    return kNegInf;
  }
}

EbolaParams prior_mean_start(const PriorSpec& prior) {
  EbolaParams p;
  p.beta = prior.at("beta").mean();
  p.lambda = prior.at("lambda").mean();
  p.rho = prior.at("rho").mean();
  p.gamma = prior.at("gamma").mean();
  p.q23 = 0.5;
  p.q34 = 0.5;
  return p;
}

MCMCOutput mcmc_run(const EbolaData& data, const PriorSpec& prior, const MCMCConfig& config) {
  return mcmc_run(data, prior, config, prior_mean_start(prior));
}

MCMCOutput mcmc_run(const EbolaData& data, const PriorSpec& prior, const MCMCConfig& config,
                    const EbolaParams& init) {
  const LogTarget target = [&](const Vec& v) {
    return ebola_log_posterior(data, prior, EbolaParams::from_vec(v));
  };
  return metropolis_within_gibbs(target, init.to_vec(), EbolaParams::names(), config);
}

std::vector<MCMCOutput> mcmc_run_chains(const EbolaData& data, const PriorSpec& prior, const MCMCConfig& config,
                                        int chains, int threads, const EbolaParams* init) {
  if (chains < 1) throw Error(ErrorCode::Config, "need at least one chain");
  std::vector<MCMCOutput> out{std::size_t(chains)};
  const EbolaParams start = init != nullptr ? *init : prior_mean_start(prior);
  parallel_for(out.size(), threads, [&](std::size_t c) {
    MCMCConfig cc = config;
    cc.seed = stream_seed(config.seed, c);
    out[c] = mcmc_run(data, prior, cc, start);
  });
  return out;
}

}  // namespace epimn
