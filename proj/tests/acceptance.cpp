// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [--only 1,3,...] [--threads N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "epimn/estimate.hpp"
#include "epimn/experiments.hpp"
#include "epimn/oracle.hpp"
#include "epimn/simulate.hpp"
#include "epimn/smc.hpp"
#include "epimn/smooth.hpp"

using namespace epimn;
namespace orc = epimn::oracle;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Vec random_simplex(Rng& rng, int m) {
  Vec v(m);
  for (int i = 0; i < m; ++i) v[i] = -std::log(sample_uniform(rng) + 1e-300);
  return v / v.sum();
}

StochMatrix random_kernel(Rng& rng, int m) {
  Mat k(m, m);
  for (int i = 0; i < m; ++i) k.row(i) = random_simplex(rng, m).transpose();
  return StochMatrix(k);
}

double log_thin_x(const CountVector& x, const CountVector& y, const Vec& q) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) r += orc::log_binomial_pmf(y[i], x[i], q[i]);
  return r;
}

double log_thin_z(const CountMatrix& z, const CountMatrix& y, const Mat& q) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    for (Eigen::Index j = 0; j < z.size(); ++j) r += orc::log_binomial_pmf(y(i, j), z(i, j), q(i, j));
  return r;
}

// pmf of y + Mult(rest, p) at x; zero where x - y leaves the support.
double shifted_pmf_x(const CountVector& x, const CountVector& y, std::int64_t rest, const Vec& p) {
  const IVec d = x.values() - y.values();
  if ((d.array() < 0).any() || d.sum() != rest) return 0.0;
  return std::exp(log_multinomial_pmf(CountVector(d), p));
}

double shifted_pmf_z(const CountMatrix& z, const CountMatrix& y, std::int64_t rest, const Mat& p) {
  const IMat d = z.values() - y.values();
  if ((d.array() < 0).any() || d.sum() != rest) return 0.0;
  return std::exp(log_multinomial_pmf(CountMatrix(d), p));
}

// 1. One-step exactness of predict/update in both observation forms.
Outcome lemma_exactness() {
  Rng rng(20240601);
  double worst = 0.0;
  int draws = 0;
  for (int m = 2; m <= 3; ++m) {
    for (std::int64_t n = 2; n <= 6; ++n) {
      const orc::StateEnumeration st(m, n);
      const std::vector<CountMatrix> mats = orc::matrices_with_total(m, n);
      for (int rep = 0; rep < 100; ++rep, ++draws) {
        const StochMatrix k = random_kernel(rng, m);
        const ProbVector pi(random_simplex(rng, m));

        // Prediction, state form: mixture of exact transitions from Mult(n, pi).
        const Vec prior = orc::multinomial_pmf(pi, st);
        Vec mix = Vec::Zero(Eigen::Index(st.size()));
        for (std::size_t a = 0; a < st.size(); ++a) mix += prior[Eigen::Index(a)] * orc::exact_transition_pmf(st[a], k, st);
        const ProbVector pi_pred = predict_x(pi, k);
        worst = std::max(worst, (mix - orc::multinomial_pmf(pi_pred, st)).cwiseAbs().maxCoeff());

        // Update, state form.
        const Vec q = Vec::NullaryExpr(m, [&] { return sample_uniform(rng); });
        const IVec x_true = sample_multinomial(rng, n, pi_pred.values());
        IVec yv(m);
        for (int i = 0; i < m; ++i) yv[i] = sample_binomial(rng, x_true[i], q[i]);
        const CountVector y(yv);
        const UpdateResultX ux = update_x(pi_pred, y, q, n);
        Vec post(Eigen::Index(st.size()));
        for (std::size_t a = 0; a < st.size(); ++a) {
          const double pr = std::exp(log_multinomial_pmf(st[a], pi_pred.values()));
          post[Eigen::Index(a)] = pr == 0.0 ? 0.0 : pr * std::exp(log_thin_x(st[a], y, q));
        }
        const double w = post.sum();
        post /= w;
        worst = std::max(worst, std::abs(w - std::exp(ux.log_w)));
        Vec mean = Vec::Zero(m);
        for (std::size_t a = 0; a < st.size(); ++a) {
          mean += post[Eigen::Index(a)] * st[a].values().cast<double>();
          worst = std::max(worst, std::abs(post[Eigen::Index(a)] - shifted_pmf_x(st[a], y, ux.remaining, ux.residual)));
        }
        worst = std::max(worst, (mean - double(n) * ux.pi_filt.values()).cwiseAbs().maxCoeff());

        // Prediction, transition form.
        const orc::MatrixPmf mz = orc::mixture_transition_pmf(prior, st, k);
        const JointMatrix p_pred = predict_z(pi, k);
        for (const CountMatrix& z : mats) {
          const auto it = mz.find(orc::flatten(z));
          const double e = it == mz.end() ? 0.0 : it->second;
          worst = std::max(worst, std::abs(e - std::exp(log_multinomial_pmf(z, p_pred.values()))));
        }

        // Update, transition form.
        const Mat qz = Mat::NullaryExpr(m, m, [&] { return sample_uniform(rng); });
        const CountMatrix z_true = sample_multinomial_matrix(rng, n, p_pred.values());
        IMat ym(m, m);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) ym(i, j) = sample_binomial(rng, z_true(i, j), qz(i, j));
        const CountMatrix yz(ym);
        const UpdateResultZ uz = update_z(p_pred, yz, qz, n);
        std::vector<double> pz(mats.size());
        double wz = 0.0;
        for (std::size_t a = 0; a < mats.size(); ++a) {
          const double pr = std::exp(log_multinomial_pmf(mats[a], p_pred.values()));
          pz[a] = pr == 0.0 ? 0.0 : pr * std::exp(log_thin_z(mats[a], yz, qz));
          wz += pz[a];
        }
        worst = std::max(worst, std::abs(wz - std::exp(uz.log_w)));
        Mat mean_z = Mat::Zero(m, m);
        for (std::size_t a = 0; a < mats.size(); ++a) {
          const double p = pz[a] / wz;
          mean_z += p * mats[a].values().cast<double>();
          worst = std::max(worst, std::abs(p - shifted_pmf_z(mats[a], yz, uz.remaining, uz.residual)));
        }
        worst = std::max(worst, (mean_z - double(n) * uz.p_filt.values()).cwiseAbs().maxCoeff());
      }
    }
  }
  std::ostringstream os;
  os << draws << " draws, max abs deviation " << worst;
  return {worst <= 1e-12, os.str()};
}

// 2. All reporting probabilities zero over 200 steps.
Outcome missing_neutrality() {
  EbolaData proto;
  proto.n = kEbolaPopulation;
  proto.pi0 = EbolaData::default_pi0(proto.n);
  const ModelSpec spec = ebola_model(proto, ebola_true_params());
  const FilterTraceX fx = filter_x(spec, ObservationsX::missing(4, 200));
  const FilterTraceZ fz = filter_z(spec, ObservationsZ::missing(4, 200));
  bool ok = fx.loglik == 0.0 && fz.loglik == 0.0;
  ProbVector pi = spec.pi0;
  for (int t = 1; t <= 200; ++t) {
    const auto k = std::size_t(t - 1);
    pi = predict_x(pi, spec.kernel, t, spec.theta);
    ok = ok && fx.steps[k].pi_filt.values() == pi.values() && fx.steps[k].pi_pred.values() == pi.values();
    ok = ok && fz.steps[k].p_filt.values() == fz.steps[k].p_pred.values();
    ok = ok && fx.steps[k].log_w == 0.0 && fz.steps[k].log_w == 0.0;
  }
  std::ostringstream os;
  os << "loglik x " << fx.loglik << ", z " << fz.loglik;
  return {ok, os.str()};
}

constexpr std::uint64_t kEbolaSeed = 2026;

EbolaSynthetic acceptance_data() {
  EbolaSimConfig cfg;
  cfg.min_infections = 100;
  return simulate_ebola(cfg, kEbolaSeed);
}

std::vector<double> grid(double from, double to, double step) {
  std::vector<double> g;
  for (int k = 0;; ++k) {
    const double v = from + k * step;
    if (v > to + 1e-9) break;
    g.push_back(std::round(v * 1e6) / 1e6);
  }
  return g;
}

// 3. Profile EM on synthetic Ebola data.
Outcome ebola_recovery(int threads) {
  const auto t0 = Clock::now();
  const EbolaSynthetic syn = acceptance_data();
  const EbolaParams start{0.0, 0.0, 0.1, 0.1, 1.0, 1.0};
  const ProfileFit fit = profile_em(syn.data, grid(0.1, 0.4, 0.01), grid(0.05, 0.5, 0.01), start, {}, threads);
  const EbolaParams& th = fit.best.theta;
  const EbolaParams truth = ebola_true_params();
  auto within = [](double est, double tru) { return std::abs(est - tru) <= 0.5 * tru; };
  const double secs = seconds_since(t0);
  const bool ok = within(th.beta, truth.beta) && within(th.lambda, truth.lambda) && within(th.rho, truth.rho) &&
                  within(th.gamma, truth.gamma) && th.r0() >= 1.1 && th.r0() <= 1.8 && secs < 1800.0;
  std::ostringstream os;
  os << "T=" << syn.data.horizon() << " beta=" << th.beta << " lambda=" << th.lambda << " rho=" << th.rho
     << " gamma=" << th.gamma << " q23=" << th.q23 << " q34=" << th.q34 << " R0=" << th.r0()
     << " loglik=" << fit.best.loglik << " converged=" << fit.best.converged << " time=" << secs << "s";
  return {ok, os.str()};
}

// 4. MCMC with vague priors on the same data.
Outcome mcmc_vague() {
  const auto t0 = Clock::now();
  const EbolaSynthetic syn = acceptance_data();
  MCMCConfig c;
  c.iterations = 100000;
  c.burn_in = 20000;
  c.seed = 7;
  const MCMCOutput out = mcmc_run(syn.data, PriorSpec::preset("vague"), c);
  const Vec mean = out.mean();
  double r0 = 0.0;
  for (double r : out.r0) r0 += r;
  r0 /= double(out.r0.size());
  const double ref[] = {0.23, 0.21, 0.22, 0.173, 0.81, 0.66, 1.31};
  const double sd[] = {0.028, 0.080, 0.076, 0.024, 0.140, 0.119, 0.088};
  const char* names[] = {"beta", "lambda", "rho", "gamma", "q23", "q34", "R0"};
  bool ok = true;
  std::ostringstream os;
  for (int k = 0; k < 7; ++k) {
    const double v = k < 6 ? mean[k] : r0;
    const bool in = std::abs(v - ref[k]) <= 3.0 * sd[k];
    ok = ok && in;
    os << names[k] << "=" << v << (in ? "" : "(out)") << " ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 7200.0;
  os << "acc=[" << out.acceptance_rate.transpose() << "] time=" << secs << "s";
  return {ok, os.str()};
}

// 5. Filtering bias and interval coverage.
Outcome bias_and_coverage(int threads) {
  const auto t0 = Clock::now();
  BiasCoverageConfig c;
  c.seed = 5;
  c.threads = threads;
  const BiasCoverageResult r = bias_coverage(c);
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "max |bias| " << r.max_abs_bias << ", min coverage " << r.min_coverage << ", time " << secs << "s";
  return {r.max_abs_bias < 0.5 && r.min_coverage >= 0.95 && secs < 3600.0, os.str()};
}

// 6. Filter cost does not grow with n.
Outcome filter_cost() {
  auto time_for = [](std::int64_t n) {
    EbolaSimConfig cfg;
    cfg.n = n;
    cfg.horizon = 200;
    cfg.x0 = {n - n / 100, n / 200, n / 200, 0};
    cfg.x0[0] = n - cfg.x0[1] - cfg.x0[2];
    const EbolaSynthetic syn = simulate_ebola(cfg, 1);
    const ModelSpec spec = ebola_model(syn.data, cfg.theta);
    const ObservationsZ obs = ebola_observations(syn.data, cfg.theta);
    FilterOptions opts;
    opts.store_trace = false;
    double best = 1e300;
    for (int batch = 0; batch < 7; ++batch) {
      const auto t0 = Clock::now();
      double sink = 0.0;
      for (int r = 0; r < 50; ++r) sink += filter_z(spec, obs, opts).loglik;
      best = std::min(best, seconds_since(t0) / 50.0);
      if (!std::isfinite(sink)) return -1.0;
    }
    return best;
  };
  const double small = time_for(1000);
  const double large = time_for(10000000);
  std::ostringstream os;
  os << "n=1e3 " << small * 1e3 << " ms, n=1e7 " << large * 1e3 << " ms, ratio " << large / small;
  return {small > 0 && large > 0 && large <= 2.0 * small, os.str()};
}

// 7. Degenerate particle filter and backward sampler.
Outcome smc_degeneracy() {
  EbolaSimConfig cfg;
  cfg.n = 100000;
  cfg.horizon = 120;
  cfg.t_star = 60;
  cfg.x0 = {99900, 50, 50, 0};
  const EbolaSynthetic syn = simulate_ebola(cfg, 3);
  const ModelSpec spec = ebola_model(syn.data, cfg.theta);
  const ObservationsZ obs = ebola_observations(syn.data, cfg.theta);
  const FilterTraceZ fz = filter_z(spec, obs);
  const ParticleEnsemble one = smc_filter(spec, obs, 0.0, cfg.theta.beta, 1, 1);
  bool bit_exact = true;
  for (int s = 1; s <= fz.horizon(); ++s) {
    bit_exact = bit_exact && one.pi_filt[std::size_t(s - 1)][0].values() == fz.steps[std::size_t(s - 1)].pi_filt.values();
  }

  bool ess_ok = true;
  bool totals_ok = true;
  for (int np : {1, 10, 200}) {
    const ParticleEnsemble e = smc_filter(spec, obs, 0.1, cfg.theta.beta, np, std::uint64_t(np));
    for (double v : e.ess) ess_ok = ess_ok && v >= 1.0 - 1e-9 && v <= double(np) + 1e-9;
    if (np == 200) {
      Rng rng(11);
      for (int d = 0; d < 100; ++d) {
        const SmoothedDraw draw = backward_sample(e, rng);
        for (const CountMatrix& z : draw.z_tilde) totals_ok = totals_ok && z.total() == cfg.n;
      }
    }
  }
  std::ostringstream os;
  os << "bit-exact " << bit_exact << ", ESS in range " << ess_ok << ", draw totals " << totals_ok;
  return {bit_exact && ess_ok && totals_ok, os.str()};
}

// 8. Particle filter tracks a known transmission-rate path.
Outcome covid_tracking(int threads) {
  using namespace covid;
  const auto t0 = Clock::now();
  const int horizon = 60;
  const std::int64_t n = 1000000;
  const double gamma = 0.25;
  std::vector<double> beta(static_cast<std::size_t>(horizon)), f(static_cast<std::size_t>(horizon));
  for (int t = 1; t <= horizon; ++t) {
    const double b = t < 20 ? 0.75 : (t < 35 ? 0.75 - 0.035 * (t - 20) : 0.225);
    beta[std::size_t(t - 1)] = b;
    f[std::size_t(t - 1)] = t < 30 ? 0.02 : 0.0;
  }
  ParamRecord theta{{"beta", beta[0]}, {"rho", 0.2}, {"gamma", gamma}, {"h", 1.0}, {"f", 0.0}};
  theta.set_schedule("beta", beta);
  theta.set_schedule("f", f);
  Vec pi0 = Vec::Zero(kCompartments);
  pi0[E1W] = 100.0 / double(n);
  pi0[I1W] = 100.0 / double(n);
  pi0[S] = 1.0 - pi0[E1W] - pi0[I1W];
  const ModelSpec truth = make_model(kernel_family("covid"), n, ProbVector(pi0), theta);
  const LatentTrajectory traj = simulate_latent(truth, horizon, 42);
  Mat q = Mat::Zero(kCompartments, kCompartments);
  q(E2W, I1W) = 0.05;
  q(E2T, I1T) = 0.8;
  ObservationsZ obs;
  obs.y = simulate_obs_z(traj, {q}, 43);
  obs.q.assign(std::size_t(horizon), q);

  // The filter sees beta only through the particle value.
  ParamRecord fit_theta = theta;
  fit_theta.set_schedule("beta", {});
  const ModelSpec spec = make_model(kernel_family("covid"), n, ProbVector(pi0), fit_theta);
  SMCRunConfig rc;
  rc.sigma_v = 0.1;
  rc.beta0 = 0.5;
  rc.n_part = 3000;
  rc.runs = 20;
  rc.seed = 2024;
  rc.threads = threads;
  const SMCRunsResult runs = smc_runs(spec, obs, rc);
  DerivedParams dp;
  dp.gamma = gamma;
  dp.kappa = 1.0;
  dp.q_w = 0.05;
  dp.q_t = 0.8;
  const auto bands = derived_quantities(runs.draws, n, dp, 1);
  const std::vector<double>& r_mean = bands.at("R").mean;
  double err = 0.0, level = 0.0;
  for (int t = 1; t <= horizon; ++t) {
    const double r_true = beta[std::size_t(t - 1)] / gamma;
    err += std::abs(r_mean[std::size_t(t - 1)] - r_true);
    level += r_true;
  }
  const double rel = err / level;
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "time-averaged |error| / mean level = " << rel << ", time " << secs << "s";
  return {rel < 0.30 && secs < 1800.0, os.str()};
}

// 9. Gap between approximate and exact log-likelihood on tiny Ebola instances.
Outcome oracle_gap() {
  const std::int64_t n = 6;
  EbolaData proto;
  proto.n = n;
  proto.pi0 = ProbVector{0.5, 0.25, 0.25, 0.0};
  proto.t_star = 2;
  const EbolaParams theta{0.8, 0.3, 0.5, 0.4, kEbolaQ23, kEbolaQ34};
  const ModelSpec spec = ebola_model(proto, theta);
  const Mat q = ebola_reporting_matrix(theta.q23, theta.q34);
  double max_gap = 0.0, sum_gap = 0.0;
  const int instances = 20;
  for (int r = 0; r < instances; ++r) {
    const LatentTrajectory traj = simulate_latent(spec, 4, std::uint64_t(100 + r));
    ObservationsZ obs;
    obs.y = simulate_obs_z(traj, {q}, std::uint64_t(200 + r));
    obs.q.assign(4, q);
    const double exact = orc::exact_filter_z(spec, obs, orc::EtaMode::Exact).loglik;
    const double approx = filter_z(spec, obs).loglik;
    max_gap = std::max(max_gap, std::abs(approx - exact));
    sum_gap += std::abs(approx - exact);
  }
  std::ostringstream os;
  os << "m=4 n=6 T=4, " << instances << " instances: mean |gap| " << sum_gap / instances << " nats, max |gap| "
     << max_gap << " nats (reported)";
  return {std::isfinite(max_gap), os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  int threads = int(std::max(1u, std::thread::hardware_concurrency()));
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--only") == 0 && a + 1 < argc) {
      std::stringstream ss(argv[++a]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else if (std::strcmp(argv[a], "--threads") == 0 && a + 1 < argc) {
      threads = std::max(1, std::atoi(argv[++a]));
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"lemma exactness", lemma_exactness},
      {"missing-data neutrality", missing_neutrality},
      {"synthetic ebola recovery (profile EM)", [&] { return ebola_recovery(threads); }},
      {"MCMC posterior sanity (vague priors)", mcmc_vague},
      {"bias and coverage (n=500, 2000 replicates)", [&] { return bias_and_coverage(threads); }},
      {"filter cost independent of n", filter_cost},
      {"SMC degeneracy", smc_degeneracy},
      {"SMC reproduction-number tracking", [&] { return covid_tracking(threads); }},
      {"oracle accuracy audit", oracle_gap},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = int(k) + 1;
    if (!only.empty() && only.count(id) == 0) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
