#pragma once

// Parameter estimation for the Ebola model: closed-form EM on the smoothed
// transition tables with a profile grid over (beta, lambda), and a
// Metropolis-within-Gibbs sampler targeting the approximate posterior.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "epimn/filter.hpp"
#include "epimn/random.hpp"
#include "epimn/smooth.hpp"

namespace epimn {

/// Observed transitions of the Ebola model (0-based): E -> I (new cases) and I -> R (new deaths).
inline constexpr int kCaseFrom = 1, kCaseTo = 2;
inline constexpr int kDeathFrom = 2, kDeathTo = 3;

struct EbolaParams {
  double beta = 0.0;
  double lambda = 0.0;
  double rho = 0.0;
  double gamma = 0.0;
  double q23 = 0.0;
  double q34 = 0.0;

  double r0() const { return beta / gamma; }
  Vec to_vec() const;
  static EbolaParams from_vec(const Vec& v);
  ParamRecord to_record(double t_star, double h = 1.0) const;
  static EbolaParams from_record(const ParamRecord& theta);
  static const std::vector<std::string>& names();
};

struct EbolaData {
  std::int64_t n = 0;
  ProbVector pi0;
  double t_star = 130.0;
  double h = 1.0;
  std::vector<CountMatrix> y;
  /// 1 where entry (i, j) is reported at time t, 0 where it is missing.
  std::vector<Mat> reported;

  int horizon() const { return int(y.size()); }
  /// Two series; a negative count marks a missing day.
  static EbolaData from_series(std::int64_t n, const std::vector<std::int64_t>& cases,
                               const std::vector<std::int64_t>& deaths, double t_star = 130.0);
  /// pi0 = [1 - 1/n, 1/n, 0, 0].
  static ProbVector default_pi0(std::int64_t n);
};

ModelSpec ebola_model(const EbolaData& data, const EbolaParams& theta);
ObservationsZ ebola_observations(const EbolaData& data, const EbolaParams& theta);
double ebola_loglik(const EbolaData& data, const EbolaParams& theta);

struct EbolaMStep {
  double rho = 0.0;
  double gamma = 0.0;
  double q23 = 0.0;
  double q34 = 0.0;
};

/// Closed-form maximizers of the expected complete-data log-likelihood given
/// smoothed tables P_{s|t}. Reporting sums run over the days where the entry
/// is reported. Throws ZeroExpectedCount on a zero denominator.
EbolaMStep ebola_m_step(const SmoothTraceZ& smooth, const std::vector<CountMatrix>& y,
                        const std::vector<Mat>& reported, std::int64_t n, double h = 1.0);

struct EMStep {
  EbolaParams next;
  /// Approximate log-likelihood at the input parameters.
  double loglik = 0.0;
};

/// Filter, smooth, maximize; beta and lambda are held fixed.
EMStep em_step_ebola(const EbolaData& data, const EbolaParams& theta);

struct EMOptions {
  double tolerance = 1e-6;
  int max_iters = 500;
  /// Decreases larger than this are counted as monotonicity violations.
  double monotone_slack = 1e-8;
  /// Profile argmax is taken over converged grid points when there are any.
  bool prefer_converged = true;
  /// Backtrack toward the current point when an update lowers the likelihood.
  bool safeguard = true;
  int max_halvings = 30;
};

struct EMFit {
  EbolaParams theta;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trail;
  double max_decrease = 0.0;
  int violations = 0;
  /// Safeguarded runs only: updates that needed backtracking.
  int backtracks = 0;
  /// Safeguarded runs only: stopped because no step along the update improved.
  bool stalled = false;
};

EMFit em_fit(const EbolaData& data, const EbolaParams& start, const EMOptions& opts = {});

struct ProfileFit {
  EMFit best;
  std::vector<EMFit> grid;  // row-major over (beta, lambda)
  std::vector<double> beta_grid;
  std::vector<double> lambda_grid;
};

/// EM over (rho, gamma, q23, q34) at each grid point; failing points get loglik -inf.
ProfileFit profile_em(const EbolaData& data, const std::vector<double>& beta_grid,
                      const std::vector<double>& lambda_grid, const EbolaParams& start,
                      const EMOptions& opts = {}, int threads = 1);

struct PriorComponent {
  enum class Family { Gamma, Uniform };
  Family family = Family::Gamma;
  double shape = 1.0;
  double rate = 1.0;
  double lower = 0.0;
  double upper = 1.0;

  static PriorComponent gamma(double shape, double rate) { return {Family::Gamma, shape, rate, 0.0, 0.0}; }
  static PriorComponent uniform(double lower = 0.0, double upper = 1.0) {
    return {Family::Uniform, 0.0, 0.0, lower, upper};
  }
  /// -inf outside the support.
  double log_density(double x) const;
  double mean() const;
  double variance() const;
};

struct PriorSpec {
  std::map<std::string, PriorComponent> components;

  const PriorComponent& at(const std::string& name) const;
  /// vague | informative | noncentered
  static PriorSpec preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

struct MCMCConfig {
  int iterations = 0;
  int burn_in = 0;
  int thin = 1;
  /// Empty means a default scale per parameter.
  std::vector<double> proposal_sd;
  /// Adapt proposal SDs during burn-in toward the target acceptance band, then freeze.
  bool tune = true;
  double target_low = 0.2;
  double target_high = 0.4;
  int tune_window = 100;
  std::uint64_t seed = 0;

  void validate(std::size_t dim) const;
};

struct MCMCOutput {
  std::vector<std::string> names;
  std::vector<Vec> samples;
  std::vector<double> log_post;
  /// Counted after burn-in.
  std::vector<std::int64_t> accepts;
  std::vector<std::int64_t> attempts;
  Vec acceptance_rate;
  Vec proposal_sd;
  /// beta / gamma per sample when both are present.
  std::vector<double> r0;

  Vec mean() const;
  Vec sd() const;
};

using LogTarget = std::function<double(const Vec&)>;

/// One-at-a-time Gaussian random-walk Metropolis. Proposals with log target
/// -inf (including out-of-support) are rejected.
MCMCOutput metropolis_within_gibbs(const LogTarget& log_target, const Vec& init,
                                   const std::vector<std::string>& names, const MCMCConfig& config);

/// Approximate log posterior of the Ebola model; numerical failures map to -inf.
double ebola_log_posterior(const EbolaData& data, const PriorSpec& prior, const EbolaParams& theta);

/// Prior means for the rates and 0.5 for each q.
EbolaParams prior_mean_start(const PriorSpec& prior);

MCMCOutput mcmc_run(const EbolaData& data, const PriorSpec& prior, const MCMCConfig& config);
MCMCOutput mcmc_run(const EbolaData& data, const PriorSpec& prior, const MCMCConfig& config,
                    const EbolaParams& init);

/// Independent chains; chain c uses seed stream_seed(config.seed, c).
std::vector<MCMCOutput> mcmc_run_chains(const EbolaData& data, const PriorSpec& prior, const MCMCConfig& config,
                                        int chains, int threads, const EbolaParams* init = nullptr);

}  // namespace epimn
