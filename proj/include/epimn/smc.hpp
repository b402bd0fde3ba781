#pragma once

// Particle filter over a log-normal random walk on the transmission rate,
// with one multinomial filter per particle, ancestor-traced backward
// sampling of (beta, P, Z), and the derived summaries built from draws.

#include <map>
#include <string>
#include <vector>

#include "epimn/filter.hpp"
#include "epimn/random.hpp"

namespace epimn {

enum class Resampling { Multinomial, Systematic };

struct SMCOptions {
  Resampling resampling = Resampling::Multinomial;
  /// Name of the per-particle parameter in the kernel's ParamRecord.
  std::string beta_name = "beta";
};

/// Per step s = 1..t (index s-1), values before resampling.
struct ParticleEnsemble {
  ModelSpec spec;
  ObservationsZ obs;
  int n_part = 0;
  std::vector<std::vector<double>> beta;
  std::vector<std::vector<ProbVector>> pi_filt;
  std::vector<std::vector<double>> log_w;
  std::vector<std::vector<double>> weights;
  /// ancestors[s-1][i]: index at step s (pre-resampling) of the particle that
  /// post-resampling slot i copied; 0-based.
  std::vector<std::vector<std::size_t>> ancestors;
  std::vector<double> ess;
  /// log of the mean unnormalized weight per step.
  std::vector<double> loglik_increment;
  double loglik = 0.0;
  std::string beta_name = "beta";

  int horizon() const { return int(beta.size()); }
  /// Parent slot of particle i at step s: its pi_{s-1|s-1} is pi_filt at s-1 of ancestors[s-2][i].
  std::size_t parent(int s, std::size_t i) const;
  /// pi_{s-1|s-1} of particle i at step s (pi0 for s = 1).
  const ProbVector& parent_pi(int s, std::size_t i) const;
  /// Recomputes P_{s|s} for particle i at step s from its parent and beta.
  JointMatrix p_filt(int s, std::size_t i) const;
  ParamRecord theta_for(double beta) const;
};

/// Throws AllWeightsZero when every particle gives the observation zero probability.
ParticleEnsemble smc_filter(const ModelSpec& spec, const ObservationsZ& obs, double sigma_v, double beta0,
                            int n_part, std::uint64_t seed, const SMCOptions& opts = {});

struct SmoothedDraw {
  std::vector<double> beta_tilde;         // index s-1
  std::vector<JointMatrix> p_tilde;       // P~_{s|t}, index s-1
  std::vector<CountMatrix> z_tilde;       // Z~_s, index s-1
  std::vector<std::size_t> lineage;       // traced particle index per s
};

SmoothedDraw backward_sample(const ParticleEnsemble& ensemble, std::uint64_t seed);
SmoothedDraw backward_sample(const ParticleEnsemble& ensemble, Rng& rng);

/// Ancestor indices drawn with probabilities `weights` (normalized).
std::vector<std::size_t> resample(Rng& rng, const std::vector<double>& weights, Resampling scheme);

double effective_sample_size(const std::vector<double>& normalized_weights);

struct BandSummary {
  std::vector<double> mean;
  std::vector<double> q025;
  std::vector<double> q25;
  std::vector<double> q75;
  std::vector<double> q975;
};

/// Summaries over draws of a per-time series (all series the same length).
BandSummary summarize_series(const std::vector<std::vector<double>>& series);

/// Linear-interpolation quantile of a sample.
double quantile(std::vector<double> values, double prob);

struct DerivedParams {
  double gamma = 0.0;
  double kappa = 0.0;
  double q_w = 0.0;
  double q_t = 0.0;
  /// Observed entries, 0-based.
  int wuhan_from = 2, wuhan_to = 3;
  int travel_from = 6, travel_to = 7;
  /// Predictive draws per smoothed draw.
  int predictive_draws = 1;
};

struct DerivedSeries {
  std::vector<double> r;
  std::vector<double> onset_w;
  std::vector<double> onset_t;
  std::vector<double> conf_w;
  std::vector<double> conf_t;
};

/// Per-draw derived series (R_s, predictive onsets, confirmations).
DerivedSeries derive_series(const SmoothedDraw& draw, std::int64_t n, const DerivedParams& theta, Rng& rng);

/// Named summaries: R, onset_wuhan, onset_intl, confirmed_wuhan, confirmed_intl.
std::map<std::string, BandSummary> derived_quantities(const std::vector<SmoothedDraw>& draws, std::int64_t n,
                                                      const DerivedParams& theta, std::uint64_t seed);

struct SMCRunConfig {
  double sigma_v = 0.1;
  double beta0 = 1.0;
  int n_part = 1000;
  int runs = 100;
  int draws_per_run = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  SMCOptions options;
};

struct SMCRunsResult {
  std::vector<SmoothedDraw> draws;
  std::vector<std::vector<double>> ess;  // per run
  std::vector<double> loglik;            // per run
};

/// Independent runs; run r uses stream_seed(seed, r).
SMCRunsResult smc_runs(const ModelSpec& spec, const ObservationsZ& obs, const SMCRunConfig& config);

}  // namespace epimn
