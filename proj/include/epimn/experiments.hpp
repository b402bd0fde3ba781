#pragma once

// Synthetic-data drivers shared by the command-line tool and the test suites.

#include <vector>

#include "epimn/estimate.hpp"
#include "epimn/simulate.hpp"

namespace epimn {

/// Reporting probabilities of the synthetic Ebola study.
inline constexpr double kEbolaQ23 = 291.0 / 316.0;
inline constexpr double kEbolaQ34 = 236.0 / 316.0;
inline constexpr std::int64_t kEbolaPopulation = 5364501;

EbolaParams ebola_true_params();

struct EbolaSimConfig {
  EbolaParams theta = ebola_true_params();
  std::int64_t n = kEbolaPopulation;
  double t_star = 130.0;
  /// Empty means (n - 1, 1, 0, 0).
  std::vector<std::int64_t> x0;
  /// Zero means simulate until extinction.
  int horizon = 0;
  /// Redraw until at least this many infections occur.
  std::int64_t min_infections = 0;
  int max_attempts = 1000;
};

struct EbolaSynthetic {
  LatentTrajectory latent;
  EbolaData data;
  std::uint64_t seed_used = 0;
  int attempts = 0;
};

/// Attempt a uses stream_seed(seed, a).
EbolaSynthetic simulate_ebola(const EbolaSimConfig& config, std::uint64_t seed);

/// Ebola Q_t with q23 at E -> I and q34 at I -> R.
Mat ebola_reporting_matrix(double q23, double q34);

struct BiasCoverageConfig {
  std::vector<std::int64_t> n_values{500};
  int replicates = 2000;
  int horizon = 200;
  EbolaParams theta = ebola_true_params();
  double t_star = 130.0;
  double level = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct BiasCoverageCell {
  std::int64_t n = 0;
  int t = 0;
  int compartment = 0;  // 0-based
  double bias = 0.0;
  double coverage = 0.0;
};

struct BiasCoverageResult {
  std::vector<BiasCoverageCell> cells;
  double max_abs_bias = 0.0;
  double min_coverage = 1.0;
};

/// Replicate r at population index k uses stream_seed(stream_seed(seed, k), r).
BiasCoverageResult bias_coverage(const BiasCoverageConfig& config);

}  // namespace epimn
