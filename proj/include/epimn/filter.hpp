#pragma once

// Multinomial filtering: recursive prediction / update of multinomial
// parameters for observations of compartment counts (x-form) or of
// transition counts (z-form), and the approximate marginal likelihood
// accumulated from the per-step normalizers w_t.

#include <vector>

#include "epimn/models.hpp"

namespace epimn {

/// y_t and q_t for t = 1..T (index t-1). Missing entries are y = 0, q = 0.
struct ObservationsX {
  std::vector<CountVector> y;
  std::vector<Vec> q;

  int horizon() const { return int(y.size()); }
  void validate(int m) const;
  static ObservationsX missing(int m, int horizon);
};

/// Y_t and Q_t for t = 1..T (index t-1). Missing entries are y = 0, q = 0.
struct ObservationsZ {
  std::vector<CountMatrix> y;
  std::vector<Mat> q;

  int horizon() const { return int(y.size()); }
  void validate(int m) const;
  static ObservationsZ missing(int m, int horizon);
};

struct FilterOptions {
  /// Include log(n!), log(y!) and log((n - sum y)!) in log w_t.
  bool include_factorials = true;
  /// Keep per-step output; off for likelihood-only evaluation.
  bool store_trace = true;
};

struct UpdateResultX {
  ProbVector pi_filt;
  double log_w = 0.0;
  /// n - 1^T y and the parameter of the residual multinomial x*.
  std::int64_t remaining = 0;
  Vec residual;
};

struct UpdateResultZ {
  JointMatrix p_filt;
  double log_w = 0.0;
  std::int64_t remaining = 0;
  Mat residual;
};

ProbVector predict_x(const ProbVector& pi, const StochMatrix& k);
ProbVector predict_x(const ProbVector& pi, const KernelSpec& kernel, int t, const ParamRecord& theta);

/// Bayes update of Mult(n, pi_pred) by y ~ Bin(x, q), projected back onto a
/// multinomial with matching mean. Throws ObservationExceedsPopulation or
/// DegenerateUpdate (all unobserved mass has zero probability while sum y < n).
UpdateResultX update_x(const ProbVector& pi_pred, const CountVector& y, const Vec& q, std::int64_t n,
                       bool include_factorials = true);

JointMatrix predict_z(const ProbVector& pi, const StochMatrix& k);
JointMatrix predict_z(const ProbVector& pi, const KernelSpec& kernel, int t, const ParamRecord& theta);

UpdateResultZ update_z(const JointMatrix& p_pred, const CountMatrix& y, const Mat& q, std::int64_t n,
                       bool include_factorials = true);

struct FilterStepX {
  ProbVector pi_pred;
  ProbVector pi_filt;
  double log_w = 0.0;
  double cumulative_loglik = 0.0;
  CountVector y;
  std::int64_t remaining = 0;
  Vec residual;
};

struct FilterTraceX {
  std::int64_t n = 0;
  ProbVector pi0;
  std::vector<FilterStepX> steps;  // steps[t-1] is time t
  double loglik = 0.0;

  int horizon() const { return int(steps.size()); }
  /// pi_{t|t}; t = 0 gives pi0.
  const ProbVector& filtered(int t) const { return t == 0 ? pi0 : steps.at(std::size_t(t - 1)).pi_filt; }
};

struct FilterStepZ {
  JointMatrix p_pred;
  JointMatrix p_filt;
  ProbVector pi_filt;
  double log_w = 0.0;
  double cumulative_loglik = 0.0;
  CountMatrix y;
  std::int64_t remaining = 0;
  Mat residual;
};

struct FilterTraceZ {
  std::int64_t n = 0;
  ProbVector pi0;
  std::vector<FilterStepZ> steps;
  double loglik = 0.0;

  int horizon() const { return int(steps.size()); }
  const ProbVector& filtered(int t) const { return t == 0 ? pi0 : steps.at(std::size_t(t - 1)).pi_filt; }
};

FilterTraceX filter_x(const ModelSpec& spec, const ObservationsX& obs, const FilterOptions& opts = {});
FilterTraceZ filter_z(const ModelSpec& spec, const ObservationsZ& obs, const FilterOptions& opts = {});

/// Approximate log p(Y_{1:T}) without storing the trace.
double loglik_z(const ModelSpec& spec, const ObservationsZ& obs, bool include_factorials = true);
double loglik_x(const ModelSpec& spec, const ObservationsX& obs, bool include_factorials = true);

/// Per-compartment posterior mean and equal-tail credible interval of x_t
/// under the shifted-multinomial filtering approximation y_t + x*_t.
struct MarginalSummary {
  Vec mean;
  Vec lower;
  Vec upper;
};

MarginalSummary filtered_mean_and_ci(const FilterTraceX& trace, int t, double level = 0.95);
MarginalSummary filtered_mean_and_ci(const FilterTraceZ& trace, int t, double level = 0.95);

/// Smallest k with P(Bin(trials, p) <= k) >= prob.
std::int64_t binomial_quantile(std::int64_t trials, double p, double prob);

}  // namespace epimn
