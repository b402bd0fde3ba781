#include "epimn/filter.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/binomial.hpp>

namespace epimn {

void ObservationsX::validate(int m) const {
  if (q.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "y and q series lengths differ");
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t].size() != m || q[t].size() != m) {
      throw Error(ErrorCode::ShapeMismatch, "observation at t=" + std::to_string(t + 1) + " has wrong length");
    }
    for (int i = 0; i < m; ++i) check_constraint("q", q[t][i], Constraint::UnitInterval);
  }
}

ObservationsX ObservationsX::missing(int m, int horizon) {
  ObservationsX obs;
  obs.y.assign(std::size_t(horizon), CountVector::zeros(m));
  obs.q.assign(std::size_t(horizon), Vec::Zero(m));
  return obs;
}

void ObservationsZ::validate(int m) const {
  if (q.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "Y and Q series lengths differ");
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t].size() != m || q[t].rows() != m || q[t].cols() != m) {
      throw Error(ErrorCode::ShapeMismatch, "observation at t=" + std::to_string(t + 1) + " has wrong shape");
    }
    for (Eigen::Index k = 0; k < q[t].size(); ++k) check_constraint("q", q[t](k), Constraint::UnitInterval);
  }
}

ObservationsZ ObservationsZ::missing(int m, int horizon) {
  ObservationsZ obs;
  obs.y.assign(std::size_t(horizon), CountMatrix::zeros(m));
  obs.q.assign(std::size_t(horizon), Mat::Zero(m, m));
  return obs;
}

ProbVector predict_x(const ProbVector& pi, const StochMatrix& k) {
  return ProbVector(Vec(k.values().transpose() * pi.values()));
}

ProbVector predict_x(const ProbVector& pi, const KernelSpec& kernel, int t, const ParamRecord& theta) {
  return predict_x(pi, kernel(t, pi, theta));
}

JointMatrix predict_z(const ProbVector& pi, const StochMatrix& k) {
  return JointMatrix(Mat(pi.values().asDiagonal() * k.values()));
}

JointMatrix predict_z(const ProbVector& pi, const KernelSpec& kernel, int t, const ParamRecord& theta) {
  return predict_z(pi, kernel(t, pi, theta));
}

namespace {

// Shared tail of both update forms: given the observed total, the mass of the
// unobserved part and the sum of y log(p q) terms, returns log w.
double update_log_weight(std::int64_t n, std::int64_t observed, double unobserved_mass, double y_log_terms,
                         double log_y_fact, bool include_factorials) {
  const std::int64_t remaining = n - observed;
  double lw = y_log_terms + xlogy(double(remaining), unobserved_mass);
  if (include_factorials) lw += log_factorial(n) - log_y_fact - log_factorial(remaining);
  return lw;
}

double log_pq(double y, double p, double q) {
  // y (log p + log q) with 0 log 0 = 0 applied to each factor.
  return xlogy(y, p) + xlogy(y, q);
}

}  // namespace

UpdateResultX update_x(const ProbVector& pi_pred, const CountVector& y, const Vec& q, std::int64_t n,
                       bool include_factorials) {
  const Eigen::Index m = pi_pred.size();
  if (y.size() != m || q.size() != m) throw Error(ErrorCode::ShapeMismatch, "update_x shape mismatch");
  const std::int64_t observed = y.total();
  if (observed > n || (y.values().array() > n).any()) {
    throw Error(ErrorCode::ObservationExceedsPopulation, "observed counts exceed population");
  }
  const Vec& pi = pi_pred.values();
  const bool unreported = (q.array() == 0.0).all();
  const Vec unobserved = unreported ? pi : Vec(pi.array() * (1.0 - q.array()));
  const double d = unreported ? 1.0 : unobserved.sum();
  const std::int64_t remaining = n - observed;
  if (remaining > 0 && !(d > 0.0)) {
    throw Error(ErrorCode::DegenerateUpdate, "no unobserved probability mass but sum(y) < n");
  }

  double y_log_terms = 0.0;
  double log_y_fact = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    y_log_terms += log_pq(double(y[i]), pi[i], q[i]);
    if (include_factorials) log_y_fact += log_factorial(y[i]);
  }

  UpdateResultX r;
  r.remaining = remaining;
  r.residual = remaining > 0 ? Vec(unobserved / d) : Vec(Vec::Zero(m));
  const double nn = double(n);
  r.pi_filt = unreported && observed == 0
                  ? pi_pred
                  : ProbVector(Vec(y.values().cast<double>() / nn + (double(remaining) / nn) * r.residual));
  r.log_w = update_log_weight(n, observed, d, y_log_terms, log_y_fact, include_factorials);
  return r;
}

UpdateResultZ update_z(const JointMatrix& p_pred, const CountMatrix& y, const Mat& q, std::int64_t n,
                       bool include_factorials) {
  const Eigen::Index m = p_pred.size();
  if (y.size() != m || q.rows() != m || q.cols() != m) {
    throw Error(ErrorCode::ShapeMismatch, "update_z shape mismatch");
  }
  const std::int64_t observed = y.total();
  if (observed > n || (y.values().array() > n).any()) {
    throw Error(ErrorCode::ObservationExceedsPopulation, "observed counts exceed population");
  }
  const Mat& p = p_pred.values();
  const bool unreported = (q.array() == 0.0).all();
  const Mat unobserved = unreported ? p : Mat(p.array() * (1.0 - q.array()));
  const double d = unreported ? 1.0 : unobserved.sum();
  const std::int64_t remaining = n - observed;
  if (remaining > 0 && !(d > 0.0)) {
    throw Error(ErrorCode::DegenerateUpdate, "no unobserved probability mass but sum(Y) < n");
  }

  double y_log_terms = 0.0;
  double log_y_fact = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto yij = y(i, j);
      if (yij == 0) continue;
      y_log_terms += log_pq(double(yij), p(i, j), q(i, j));
      if (include_factorials) log_y_fact += log_factorial(yij);
    }
  }

  UpdateResultZ r;
  r.remaining = remaining;
  r.residual = remaining > 0 ? Mat(unobserved / d) : Mat(Mat::Zero(m, m));
  const double nn = double(n);
  r.p_filt = unreported && observed == 0
                 ? p_pred
                 : JointMatrix(Mat(y.values().cast<double>() / nn + (double(remaining) / nn) * r.residual));
  r.log_w = update_log_weight(n, observed, d, y_log_terms, log_y_fact, include_factorials);
  return r;
}

FilterTraceX filter_x(const ModelSpec& spec, const ObservationsX& obs, const FilterOptions& opts) {
  obs.validate(spec.m);
  FilterTraceX trace;
  trace.n = spec.n;
  trace.pi0 = spec.pi0;
  if (opts.store_trace) trace.steps.reserve(obs.y.size());
  ProbVector pi = spec.pi0;
  for (int t = 1; t <= obs.horizon(); ++t) {
    const std::size_t k = std::size_t(t - 1);
    ProbVector pred = predict_x(pi, spec.kernel, t, spec.theta);
    UpdateResultX up = update_x(pred, obs.y[k], obs.q[k], spec.n, opts.include_factorials);
    trace.loglik += up.log_w;
    pi = up.pi_filt;
    if (opts.store_trace) {
      trace.steps.push_back(FilterStepX{std::move(pred), std::move(up.pi_filt), up.log_w, trace.loglik,
                                        obs.y[k], up.remaining, std::move(up.residual)});
    }
  }
  return trace;
}

FilterTraceZ filter_z(const ModelSpec& spec, const ObservationsZ& obs, const FilterOptions& opts) {
  obs.validate(spec.m);
  FilterTraceZ trace;
  trace.n = spec.n;
  trace.pi0 = spec.pi0;
  if (opts.store_trace) trace.steps.reserve(obs.y.size());
  ProbVector pi = spec.pi0;
  for (int t = 1; t <= obs.horizon(); ++t) {
    const std::size_t k = std::size_t(t - 1);
    JointMatrix pred = predict_z(pi, spec.kernel, t, spec.theta);
    UpdateResultZ up = update_z(pred, obs.y[k], obs.q[k], spec.n, opts.include_factorials);
    trace.loglik += up.log_w;
    pi = up.p_filt.column_marginal();
    if (opts.store_trace) {
      trace.steps.push_back(FilterStepZ{std::move(pred), std::move(up.p_filt), pi, up.log_w, trace.loglik,
                                        obs.y[k], up.remaining, std::move(up.residual)});
    }
  }
  return trace;
}

double loglik_z(const ModelSpec& spec, const ObservationsZ& obs, bool include_factorials) {
  return filter_z(spec, obs, FilterOptions{include_factorials, false}).loglik;
}

double loglik_x(const ModelSpec& spec, const ObservationsX& obs, bool include_factorials) {
  return filter_x(spec, obs, FilterOptions{include_factorials, false}).loglik;
}

std::int64_t binomial_quantile(std::int64_t trials, double p, double prob) {
  if (trials <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  const boost::math::binomial_distribution<double> dist(double(trials), p);
  auto cdf = [&](std::int64_t k) { return boost::math::cdf(dist, double(k)); };
  const double mean = double(trials) * p;
  const double sd = std::sqrt(mean * (1.0 - p));
  std::int64_t lo = std::max<std::int64_t>(0, std::int64_t(std::floor(mean - 12.0 * sd)) - 2);
  std::int64_t hi = std::min<std::int64_t>(trials, std::int64_t(std::ceil(mean + 12.0 * sd)) + 2);
  if (lo > 0 && cdf(lo) >= prob) lo = 0;
  if (cdf(hi) < prob) hi = trials;
  // Invariant: answer in [lo, hi] and cdf(hi) >= prob.
  while (lo < hi) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (cdf(mid) >= prob) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

namespace {

MarginalSummary shifted_binomial_summary(const Vec& shift, std::int64_t remaining, const Vec& residual,
                                         double level) {
  const Eigen::Index m = shift.size();
  const double tail = 0.5 * (1.0 - level);
  MarginalSummary s{Vec(m), Vec(m), Vec(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double p = remaining > 0 ? std::clamp(residual[i], 0.0, 1.0) : 0.0;
    s.mean[i] = shift[i] + double(remaining) * p;
    s.lower[i] = shift[i] + double(binomial_quantile(remaining, p, tail));
    s.upper[i] = shift[i] + double(binomial_quantile(remaining, p, 1.0 - tail));
  }
  return s;
}

}  // namespace

MarginalSummary filtered_mean_and_ci(const FilterTraceX& trace, int t, double level) {
  if (t == 0) {
    return shifted_binomial_summary(Vec::Zero(trace.pi0.size()), trace.n, trace.pi0.values(), level);
  }
  const FilterStepX& st = trace.steps.at(std::size_t(t - 1));
  return shifted_binomial_summary(st.y.values().cast<double>(), st.remaining, st.residual, level);
}

MarginalSummary filtered_mean_and_ci(const FilterTraceZ& trace, int t, double level) {
  if (t == 0) {
    return shifted_binomial_summary(Vec::Zero(trace.pi0.size()), trace.n, trace.pi0.values(), level);
  }
  const FilterStepZ& st = trace.steps.at(std::size_t(t - 1));
  // x_t is the column sum of Y_t + Z*; a column sum of Mult(N, P) is Bin(N, sum of that column).
  const Vec shift = st.y.values().cast<double>().colwise().sum().transpose();
  const Vec col_mass = st.residual.colwise().sum().transpose();
  return shifted_binomial_summary(shift, st.remaining, col_mass, level);
}

}  // namespace epimn
