#include "epimn/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "epimn/parallel.hpp"
#include "epimn/smooth.hpp"

namespace epimn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

ParamRecord with_beta(const ParamRecord& base, const std::string& name, double beta) {
  ParamRecord theta = base;
  theta.set(name, beta);
  if (theta.schedule(name) != nullptr) theta.set_schedule(name, {});
  return theta;
}

}  // namespace

ParamRecord ParticleEnsemble::theta_for(double b) const { return with_beta(spec.theta, beta_name, b); }

std::size_t ParticleEnsemble::parent(int s, std::size_t i) const {
  if (s < 2) return i;
  return ancestors.at(std::size_t(s - 2)).at(i);
}

const ProbVector& ParticleEnsemble::parent_pi(int s, std::size_t i) const {
  if (s < 2) return spec.pi0;
  return pi_filt[std::size_t(s - 2)][parent(s, i)];
}

JointMatrix ParticleEnsemble::p_filt(int s, std::size_t i) const {
  const ProbVector& pi = parent_pi(s, i);
  const JointMatrix pred = predict_z(pi, spec.kernel, s, theta_for(beta[std::size_t(s - 1)][i]));
  const auto k = std::size_t(s - 1);
  return update_z(pred, obs.y[k], obs.q[k], spec.n).p_filt;
}

double effective_sample_size(const std::vector<double>& w) {
  double s2 = 0.0;
  for (double x : w) s2 += x * x;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

std::vector<std::size_t> resample(Rng& rng, const std::vector<double>& weights, Resampling scheme) {
  const std::size_t n = weights.size();
  std::vector<double> cum(n);
  std::partial_sum(weights.begin(), weights.end(), cum.begin());
  const double total = cum.empty() ? 0.0 : cum.back();
  if (!(total > 0.0)) throw Error(ErrorCode::AllWeightsZero, "cannot resample with zero total weight");
  auto locate = [&](double u) {
    const auto it = std::upper_bound(cum.begin(), cum.end(), u * total);
    return std::min<std::size_t>(std::size_t(it - cum.begin()), n - 1);
  };
  std::vector<std::size_t> out(n);
  if (scheme == Resampling::Systematic) {
    const double u0 = sample_uniform(rng) / double(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = locate(u0 + double(i) / double(n));
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = locate(sample_uniform(rng));
  }
  return out;
}

ParticleEnsemble smc_filter(const ModelSpec& spec, const ObservationsZ& obs, double sigma_v, double beta0,
                            int n_part, std::uint64_t seed, const SMCOptions& opts) {
  if (n_part < 1) throw Error(ErrorCode::Config, "n_part must be at least 1");
  check_constraint("sigma_V", sigma_v, Constraint::NonNegative);
  check_constraint("beta0", beta0, Constraint::NonNegative);
  obs.validate(spec.m);

  ParticleEnsemble e;
  e.spec = spec;
  e.obs = obs;
  e.n_part = n_part;
  e.beta_name = opts.beta_name;
  const auto np = std::size_t(n_part);
  const int t_max = obs.horizon();
  e.beta.reserve(std::size_t(t_max));

  Rng rng(seed);
  std::vector<double> cur_beta(np, beta0);
  std::vector<ProbVector> cur_pi(np, spec.pi0);

  for (int s = 1; s <= t_max; ++s) {
    const auto k = std::size_t(s - 1);
    std::vector<double> b(np), lw(np);
    std::vector<ProbVector> pi(np);
    for (std::size_t i = 0; i < np; ++i) {
      b[i] = cur_beta[i] * std::exp(sample_normal(rng, 0.0, sigma_v));
      try {
        const JointMatrix pred = predict_z(cur_pi[i], spec.kernel, s, e.theta_for(b[i]));
        UpdateResultZ up = update_z(pred, obs.y[k], obs.q[k], spec.n);
        lw[i] = up.log_w;
        pi[i] = up.p_filt.column_marginal();
      } catch (const Error& err) {
        if (err.code() != ErrorCode::DegenerateUpdate) throw;
        lw[i] = kNegInf;
        pi[i] = cur_pi[i];
      }
    }
    const double mx = *std::max_element(lw.begin(), lw.end());
    if (!std::isfinite(mx)) {
      throw Error(ErrorCode::AllWeightsZero, "every particle gives zero probability at t=" + std::to_string(s));
    }
    std::vector<double> w(np);
    double sum = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      w[i] = std::isfinite(lw[i]) ? std::exp(lw[i] - mx) : 0.0;
      sum += w[i];
    }
    for (double& x : w) x /= sum;
    const double inc = mx + std::log(sum / double(np));
    e.loglik_increment.push_back(inc);
    e.loglik += inc;
    e.ess.push_back(effective_sample_size(w));
    std::vector<std::size_t> anc = resample(rng, w, opts.resampling);
    for (std::size_t i = 0; i < np; ++i) {
      cur_beta[i] = b[anc[i]];
      cur_pi[i] = pi[anc[i]];
    }
    e.beta.push_back(std::move(b));
    e.pi_filt.push_back(std::move(pi));
    e.log_w.push_back(std::move(lw));
    e.weights.push_back(std::move(w));
    e.ancestors.push_back(std::move(anc));
  }
  return e;
}

SmoothedDraw backward_sample(const ParticleEnsemble& e, std::uint64_t seed) {
  Rng rng(seed);
  return backward_sample(e, rng);
}

SmoothedDraw backward_sample(const ParticleEnsemble& e, Rng& rng) {
  const int t = e.horizon();
  SmoothedDraw d;
  if (t == 0) return d;
  const auto tt = std::size_t(t);
  d.beta_tilde.resize(tt);
  d.p_tilde.resize(tt);
  d.z_tilde.resize(tt);
  d.lineage.resize(tt);
  const int m = e.spec.m;

  std::size_t zeta = sample_categorical(rng, e.weights[tt - 1]);
  d.lineage[tt - 1] = zeta;
  d.beta_tilde[tt - 1] = e.beta[tt - 1][zeta];
  d.p_tilde[tt - 1] = e.p_filt(t, zeta);
  d.z_tilde[tt - 1] = sample_multinomial_matrix(rng, e.spec.n, d.p_tilde[tt - 1].values());

  for (int s = t - 1; s >= 1; --s) {
    const auto k = std::size_t(s - 1);
    const ProbVector pi_st = d.p_tilde[k + 1].row_marginal();
    zeta = e.ancestors[k][zeta];
    d.lineage[k] = zeta;
    d.beta_tilde[k] = e.beta[k][zeta];
    const Mat l = backward_kernel_z(e.p_filt(s, zeta));
    const CountVector x_s = d.z_tilde[k + 1].row_sums();
    IMat z = IMat::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      if (x_s[i] == 0) continue;
      if (l.row(i).sum() <= 0.0) {
        throw Error(ErrorCode::ZeroDenominator, "sampled count in compartment with zero filtering mass");
      }
      z.col(i) = sample_multinomial(rng, x_s[i], Vec(l.row(i).transpose()));
    }
    d.z_tilde[k] = CountMatrix(std::move(z));
    d.p_tilde[k] = JointMatrix(Mat(l.transpose() * pi_st.values().asDiagonal()));
  }
  return d;
}

double quantile(std::vector<double> v, double prob) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = prob * double(v.size() - 1);
  const auto lo = std::size_t(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

BandSummary summarize_series(const std::vector<std::vector<double>>& series) {
  BandSummary b;
  if (series.empty()) return b;
  const std::size_t len = series.front().size();
  std::vector<double> col(series.size());
  for (std::size_t s = 0; s < len; ++s) {
    double sum = 0.0;
    for (std::size_t d = 0; d < series.size(); ++d) {
      if (series[d].size() != len) throw Error(ErrorCode::ShapeMismatch, "series lengths differ");
      col[d] = series[d][s];
      sum += col[d];
    }
    b.mean.push_back(sum / double(series.size()));
    b.q025.push_back(quantile(col, 0.025));
    b.q25.push_back(quantile(col, 0.25));
    b.q75.push_back(quantile(col, 0.75));
    b.q975.push_back(quantile(col, 0.975));
  }
  return b;
}

DerivedSeries derive_series(const SmoothedDraw& draw, std::int64_t n, const DerivedParams& th, Rng& rng) {
  const std::size_t t = draw.beta_tilde.size();
  DerivedSeries out;
  const double p_onset = 1.0 - std::exp(-std::exp(-th.gamma * th.kappa));
  const double p_conf = 1.0 - std::exp(-th.kappa);
  std::int64_t f_w = 0, f_t = 0;
  for (std::size_t s = 0; s < t; ++s) {
    out.r.push_back(draw.beta_tilde[s] / th.gamma);
    const JointMatrix& p = draw.p_tilde[s];
    const std::int64_t zw = sample_binomial(rng, n, p(th.wuhan_from, th.wuhan_to));
    out.onset_w.push_back(double(sample_binomial(rng, zw, th.q_w)));
    const std::int64_t zt = sample_binomial(rng, n, p(th.travel_from, th.travel_to));
    out.onset_t.push_back(double(sample_binomial(rng, zt, th.q_t)));

    const CountMatrix& z = draw.z_tilde[s];
    const std::int64_t df_w = sample_binomial(rng, z(th.wuhan_from, th.wuhan_to), p_onset);
    const std::int64_t dc_w = sample_binomial(rng, f_w, p_conf);
    const std::int64_t df_t = sample_binomial(rng, z(th.travel_from, th.travel_to), p_onset);
    const std::int64_t dc_t = sample_binomial(rng, f_t, p_conf);
    out.conf_w.push_back(double(dc_w));
    out.conf_t.push_back(double(dc_t));
    f_w += df_w - dc_w;
    f_t += df_t - dc_t;
  }
  return out;
}

std::map<std::string, BandSummary> derived_quantities(const std::vector<SmoothedDraw>& draws, std::int64_t n,
                                                      const DerivedParams& theta, std::uint64_t seed) {
  if (draws.empty()) throw Error(ErrorCode::Config, "no smoothed draws to summarize");
  if (theta.predictive_draws < 1) throw Error(ErrorCode::Config, "predictive_draws must be at least 1");
  Rng rng(seed);
  std::vector<std::vector<double>> r, ow, ot, cw, ct;
  for (const SmoothedDraw& d : draws) {
    for (int k = 0; k < theta.predictive_draws; ++k) {
      DerivedSeries s = derive_series(d, n, theta, rng);
      r.push_back(std::move(s.r));
      ow.push_back(std::move(s.onset_w));
      ot.push_back(std::move(s.onset_t));
      cw.push_back(std::move(s.conf_w));
      ct.push_back(std::move(s.conf_t));
    }
  }
  return {{"R", summarize_series(r)},
          {"onset_wuhan", summarize_series(ow)},
          {"onset_intl", summarize_series(ot)},
          {"confirmed_wuhan", summarize_series(cw)},
          {"confirmed_intl", summarize_series(ct)}};
}

SMCRunsResult smc_runs(const ModelSpec& spec, const ObservationsZ& obs, const SMCRunConfig& c) {
  if (c.runs < 1 || c.draws_per_run < 1) throw Error(ErrorCode::Config, "runs and draws_per_run must be positive");
  SMCRunsResult out;
  const auto runs = std::size_t(c.runs);
  std::vector<std::vector<SmoothedDraw>> per_run(runs);
  out.ess.resize(runs);
  out.loglik.resize(runs);
  parallel_for(runs, c.threads, [&](std::size_t r) {
    Rng rng(stream_seed(c.seed, r));
    const std::uint64_t filter_seed = rng();
    const ParticleEnsemble e = smc_filter(spec, obs, c.sigma_v, c.beta0, c.n_part, filter_seed, c.options);
    for (int k = 0; k < c.draws_per_run; ++k) per_run[r].push_back(backward_sample(e, rng));
    out.ess[r] = e.ess;
    out.loglik[r] = e.loglik;
  });
  for (auto& v : per_run)
    for (auto& d : v) out.draws.push_back(std::move(d));
  return out;
}

}  // namespace epimn
