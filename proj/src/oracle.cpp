#include "epimn/oracle.hpp"

#include <cmath>
#include <limits>

namespace epimn::oracle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void compose(int parts, std::int64_t total, IVec& cur, int pos, std::vector<IVec>& out) {
  if (pos == parts - 1) {
    cur[pos] = total;
    out.push_back(cur);
    return;
  }
  for (std::int64_t k = 0; k <= total; ++k) {
    cur[pos] = k;
    compose(parts, total - k, cur, pos + 1, out);
  }
}

std::vector<std::int64_t> key_of(const IVec& v) { return std::vector<std::int64_t>(v.data(), v.data() + v.size()); }

Vec safe_exp_normalized(const Vec& w, double total) {
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroDenominator, "observations have zero probability under the model");
  return w / total;
}

}  // namespace

double state_count(int m, std::int64_t n) {
  if (m < 1 || n < 0) return 0.0;
  double c = 1.0;
  for (int k = 1; k <= m - 1; ++k) c = c * double(n + k) / double(k);
  return std::round(c);
}

std::vector<IVec> compositions(int parts, std::int64_t total) {
  std::vector<IVec> out;
  if (parts < 1 || total < 0) return out;
  IVec cur(parts);
  compose(parts, total, cur, 0, out);
  return out;
}

StateEnumeration::StateEnumeration(int m, std::int64_t n) : m_(m), n_(n) {
  if (state_count(m, n) > double(kMaxStates)) {
    throw Error(ErrorCode::TooLarge, "state space of size C(n+m-1, m-1) exceeds " + std::to_string(kMaxStates));
  }
  for (IVec& v : compositions(m, n)) {
    index_.emplace(key_of(v), states_.size());
    states_.emplace_back(std::move(v));
  }
}

std::size_t StateEnumeration::index_of(const CountVector& x) const {
  auto it = index_.find(key_of(x.values()));
  if (it == index_.end()) throw Error(ErrorCode::ShapeMismatch, "state not in S_{m,n}");
  return it->second;
}

StateEnumeration enumerate_states(int m, std::int64_t n) { return StateEnumeration(m, n); }

std::vector<CountMatrix> matrices_with_row_sums(const CountVector& row_sums) {
  const int m = int(row_sums.size());
  std::vector<std::vector<IVec>> rows{std::size_t(m)};
  double count = 1.0;
  for (int i = 0; i < m; ++i) {
    rows[std::size_t(i)] = compositions(m, row_sums[i]);
    count *= double(rows[std::size_t(i)].size());
  }
  if (count > double(kMaxStates)) throw Error(ErrorCode::TooLarge, "too many count matrices to enumerate");
  std::vector<CountMatrix> out;
  out.reserve(std::size_t(count));
  std::vector<std::size_t> pick(std::size_t(m), 0);
  IMat z(m, m);
  while (true) {
    for (int i = 0; i < m; ++i) z.row(i) = rows[std::size_t(i)][pick[std::size_t(i)]].transpose();
    out.emplace_back(z);
    int i = m - 1;
    while (i >= 0 && ++pick[std::size_t(i)] == rows[std::size_t(i)].size()) {
      pick[std::size_t(i)] = 0;
      --i;
    }
    if (i < 0) break;
  }
  return out;
}

std::vector<CountMatrix> matrices_with_total(int m, std::int64_t n) {
  if (state_count(m * m, n) > double(kMaxStates)) throw Error(ErrorCode::TooLarge, "too many count matrices to enumerate");
  std::vector<CountMatrix> out;
  for (const IVec& v : compositions(m * m, n)) {
    IMat z(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) z(i, j) = v[i * m + j];
    out.emplace_back(std::move(z));
  }
  return out;
}

std::vector<std::int64_t> flatten(const CountMatrix& z) {
  std::vector<std::int64_t> out;
  out.reserve(std::size_t(z.values().size()));
  for (Eigen::Index i = 0; i < z.size(); ++i)
    for (Eigen::Index j = 0; j < z.size(); ++j) out.push_back(z(i, j));
  return out;
}

double log_binomial_pmf(std::int64_t k, std::int64_t trials, double p) {
  if (k < 0 || k > trials) return kNegInf;
  return log_factorial(trials) - log_factorial(k) - log_factorial(trials - k) + xlogy(double(k), p) +
         xlogy(double(trials - k), 1.0 - p);
}

double log_transition_matrix_pmf(const CountVector& x_prev, const StochMatrix& k, const CountMatrix& z) {
  const Eigen::Index m = x_prev.size();
  double r = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const CountVector row(IVec(z.values().row(i).transpose()));
    if (row.total() != x_prev[i]) return kNegInf;
    r += log_multinomial_pmf(row, Vec(k.values().row(i).transpose()));
  }
  return r;
}

Vec exact_transition_pmf(const CountVector& x_prev, const StochMatrix& k, const StateEnumeration& states) {
  // Convolve the row-wise multinomials one source compartment at a time.
  const int m = int(x_prev.size());
  std::map<std::vector<std::int64_t>, double> acc{{std::vector<std::int64_t>(std::size_t(m), 0), 1.0}};
  for (int i = 0; i < m; ++i) {
    if (x_prev[i] == 0) continue;
    const Vec krow = k.values().row(i).transpose();
    std::map<std::vector<std::int64_t>, double> next;
    for (const IVec& c : compositions(m, x_prev[i])) {
      const double pc = std::exp(log_multinomial_pmf(CountVector(c), krow));
      if (pc == 0.0) continue;
      for (const auto& [key, pk] : acc) {
        std::vector<std::int64_t> sum = key;
        for (int j = 0; j < m; ++j) sum[std::size_t(j)] += c[j];
        next[sum] += pk * pc;
      }
    }
    acc = std::move(next);
  }
  Vec out = Vec::Zero(Eigen::Index(states.size()));
  for (const auto& [key, p] : acc) {
    out[Eigen::Index(states.index_of(CountVector(IVec(Eigen::Map<const IVec>(key.data(), m)))))] += p;
  }
  return out;
}

Vec multinomial_pmf(const ProbVector& pi, const StateEnumeration& states) {
  Vec out(Eigen::Index(states.size()));
  for (std::size_t a = 0; a < states.size(); ++a) out[Eigen::Index(a)] = std::exp(log_multinomial_pmf(states[a], pi.values()));
  return out;
}

Vec mean_proportions(const Vec& pmf, const StateEnumeration& states) {
  Vec mean = Vec::Zero(states.m());
  for (std::size_t a = 0; a < states.size(); ++a) mean += pmf[Eigen::Index(a)] * states[a].values().cast<double>();
  return mean / double(states.n());
}

namespace {

ProbVector proportions(const CountVector& x, std::int64_t n) {
  return ProbVector(Vec(x.values().cast<double>() / double(n)));
}

double log_obs_lik_x(const CountVector& x, const CountVector& y, const Vec& q) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) r += log_binomial_pmf(y[i], x[i], q[i]);
  return r;
}

double log_obs_lik_z(const CountMatrix& z, const CountMatrix& y, const Mat& q) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    for (Eigen::Index j = 0; j < z.size(); ++j) r += log_binomial_pmf(y(i, j), z(i, j), q(i, j));
  return r;
}

Vec initial_pmf(const ModelSpec& spec, const StateEnumeration& states, const Vec* initial) {
  if (initial == nullptr) return multinomial_pmf(spec.pi0, states);
  if (initial->size() != Eigen::Index(states.size())) throw Error(ErrorCode::ShapeMismatch, "initial pmf has wrong size");
  return *initial;
}

}  // namespace

ExactFilterResult exact_filter_x(const ModelSpec& spec, const ObservationsX& obs, EtaMode mode, const Vec* initial) {
  obs.validate(spec.m);
  ExactFilterResult r{enumerate_states(spec.m, spec.n), {}, {}, {}, 0.0, {}, {}};
  const auto& st = r.states;
  const Eigen::Index s = Eigen::Index(st.size());
  Vec post = initial_pmf(spec, st, initial);
  r.posterior.push_back(post);
  r.mean_x.push_back(mean_proportions(post, st) * double(spec.n));

  for (int t = 1; t <= obs.horizon(); ++t) {
    Vec pred = Vec::Zero(s);
    if (mode == EtaMode::MeanField) {
      const StochMatrix k = spec.kernel_at(t, ProbVector(mean_proportions(post, st)));
      for (Eigen::Index a = 0; a < s; ++a) {
        if (post[a] == 0.0) continue;
        pred += post[a] * exact_transition_pmf(st[std::size_t(a)], k, st);
      }
    } else {
      for (Eigen::Index a = 0; a < s; ++a) {
        if (post[a] == 0.0) continue;
        const CountVector& x = st[std::size_t(a)];
        pred += post[a] * exact_transition_pmf(x, spec.kernel_at(t, proportions(x, spec.n)), st);
      }
    }
    Vec joint(s);
    for (Eigen::Index b = 0; b < s; ++b) {
      joint[b] = pred[b] == 0.0 ? 0.0
                                : pred[b] * std::exp(log_obs_lik_x(st[std::size_t(b)], obs.y[std::size_t(t - 1)],
                                                                   obs.q[std::size_t(t - 1)]));
    }
    const double w = joint.sum();
    post = safe_exp_normalized(joint, w);
    r.predicted.push_back(std::move(pred));
    r.log_w.push_back(std::log(w));
    r.loglik += std::log(w);
    r.posterior.push_back(post);
    r.mean_x.push_back(mean_proportions(post, st) * double(spec.n));
  }
  return r;
}

ExactFilterResult exact_filter_z(const ModelSpec& spec, const ObservationsZ& obs, EtaMode mode, const Vec* initial) {
  obs.validate(spec.m);
  ExactFilterResult r{enumerate_states(spec.m, spec.n), {}, {}, {}, 0.0, {}, {}};
  const auto& st = r.states;
  const Eigen::Index s = Eigen::Index(st.size());
  std::vector<std::vector<CountMatrix>> by_rows;
  by_rows.reserve(st.size());
  for (const CountVector& x : st.states()) by_rows.push_back(matrices_with_row_sums(x));

  Vec post = initial_pmf(spec, st, initial);
  r.posterior.push_back(post);
  r.mean_x.push_back(mean_proportions(post, st) * double(spec.n));

  for (int t = 1; t <= obs.horizon(); ++t) {
    const CountMatrix& y = obs.y[std::size_t(t - 1)];
    const Mat& q = obs.q[std::size_t(t - 1)];
    StochMatrix k_mf;
    if (mode == EtaMode::MeanField) k_mf = spec.kernel_at(t, ProbVector(mean_proportions(post, st)));
    Vec pred = Vec::Zero(s);
    Vec joint_x = Vec::Zero(s);
    Mat mean_z = Mat::Zero(spec.m, spec.m);
    for (Eigen::Index a = 0; a < s; ++a) {
      if (post[a] == 0.0) continue;
      const CountVector& x = st[std::size_t(a)];
      const StochMatrix k = mode == EtaMode::MeanField ? k_mf : spec.kernel_at(t, proportions(x, spec.n));
      for (const CountMatrix& z : by_rows[std::size_t(a)]) {
        const double pz = post[a] * std::exp(log_transition_matrix_pmf(x, k, z));
        if (pz == 0.0) continue;
        const auto b = Eigen::Index(st.index_of(z.col_sums()));
        pred[b] += pz;
        const double j = pz * std::exp(log_obs_lik_z(z, y, q));
        joint_x[b] += j;
        mean_z += j * z.values().cast<double>();
      }
    }
    const double w = joint_x.sum();
    post = safe_exp_normalized(joint_x, w);
    r.predicted.push_back(std::move(pred));
    r.log_w.push_back(std::log(w));
    r.loglik += std::log(w);
    r.posterior.push_back(post);
    r.mean_x.push_back(mean_proportions(post, st) * double(spec.n));
    r.mean_z.push_back(mean_z / w);
  }
  return r;
}

MatrixPmf mixture_transition_pmf(const Vec& pmf_prev, const StateEnumeration& states, const StochMatrix& k) {
  MatrixPmf out;
  for (std::size_t a = 0; a < states.size(); ++a) {
    const double pa = pmf_prev[Eigen::Index(a)];
    if (pa == 0.0) continue;
    for (const CountMatrix& z : matrices_with_row_sums(states[a])) {
      const double p = pa * std::exp(log_transition_matrix_pmf(states[a], k, z));
      if (p > 0.0) out[flatten(z)] += p;
    }
  }
  return out;
}

std::vector<Vec> smoothing_recursion_x(const FilterTraceX& trace, const ModelSpec& spec,
                                       const StateEnumeration& states) {
  const int t = trace.horizon();
  const Eigen::Index s_count = Eigen::Index(states.size());
  std::vector<Vec> out(std::size_t(t) + 1);
  out[std::size_t(t)] = multinomial_pmf(trace.filtered(t), states);
  for (int s = t - 1; s >= 0; --s) {
    const ProbVector& pi_ss = trace.filtered(s);
    const Vec mu = multinomial_pmf(pi_ss, states);
    const StochMatrix k = spec.kernel_at(s + 1, pi_ss);
    Mat joint(s_count, s_count);  // (x_s, x_{s+1})
    for (Eigen::Index a = 0; a < s_count; ++a) joint.row(a) = mu[a] * exact_transition_pmf(states[std::size_t(a)], k, states).transpose();
    const Vec norm = joint.colwise().sum().transpose();
    const Vec& next = out[std::size_t(s) + 1];
    Vec cur = Vec::Zero(s_count);
    for (Eigen::Index b = 0; b < s_count; ++b) {
      if (next[b] == 0.0) continue;
      if (!(norm[b] > 0.0)) throw Error(ErrorCode::ZeroDenominator, "smoothing mass on an unreachable state");
      cur += next[b] / norm[b] * joint.col(b);
    }
    out[std::size_t(s)] = std::move(cur);
  }
  return out;
}

std::vector<MatrixPmf> smoothing_recursion_z(const FilterTraceZ& trace) {
  const int t = trace.horizon();
  std::vector<MatrixPmf> out(std::size_t(std::max(t, 0)));
  if (t == 0) return out;
  const int m = int(trace.pi0.size());
  const std::vector<CountMatrix> all = matrices_with_total(m, trace.n);
  auto pmf_of = [&](const JointMatrix& p) {
    MatrixPmf pmf;
    for (const CountMatrix& z : all) {
      const double v = std::exp(log_multinomial_pmf(z, p.values()));
      if (v > 0.0) pmf[flatten(z)] = v;
    }
    return pmf;
  };
  auto unflatten = [m](const std::vector<std::int64_t>& key) {
    IMat z(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) z(i, j) = key[std::size_t(i * m + j)];
    return CountMatrix(std::move(z));
  };
  out[std::size_t(t - 1)] = pmf_of(trace.steps.back().p_filt);
  for (int s = t - 1; s >= 1; --s) {
    // nu(x) = mass of Z_{s+1} with row sums x; mu_{s|s} marginal of column sums.
    std::map<std::vector<std::int64_t>, double> nu;
    for (const auto& [key, p] : out[std::size_t(s)]) nu[key_of(unflatten(key).row_sums().values())] += p;
    const MatrixPmf mu = pmf_of(trace.steps[std::size_t(s - 1)].p_filt);
    std::map<std::vector<std::int64_t>, double> mu_col;
    for (const auto& [key, p] : mu) mu_col[key_of(unflatten(key).col_sums().values())] += p;
    for (const auto& [xkey, v] : nu) {
      if (v > 0.0 && mu_col.count(xkey) == 0) throw Error(ErrorCode::ZeroDenominator, "smoothing mass on an unreachable state");
    }
    MatrixPmf cur;
    for (const auto& [key, p] : mu) {
      const auto xkey = key_of(unflatten(key).col_sums().values());
      auto it = nu.find(xkey);
      if (it == nu.end()) continue;
      cur[key] = p * it->second / mu_col.at(xkey);
    }
    out[std::size_t(s - 1)] = std::move(cur);
  }
  return out;
}

}  // namespace epimn::oracle
