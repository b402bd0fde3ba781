#include "epimn/experiments.hpp"

#include <cmath>
#include <mutex>

#include "epimn/parallel.hpp"

namespace epimn {

EbolaParams ebola_true_params() { return {0.2, 0.2, 0.2, 0.143, kEbolaQ23, kEbolaQ34}; }

Mat ebola_reporting_matrix(double q23, double q34) {
  Mat q = Mat::Zero(4, 4);
  q(kCaseFrom, kCaseTo) = q23;
  q(kDeathFrom, kDeathTo) = q34;
  return q;
}

EbolaSynthetic simulate_ebola(const EbolaSimConfig& c, std::uint64_t seed) {
  EbolaData proto;
  proto.n = c.n;
  proto.pi0 = EbolaData::default_pi0(c.n);
  proto.t_star = c.t_star;
  const ModelSpec spec = ebola_model(proto, c.theta);
  IVec x0(4);
  if (c.x0.empty()) {
    x0 << c.n - 1, 1, 0, 0;
  } else {
    if (c.x0.size() != 4) throw Error(ErrorCode::ShapeMismatch, "x0 needs 4 entries");
    for (int i = 0; i < 4; ++i) x0[i] = c.x0[std::size_t(i)];
    if (x0.sum() != c.n) throw Error(ErrorCode::Config, "x0 must sum to n");
    // The fitted model starts from the seeded state.
    proto.pi0 = ProbVector(Vec(x0.cast<double>() / double(c.n)));
  }
  const std::vector<Mat> q{ebola_reporting_matrix(c.theta.q23, c.theta.q34)};

  for (int a = 0; a < c.max_attempts; ++a) {
    const std::uint64_t s = stream_seed(seed, std::uint64_t(a));
    LatentTrajectory traj = c.horizon > 0 ? simulate_latent(spec, CountVector(x0), c.horizon, s)
                                          : simulate_until_extinction(spec, CountVector(x0), s);
    std::int64_t infections = 0;
    for (const CountMatrix& z : traj.z) infections += z(0, 1);
    if (infections < c.min_infections) continue;
    const std::vector<CountMatrix> y = simulate_obs_z(traj, q, stream_seed(s, 1));
    EbolaSynthetic out;
    out.data = proto;
    out.data.y = y;
    Mat rep = Mat::Zero(4, 4);
    rep(kCaseFrom, kCaseTo) = 1.0;
    rep(kDeathFrom, kDeathTo) = 1.0;
    out.data.reported.assign(y.size(), rep);
    out.latent = std::move(traj);
    out.seed_used = s;
    out.attempts = a + 1;
    return out;
  }
  throw Error(ErrorCode::HorizonCapReached, "no simulated outbreak reached the requested size");
}

BiasCoverageResult bias_coverage(const BiasCoverageConfig& c) {
  if (c.replicates < 1 || c.horizon < 0) throw Error(ErrorCode::Config, "replicates must be positive");
  BiasCoverageResult out;
  const int m = 4;
  const auto tt = std::size_t(c.horizon);
  for (std::size_t k = 0; k < c.n_values.size(); ++k) {
    const std::int64_t n = c.n_values[k];
    EbolaData proto;
    proto.n = n;
    proto.pi0 = EbolaData::default_pi0(n);
    proto.t_star = c.t_star;
    const ModelSpec spec = ebola_model(proto, c.theta);
    const Mat q = ebola_reporting_matrix(c.theta.q23, c.theta.q34);
    const std::uint64_t base = stream_seed(c.seed, k);

    Mat err_sum = Mat::Zero(Eigen::Index(tt), m);
    Mat hits = Mat::Zero(Eigen::Index(tt), m);
    std::mutex mu;
    parallel_for(std::size_t(c.replicates), c.threads, [&](std::size_t r) {
      const std::uint64_t s = stream_seed(base, r);
      const LatentTrajectory traj = simulate_latent(spec, c.horizon, s);
      ObservationsZ obs;
      obs.y = simulate_obs_z(traj, {q}, stream_seed(s, 1));
      obs.q.assign(obs.y.size(), q);
      const FilterTraceZ trace = filter_z(spec, obs);
      Mat e(Eigen::Index(tt), m), h(Eigen::Index(tt), m);
      for (int t = 1; t <= c.horizon; ++t) {
        const MarginalSummary ms = filtered_mean_and_ci(trace, t, c.level);
        const CountVector& x = traj.x[std::size_t(t)];
        for (int i = 0; i < m; ++i) {
          e(t - 1, i) = ms.mean[i] - double(x[i]);
          h(t - 1, i) = (double(x[i]) >= ms.lower[i] && double(x[i]) <= ms.upper[i]) ? 1.0 : 0.0;
        }
      }
      std::lock_guard<std::mutex> lock(mu);
      err_sum += e;
      hits += h;
    });
    for (std::size_t t = 0; t < tt; ++t) {
      for (int i = 0; i < m; ++i) {
        BiasCoverageCell cell{n, int(t) + 1, i, err_sum(Eigen::Index(t), i) / c.replicates,
                              hits(Eigen::Index(t), i) / c.replicates};
        out.max_abs_bias = std::max(out.max_abs_bias, std::abs(cell.bias));
        out.min_coverage = std::min(out.min_coverage, cell.coverage);
        out.cells.push_back(cell);
      }
    }
  }
  return out;
}

}  // namespace epimn
