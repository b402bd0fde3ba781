#include "epimn/simulate.hpp"

namespace epimn {

namespace {

ProbVector proportions(const CountVector& x, std::int64_t n) {
  return ProbVector(Vec(x.values().cast<double>() / double(n)));
}

CountVector initial_state(const ModelSpec& spec, Rng& rng) {
  return CountVector(sample_multinomial(rng, spec.n, spec.pi0.values()));
}

void check_initial(const ModelSpec& spec, const CountVector& x0) {
  if (x0.size() != spec.m) throw Error(ErrorCode::ShapeMismatch, "initial state has wrong length");
  if (x0.total() != spec.n) throw Error(ErrorCode::CountExceedsPopulation, "initial state must sum to n");
}

template <class T>
const T& at_time(const std::vector<T>& series, int t) {
  if (series.empty()) throw Error(ErrorCode::Data, "empty reporting schedule");
  return series.size() == 1 ? series.front() : series.at(std::size_t(t - 1));
}

}  // namespace

CountMatrix simulate_step(const ModelSpec& spec, int t, const CountVector& x_prev, Rng& rng) {
  const StochMatrix k = spec.kernel_at(t, proportions(x_prev, spec.n));
  IMat z = IMat::Zero(spec.m, spec.m);
  for (int i = 0; i < spec.m; ++i) {
    if (x_prev[i] == 0) continue;
    z.row(i) = sample_multinomial(rng, x_prev[i], k.values().row(i).transpose()).transpose();
  }
  return CountMatrix(std::move(z));
}

LatentTrajectory simulate_latent(const ModelSpec& spec, const CountVector& x0, int horizon,
                                 std::uint64_t seed) {
  check_initial(spec, x0);
  Rng rng(seed);
  LatentTrajectory traj;
  traj.x.reserve(std::size_t(horizon) + 1);
  traj.z.reserve(std::size_t(horizon));
  traj.x.push_back(x0);
  for (int t = 1; t <= horizon; ++t) {
    traj.z.push_back(simulate_step(spec, t, traj.x.back(), rng));
    traj.x.push_back(traj.z.back().col_sums());
  }
  return traj;
}

LatentTrajectory simulate_latent(const ModelSpec& spec, int horizon, std::uint64_t seed) {
  // The initial draw uses its own stream so that fixed-x0 and random-x0 runs
  // share transition randomness.
  Rng init_rng(stream_seed(seed, 0xffffffffULL));
  return simulate_latent(spec, initial_state(spec, init_rng), horizon, seed);
}

std::vector<CountVector> simulate_obs_x(const LatentTrajectory& traj, const std::vector<Vec>& q,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CountVector> out;
  out.reserve(traj.z.size());
  for (int t = 1; t <= traj.horizon(); ++t) {
    const CountVector& x = traj.x[std::size_t(t)];
    const Vec& qt = at_time(q, t);
    if (qt.size() != x.size()) throw Error(ErrorCode::ShapeMismatch, "reporting vector has wrong length");
    IVec y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = sample_binomial(rng, x[i], qt[i]);
    out.emplace_back(std::move(y));
  }
  return out;
}

std::vector<CountMatrix> simulate_obs_z(const LatentTrajectory& traj, const std::vector<Mat>& q,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CountMatrix> out;
  out.reserve(traj.z.size());
  for (int t = 1; t <= traj.horizon(); ++t) {
    const CountMatrix& z = traj.z[std::size_t(t - 1)];
    const Mat& qt = at_time(q, t);
    if (qt.rows() != z.size()) throw Error(ErrorCode::ShapeMismatch, "reporting matrix has wrong size");
    IMat y(z.size(), z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      for (Eigen::Index j = 0; j < z.size(); ++j) y(i, j) = sample_binomial(rng, z(i, j), qt(i, j));
    out.emplace_back(std::move(y));
  }
  return out;
}

bool is_extinct(const CountVector& x) {
  for (Eigen::Index i = 1; i + 1 < x.size(); ++i)
    if (x[i] != 0) return false;
  return true;
}

LatentTrajectory simulate_until_extinction(const ModelSpec& spec, std::optional<CountVector> x0,
                                           std::uint64_t seed, int cap) {
  if (!x0) {
    Rng init_rng(stream_seed(seed, 0xffffffffULL));
    x0 = initial_state(spec, init_rng);
  }
  check_initial(spec, *x0);
  Rng rng(seed);
  LatentTrajectory traj;
  traj.x.push_back(*x0);
  int t = 0;
  while (!is_extinct(traj.x.back())) {
    if (t >= cap) {
      throw Error(ErrorCode::HorizonCapReached,
                  "epidemic still active after " + std::to_string(cap) + " steps");
    }
    ++t;
    traj.z.push_back(simulate_step(spec, t, traj.x.back(), rng));
    traj.x.push_back(traj.z.back().col_sums());
  }
  return traj;
}

}  // namespace epimn
