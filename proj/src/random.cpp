#include "epimn/random.hpp"

#include <algorithm>
#include <cmath>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace epimn {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 1));
}

std::int64_t sample_binomial(Rng& rng, std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  boost::random::binomial_distribution<std::int64_t, double> dist(n, p);
  return dist(rng);
}

IVec sample_multinomial(Rng& rng, std::int64_t n, const Vec& p) {
  IVec out = IVec::Zero(p.size());
  std::int64_t remaining = n;
  double mass = p.sum();
  for (Eigen::Index j = 0; j + 1 < p.size() && remaining > 0; ++j) {
    const double frac = mass > 0.0 ? std::clamp(p[j] / mass, 0.0, 1.0) : 0.0;
    const std::int64_t draw = sample_binomial(rng, remaining, frac);
    out[j] = draw;
    remaining -= draw;
    mass -= p[j];
  }
  if (remaining > 0) {
    // Rounding may leave the tail with no mass; place the remainder on the
    // last positive-probability category.
    Eigen::Index last = p.size() - 1;
    while (last > 0 && p[last] <= 0.0) --last;
    out[last] += remaining;
  }
  return out;
}

CountMatrix sample_multinomial_matrix(Rng& rng, std::int64_t n, const Mat& p) {
  const Eigen::Index m = p.rows();
  Vec flat(m * m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) flat[i * m + j] = p(i, j);
  const IVec draw = sample_multinomial(rng, n, flat);
  IMat z(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) z(i, j) = draw[i * m + j];
  return CountMatrix(std::move(z));
}

double sample_normal(Rng& rng, double mean, double sd) {
  if (sd == 0.0) return mean;
  boost::random::normal_distribution<double> dist(mean, sd);
  return dist(rng);
}

double sample_uniform(Rng& rng) {
  boost::random::uniform_01<double> dist;
  return dist(rng);
}

std::size_t sample_categorical(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = sample_uniform(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace epimn
