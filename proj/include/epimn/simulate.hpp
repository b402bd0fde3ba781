#pragma once

#include <optional>
#include <vector>

#include "epimn/models.hpp"
#include "epimn/random.hpp"

namespace epimn {

/// x[t] for t = 0..T and z[t-1] = Z_t for t = 1..T.
struct LatentTrajectory {
  std::vector<CountVector> x;
  std::vector<CountMatrix> z;

  int horizon() const { return int(z.size()); }
};

inline constexpr int kExtinctionCap = 100000;

/// Draws x_0 ~ Mult(n, pi0), then row-wise multinomial transitions.
LatentTrajectory simulate_latent(const ModelSpec& spec, int horizon, std::uint64_t seed);
/// Same, from a fixed initial state.
LatentTrajectory simulate_latent(const ModelSpec& spec, const CountVector& x0, int horizon,
                                 std::uint64_t seed);

/// One transition Z_t given x_{t-1}.
CountMatrix simulate_step(const ModelSpec& spec, int t, const CountVector& x_prev, Rng& rng);

/// y_t^(i) ~ Bin(x_t^(i), q_t^(i)); q has either one entry (broadcast) or one per t.
std::vector<CountVector> simulate_obs_x(const LatentTrajectory& traj, const std::vector<Vec>& q,
                                        std::uint64_t seed);
/// y_t^(i,j) ~ Bin(z_t^(i,j), q_t^(i,j)).
std::vector<CountMatrix> simulate_obs_z(const LatentTrajectory& traj, const std::vector<Mat>& q,
                                        std::uint64_t seed);

/// Runs until every compartment except the first and the last is empty.
/// Throws HorizonCapReached after `cap` steps.
LatentTrajectory simulate_until_extinction(const ModelSpec& spec, std::optional<CountVector> x0,
                                           std::uint64_t seed, int cap = kExtinctionCap);

bool is_extinct(const CountVector& x);

}  // namespace epimn
