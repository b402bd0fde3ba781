#pragma once

// Reproducible sampling primitives. The engine is Boost's mt19937_64 and the
// samplers are Boost.Random's, whose output is fixed by the Boost sources
// rather than by the standard library vendor.

#include <cstdint>
#include <span>

#include <boost/random/mersenne_twister.hpp>

#include "epimn/core.hpp"

namespace epimn {

using Rng = boost::random::mt19937_64;

/// Derives the seed of sub-stream `stream` from a master seed (splitmix64 of
/// master xor splitmix64(stream + 1)). Replicate r of a batch uses stream r.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream);

std::int64_t sample_binomial(Rng& rng, std::int64_t n, double p);
/// Sequential conditional-binomial draw of Mult(n, p); p need not be normalized
/// beyond rounding.
IVec sample_multinomial(Rng& rng, std::int64_t n, const Vec& p);
CountMatrix sample_multinomial_matrix(Rng& rng, std::int64_t n, const Mat& p);
double sample_normal(Rng& rng, double mean, double sd);
double sample_uniform(Rng& rng);
std::size_t sample_categorical(Rng& rng, std::span<const double> weights);

}  // namespace epimn
