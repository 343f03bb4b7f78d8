#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace gpcn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Pseudo-random engine used by every sampler in the library.
using Rng = std::mt19937_64;

/// Named sub-streams derived from a single master seed.
enum class Stream : std::uint64_t {
  kData = 1,
  kTuning = 2,
  kChain = 3,
  kLab = 4,
};

/// SplitMix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent seed for `stream` (and an optional sub-index) from
/// `master`. The mapping is splitmix64(master ^ splitmix64(stream * 2^32 + index)),
/// which is stable across platforms and releases.
std::uint64_t split_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0);

/// Fills a vector of dimension `n` with independent standard normal draws.
Vector standard_normal(Rng& rng, Eigen::Index n);

/// Uniform draw on [0, 1).
double uniform01(Rng& rng);

}  // namespace gpcn
