#pragma once

// Portable random sampling. std::*_distribution output is implementation
// defined, so every sampler here is written against the raw mt19937_64 stream,
// which the standard pins bit-for-bit.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

namespace mecoff {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn stream labels into seeds.
inline constexpr std::uint64_t label_hash(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent generator for a named substream of a master seed.
inline Rng substream(std::uint64_t master_seed, std::string_view label) {
  return Rng(splitmix64(splitmix64(master_seed) ^ label_hash(label)));
}

namespace streams {
inline constexpr std::string_view kEnvChannel = "env-channel";
inline constexpr std::string_view kEnvArrivals = "env-arrivals";
inline constexpr std::string_view kAgentInit = "agent-init";
inline constexpr std::string_view kAgentExplore = "agent-explore";
inline constexpr std::string_view kReplaySampling = "replay-sampling";
inline constexpr std::string_view kChannelMatrices = "channel-matrices";
}  // namespace streams

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Unbiased integer in [0, n) by rejection. n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

inline int bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return 1;
  return uniform01(rng) < p ? 1 : 0;
}

/// Poisson draw by CDF inversion; consumes exactly one uniform per call.
inline int poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  const double u = uniform01(rng);
  double pmf = std::exp(-mean);
  double cdf = pmf;
  int k = 0;
  // The tail guard stops accumulation once pmf underflows relative to the CDF.
  while (u >= cdf && k < 10000) {
    ++k;
    pmf *= mean / k;
    if (pmf <= 0.0) break;
    cdf += pmf;
  }
  return k;
}

/// Index drawn from a discrete distribution given as (possibly unnormalized) weights.
inline std::size_t categorical(Rng& rng, const std::vector<double>& probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding can leave u == total; fall back to the last index with mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

/// Row from a flat Dirichlet(1, ..., 1): normalized unit exponentials.
inline std::vector<double> flat_dirichlet(Rng& rng, std::size_t n) {
  std::vector<double> row(n);
  double sum = 0.0;
  for (auto& x : row) {
    x = -std::log(1.0 - uniform01(rng));
    sum += x;
  }
  for (auto& x : row) x /= sum;
  return row;
}

}  // namespace mecoff
