#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace comcure::rng {

using Engine = std::mt19937_64;

// Independent stream per (seed, stream) pair; seed_seq scrambling keeps
// nearby stream ids decorrelated.
inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Engine(seq);
}

// Uniform on (0,1). Built from raw engine bits instead of
// std::uniform_real_distribution so that draws are identical across
// standard library implementations. 53-bit mantissa, offset by half a
// step so 0 and 1 are never returned.
inline double uniform01(Engine& eng) {
  return (static_cast<double>(eng() >> 11) + 0.5) * 0x1p-53;
}

inline double uniform(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

// Uniform integer on [lo, hi], both ends included. Rejection-free
// multiply-shift would bias tiny ranges negligibly; for the small ranges
// used here a floor of the scaled draw is exact enough and deterministic.
inline int uniform_int(Engine& eng, int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>((eng() >> 11) % span);
}

inline bool bernoulli(Engine& eng, double p) { return uniform01(eng) < p; }

inline double exponential(Engine& eng, double rate) {
  return -std::log(uniform01(eng)) / rate;
}

inline double weibull(Engine& eng, double shape, double scale) {
  return scale * std::pow(-std::log(uniform01(eng)), 1.0 / shape);
}

}  // namespace comcure::rng
