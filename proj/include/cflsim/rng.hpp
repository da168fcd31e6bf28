#pragma once

#include <cstdint>
#include <random>

namespace cflsim {

// Independent random streams, each keyed by (master seed, purpose, a, b).
// Keys let any draw be replayed without touching the other streams: the
// channel gain of client 7 in round 12 does not depend on how many training
// batches were shuffled before it.
enum class Stream : std::uint64_t {
  dataset = 1,
  label_subset = 2,
  client_samples = 3,
  minibatch = 4,
  model_init = 5,
  profile = 6,
  channel = 7,
  selection = 8,
  incongruence = 9,
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                          std::uint64_t b = 0);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
  return Rng{derive_seed(master, stream, a, b)};
}

// Uniform in [0, 1) from the top 53 bits; unlike std::uniform_real_distribution
// the mapping is fixed, so draws are identical across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(Rng& rng);
double unit_exponential(Rng& rng);

}  // namespace cflsim
