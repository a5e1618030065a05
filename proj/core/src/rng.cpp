// SPDX-License-Identifier: Apache-2.0
#include "ipesr/rng.hpp"

#include <stdexcept>

namespace ipesr {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed,
                           std::initializer_list<std::uint64_t> counters) {
  std::uint64_t key = splitmix64(seed);
  for (std::uint64_t c : counters) key = splitmix64(key ^ splitmix64(c + 0x632BE59BD9B4E019ULL));
  engine_.seed(key);
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RandomStream::below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

}  // namespace ipesr
