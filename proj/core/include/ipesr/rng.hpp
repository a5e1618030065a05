// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ipesr {

// Counter-based stream derivation: every (seed, tag, counters...) tuple maps
// to an independent engine, so the data drawn for a batch item never depends
// on how many workers produced the neighbouring items.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> counters);

  // Uniform double in [0, 1) from the top 53 bits (portable across standard
  // library implementations, unlike std::uniform_real_distribution).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

namespace stream_tag {
inline constexpr std::uint64_t kInit = 0x1001;
inline constexpr std::uint64_t kBatch = 0x2002;
inline constexpr std::uint64_t kToySet = 0x3003;
}  // namespace stream_tag

}  // namespace ipesr
