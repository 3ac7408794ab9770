#pragma once

#include <cstdint>
#include <string_view>

namespace gatediag {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives the seed of a named substream (counter-based), so adding a new
// stage never perturbs the streams of existing ones.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t counter = 0);

// xoshiro256++ with splitmix64 seeding. Self-contained so that draws are
// bit-identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform01();     // [0, 1)
  double uniform_open();  // (0, 1)
  double normal();        // standard normal via Box-Muller
  double exponential();   // unit rate

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gatediag
