#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mcast {

/// Deterministic random stream. Wraps mt19937_64 but generates doubles and
/// bounded ints directly from raw 64-bit output, so sequences are identical
/// across platforms and standard-library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Derives an independent named stream from a master seed. Separate
  /// consumers (channel noise, GA, SA, arrivals) each get their own stream
  /// so one consumer's draw count never perturbs another's sequence.
  static Rng stream(std::uint64_t master_seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return Rng(mix(master_seed ^ h));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(uniform01() * static_cast<double>(n));
  }

  bool bernoulli(double p) { return uniform01() < p; }

private:
  static std::uint64_t mix(std::uint64_t x) { // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

} // namespace mcast
