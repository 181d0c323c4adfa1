#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>

namespace embryoforge {

/// Seeded generator. The engine is std::mt19937_64 (fully specified by the
/// standard); the distributions below are hand-rolled so samples are
/// identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const;
  void set_state(std::string_view text);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer over (master, FNV-1a(name)).
std::uint64_t derive_seed(std::uint64_t master, std::string_view name);

namespace streams {
inline constexpr std::string_view kInit = "init";
inline constexpr std::string_view kDataOrder = "data-order";
inline constexpr std::string_view kAugment = "augment";
inline constexpr std::string_view kDropout = "dropout";
inline constexpr std::string_view kLatent = "latent";
inline constexpr std::string_view kEpsilon = "epsilon";
}  // namespace streams

/// Named generators expanded from one master seed. Each stream's sequence
/// depends only on (master, name), so using one stream more or less never
/// shifts another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t master = 0) : master_(master) {}

  Rng& stream(std::string_view name);
  std::uint64_t master() const { return master_; }

  /// Streams touched so far, keyed by name.
  const std::map<std::string, Rng, std::less<>>& all() const { return streams_; }
  void restore(std::string_view name, std::string_view state);

 private:
  std::uint64_t master_;
  std::map<std::string, Rng, std::less<>> streams_;
};

}  // namespace embryoforge
