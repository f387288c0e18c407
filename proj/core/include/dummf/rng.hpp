#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace dummf {

// Deterministic random source used everywhere in the library.
//
// The standard distributions are implementation-defined and
// std::normal_distribution caches its second draw, which would make
// checkpointed streams non-resumable. All conversions from raw engine output
// are therefore done here, statelessly, so the engine state alone describes
// the stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream for (seed, a, b), e.g. (seed, scene_index) or
  // (seed, step, pass). Streams with different keys do not overlap in
  // practice.
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; consumes exactly two engine draws.
  double normal();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  std::string state() const;
  void set_state(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finaliser; used to derive seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace dummf
