#pragma once

#include <cstdint>
#include <initializer_list>

namespace coopsim::scenario {

// What a stream is used for; part of the stream key.
enum class StreamPurpose : std::uint64_t {
  ScenarioLayout = 1,
  Perception = 2,
  Corruption = 3,
  Embedding = 4,
  Test = 99,
};

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based generator: value i of a stream is splitmix64(key + i * gamma),
// so a stream is fully determined by its key and position and never depends
// on what other streams have drawn. Keys are derived by hashing a master
// seed together with an ordered list of identifiers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}
  RngStream(std::uint64_t seed, StreamPurpose purpose, std::initializer_list<std::uint64_t> ids);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one value per two uniforms, no caching).
  double normal();
  // Knuth's multiplication method; fine for the small rates used here.
  std::uint32_t poisson(double lambda);

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace coopsim::scenario
