#pragma once

#include <cstdint>
#include <random>

namespace nvlab {

// Deterministic RNG stream. Parallel chains and replicas each get their own
// stream derived from (master seed, stream index), so results do not depend on
// worker count or scheduling. Conversions from raw bits to doubles are done by
// hand to keep output identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0);

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double a, double b);    // [a, b)
  double normal();                       // standard normal (polar method)
  std::size_t index(std::size_t n);      // uniform over {0, ..., n-1}

 private:
  std::mt19937_64 eng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace nvlab
