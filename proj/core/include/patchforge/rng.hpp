#ifndef PATCHFORGE_RNG_HPP_
#define PATCHFORGE_RNG_HPP_

#include <cstdint>
#include <random>

namespace patchforge {

// splitmix64 finalizer; used to derive independent seeds from (seed, key).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);

// Seeded generator with platform-independent conversions. The standard
// distributions are implementation-defined, so draws are built directly from
// the raw mt19937_64 stream to keep runs bit-reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // [0,1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // [0,1) with 24 random bits, exactly representable as float.
  float uniform_float();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

  Rng split(std::uint64_t key) { return Rng(mix_seed(next_u64(), key)); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace patchforge

#endif  // PATCHFORGE_RNG_HPP_
