#pragma once

#include <cstdint>

namespace bfc {

// Name recorded in histogram / summary metadata for reproducibility.
inline constexpr const char* kRngName = "splitmix64/ptrs";

uint64_t splitmix64(uint64_t x);

// Counter-based generator: every (seed, stream) pair yields an independent
// deterministic sequence, so draws can be assigned per bin / per resample
// without any ordering or sharing concerns.
class CounterRng {
  public:
    CounterRng(uint64_t seed, uint64_t stream);

    uint64_t next_u64();
    double next_u01();  // uniform on (0,1)

  private:
    uint64_t state_;
};

// Poisson sample with the given mean; returns an integer-valued double so
// means up to ~2^53 are representable. Knuth inversion below mean 10,
// Hormann's PTRS transformed rejection above.
double poisson_sample(double mean, CounterRng& rng);

}  // namespace bfc
