#include "bfc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace bfc {

namespace {
constexpr uint64_t kGolden = 0x9E3779B97F4B9C15ull;
}

uint64_t splitmix64(uint64_t x) {
    uint64_t z = x + kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

CounterRng::CounterRng(uint64_t seed, uint64_t stream)
    : state_(splitmix64(seed) ^ splitmix64(stream * 0xD2B74407B1CE6E93ull + 0x8BB84B93962EACC9ull)) {}

uint64_t CounterRng::next_u64() {
    state_ += kGolden;
    return splitmix64(state_);
}

double CounterRng::next_u01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

namespace {

double poisson_knuth(double mean, CounterRng& rng) {
    const double limit = std::exp(-mean);
    double k = 0.0;
    double p = 1.0;
    do {
        k += 1.0;
        p *= rng.next_u01();
    } while (p > limit);
    return k - 1.0;
}

// Hormann (1993), "The transformed rejection method for generating Poisson
// random variables", algorithm PTRS. Valid for mean >= 10.
double poisson_ptrs(double mean, CounterRng& rng) {
    const double log_mean = std::log(mean);
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        double u = rng.next_u01() - 0.5;
        double v = rng.next_u01();
        double us = 0.5 - std::fabs(u);
        double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) {
            return k;
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_mean - mean - std::lgamma(k + 1.0)) {
            return k;
        }
    }
}

}  // namespace

double poisson_sample(double mean, CounterRng& rng) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw std::invalid_argument("poisson_sample: mean must be finite and nonnegative");
    }
    if (mean == 0.0) {
        return 0.0;
    }
    if (mean < 10.0) {
        return poisson_knuth(mean, rng);
    }
    return poisson_ptrs(mean, rng);
}

}  // namespace bfc
