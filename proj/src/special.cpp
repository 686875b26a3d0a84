#include "bfc/special.hpp"

#include <cmath>
#include <numbers>

namespace bfc {

namespace {
constexpr double kInvSqrtPi = 0.564189583547756286948;  // 1/sqrt(pi)
}

double erfcx(double x) {
    if (x >= 26.0) {
        // erfc underflows past ~26.6; asymptotic series in q = 1/(2x^2).
        // Truncation error ~ 10395 q^6 < 2e-15 at the crossover.
        const double q = 0.5 / (x * x);
        const double series =
            1.0 - q * (1.0 - 3.0 * q * (1.0 - 5.0 * q * (1.0 - 7.0 * q * (1.0 - 9.0 * q))));
        return kInvSqrtPi * series / x;
    }
    if (x >= 0.0) {
        return std::exp(x * x) * std::erfc(x);
    }
    // erfcx(-|x|) = 2 e^{x^2} - erfcx(|x|); overflows when x^2 > ~709.
    return 2.0 * std::exp(x * x) - erfcx(-x);
}

double scaled_erfcx(double logpre, double z) {
    if (z >= 0.0) {
        return std::exp(logpre) * erfcx(z);
    }
    return 2.0 * std::exp(logpre + z * z) - std::exp(logpre) * erfcx(-z);
}

double scaled_erfcx_prime(double logpre, double z) {
    return 2.0 * z * scaled_erfcx(logpre, z) - 2.0 * kInvSqrtPi * std::exp(logpre);
}

double scaled_erfcx_pprime(double logpre, double z) {
    return (2.0 + 4.0 * z * z) * scaled_erfcx(logpre, z) -
           4.0 * z * kInvSqrtPi * std::exp(logpre);
}

double gauss_exp_conv(double k, double s, double tau) {
    const double c = k * s / std::numbers::sqrt2;
    const double v = tau / (s * std::numbers::sqrt2);
    const double lp = -v * v;
    return 0.5 * (scaled_erfcx(lp, c - v) + scaled_erfcx(lp, c + v));
}

double gauss_exp_conv_dk(double k, double s, double tau) {
    const double c = k * s / std::numbers::sqrt2;
    const double v = tau / (s * std::numbers::sqrt2);
    const double lp = -v * v;
    const double dc_dk = s / std::numbers::sqrt2;
    return 0.5 * dc_dk * (scaled_erfcx_prime(lp, c - v) + scaled_erfcx_prime(lp, c + v));
}

double gauss_exp_conv_dk2(double k, double s, double tau) {
    const double c = k * s / std::numbers::sqrt2;
    const double v = tau / (s * std::numbers::sqrt2);
    const double lp = -v * v;
    const double dc_dk = s / std::numbers::sqrt2;
    return 0.5 * dc_dk * dc_dk *
           (scaled_erfcx_pprime(lp, c - v) + scaled_erfcx_pprime(lp, c + v));
}

}  // namespace bfc
