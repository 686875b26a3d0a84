#include "doctest.h"

#include <cmath>

#include "bfc/quadrature.hpp"
#include "bfc/special.hpp"

using namespace bfc;

namespace {

// Brute-force oracle: the convolution integral over short panels bracketing
// both tau and the displaced Gaussian x exponential peaks at tau -+ k s^2
// (a lone narrow peak inside an unbounded interval can slip between the
// nodes of an adaptive rule).
double conv_oracle(double k, double s, double tau) {
    auto integrand = [&](double t) {
        const double g = std::exp(-(tau - t) * (tau - t) / (2.0 * s * s)) /
                         (s * std::sqrt(2.0 * M_PI));
        return g * std::exp(-k * std::fabs(t));
    };
    const double lo = std::min({tau, tau - k * s * s, tau + k * s * s}) - 14.0 * s;
    const double hi = std::max({tau, tau - k * s * s, tau + k * s * s}) + 14.0 * s;
    auto piece = [&](double a, double b) {
        double total = 0.0;
        if (!(b > a)) {
            return total;
        }
        const int n_seg = std::max(1, static_cast<int>(std::ceil((b - a) / (2.0 * s))));
        for (int i = 0; i < n_seg; ++i) {
            total += integrate_adaptive(integrand, a + (b - a) * i / n_seg,
                                        a + (b - a) * (i + 1) / n_seg, 1e-13, 15)
                         .value;
        }
        return total;
    };
    return piece(lo, std::min(0.0, hi)) + piece(std::max(0.0, lo), hi);
}

}  // namespace

TEST_CASE("erfcx basics") {
    CHECK(erfcx(0.0) == 1.0);
    // reference: e * erfc(1)
    CHECK(erfcx(1.0) == doctest::Approx(0.42758357615580700442).epsilon(1e-14));
    for (double x : {0.1, 0.5, 2.0, 8.0, 20.0, 25.9}) {
        CHECK(erfcx(x) == doctest::Approx(std::exp(x * x) * std::erfc(x)).epsilon(1e-13));
    }
    // both sides of the asymptotic crossover against frozen mpmath values
    CHECK(erfcx(25.9) == doctest::Approx(0.02176718115073821).epsilon(1e-13));
    CHECK(erfcx(26.1) == doctest::Approx(0.021600627726346206).epsilon(1e-13));
    // x sqrt(pi) erfcx(x) -> 1
    CHECK(50.0 * std::sqrt(M_PI) * erfcx(50.0) == doctest::Approx(1.0).epsilon(1e-3));
    // negative arguments
    CHECK(erfcx(-1.0) ==
          doctest::Approx(2.0 * std::exp(1.0) - erfcx(1.0)).epsilon(1e-14));
}

TEST_CASE("scaled_erfcx matches the direct product where both are representable") {
    for (double z : {-4.0, -1.0, -0.2, 0.0, 0.7, 5.0}) {
        for (double lp : {0.0, -3.0, -15.0}) {
            CHECK(scaled_erfcx(lp, z) ==
                  doctest::Approx(std::exp(lp) * erfcx(z)).epsilon(1e-13));
        }
    }
    // Regime where e^{logpre} underflows badly but the product is fine:
    // e^{-900} * erfcx(-30) = e^{-900} (2 e^{900} - erfcx(30)) ~ 2.
    CHECK(scaled_erfcx(-900.0, -30.0) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("scaled_erfcx derivatives by finite differences") {
    for (double z : {-2.0, 0.3, 4.0}) {
        const double h = 1e-6;
        const double fd = (scaled_erfcx(0.0, z + h) - scaled_erfcx(0.0, z - h)) / (2 * h);
        CHECK(scaled_erfcx_prime(0.0, z) == doctest::Approx(fd).epsilon(1e-8));
        const double fd2 =
            (scaled_erfcx_prime(0.0, z + h) - scaled_erfcx_prime(0.0, z - h)) / (2 * h);
        CHECK(scaled_erfcx_pprime(0.0, z) == doctest::Approx(fd2).epsilon(1e-8));
    }
}

TEST_CASE("gauss_exp_conv against the quadrature oracle, including the overflow regime") {
    const double s = 1.0;
    for (double k : {0.01, 1.0, 30.0}) {  // k s = 30 overflows the naive e^{k^2 s^2/2}
        for (double tau : {-40.0, -5.0, 0.0, 3.0, 40.0}) {
            const double got = gauss_exp_conv(k, s, tau);
            const double want = conv_oracle(k, s, tau);
            INFO("k=", k, " tau=", tau);
            CHECK(got == doctest::Approx(want).epsilon(1e-9));
        }
    }
}

TEST_CASE("gauss_exp_conv k-derivatives by finite differences") {
    const double s = 2.5;
    for (double k : {0.4, 3.0}) {
        for (double tau : {-1.0, 0.0, 4.0}) {
            const double h = 1e-6 * k;
            const double fd =
                (gauss_exp_conv(k + h, s, tau) - gauss_exp_conv(k - h, s, tau)) / (2 * h);
            CHECK(gauss_exp_conv_dk(k, s, tau) == doctest::Approx(fd).epsilon(1e-6));
            const double fd2 =
                (gauss_exp_conv_dk(k + h, s, tau) - gauss_exp_conv_dk(k - h, s, tau)) / (2 * h);
            CHECK(gauss_exp_conv_dk2(k, s, tau) == doctest::Approx(fd2).epsilon(1e-6));
        }
    }
}
