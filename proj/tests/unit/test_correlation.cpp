#include "doctest.h"

#include <cmath>

#include "bfc/correlation.hpp"
#include "bfc/quadrature.hpp"
#include "bfc/rng.hpp"

using namespace bfc;

namespace {

CombSpec make_comb(double fsr_hz, double gamma_s, double gamma_i, bool unconfined, int modes) {
    CombSpec c;
    c.fsr_hz = fsr_hz;
    c.lw.gamma_s = gamma_s;
    c.lw.gamma_i = gamma_i;
    c.lw.idler_unconfined = unconfined;
    c.center_freq_hz = frequency_from_nm(1543.9);
    c.mode_count = modes;
    c.pump_omega = omega_from_nm(780.24);
    return c;
}

// Sum of short adaptive panels over [lo, hi]; panel length ~2 widths so a
// narrow peak can never hide between quadrature nodes.
template <class F>
double segmented_integral(F&& f, double lo, double hi, double width) {
    if (!(hi > lo)) {
        return 0.0;
    }
    const int n_seg = std::max(1, static_cast<int>(std::ceil((hi - lo) / (2.0 * width))));
    double total = 0.0;
    for (int i = 0; i < n_seg; ++i) {
        const double a = lo + (hi - lo) * i / n_seg;
        const double b = lo + (hi - lo) * (i + 1) / n_seg;
        total += integrate_adaptive(f, a, b, 1e-13, 15).value;
    }
    return total;
}

// Quadrature oracle for the jitter-convolved single-mode cross-correlation.
// The Gaussian x exponential product peaks at tau -+ 2 gamma s^2, so the
// integration windows track both that point and tau itself.
double cross_single_oracle(const Linewidths& lw, double sigma, double tau) {
    const double s = std::numbers::sqrt2 * sigma;
    auto kernel = [&](double t) {
        return std::exp(-(tau - t) * (tau - t) / (2.0 * s * s)) / (s * std::sqrt(2.0 * M_PI));
    };
    double total = 0.0;
    {
        auto neg = [&](double t) { return kernel(t) * std::exp(2.0 * lw.gamma_s * t); };
        const double peak = tau + 2.0 * lw.gamma_s * s * s;
        const double lo = std::min(tau, peak) - 14.0 * s;
        total += segmented_integral(neg, lo, 0.0, s);
    }
    if (!lw.idler_unconfined) {
        auto pos = [&](double t) { return kernel(t) * std::exp(-2.0 * lw.gamma_i * t); };
        const double peak = tau - 2.0 * lw.gamma_i * s * s;
        const double hi = std::max(tau, peak) + 14.0 * s;
        total += segmented_integral(pos, 0.0, hi, s);
    }
    return total;
}

}  // namespace

TEST_CASE("cross_single is symmetric for equal linewidths") {
    Linewidths lw{kPi * 126e6, kPi * 126e6, false};
    const double sigma = 30e-12;
    for (double tau : {1e-12, 0.3e-9, 2e-9, 8e-9}) {
        CHECK(cross_single(lw, sigma, tau) ==
              doctest::Approx(cross_single(lw, sigma, -tau)).epsilon(1e-12));
    }
}

TEST_CASE("cross_single against the convolution oracle") {
    const double sigma = 30e-12;
    // gamma sigma products from harmless to overflow-inducing (2 gamma sigma ~ 20)
    for (double gs : {kPi * 126e6, 1.0 / (3.0 * sigma), 10.0 / sigma}) {
        Linewidths lw{gs, 2.7 * gs, false};
        for (double tau : {-4e-9, -0.2e-9, 0.0, 0.2e-9, 4e-9}) {
            INFO("gamma_s=", gs, " tau=", tau);
            CHECK(cross_single(lw, sigma, tau) ==
                  doctest::Approx(cross_single_oracle(lw, sigma, tau)).epsilon(1e-9));
        }
    }
    Linewidths un{kPi * 126e6, 0, true};
    for (double tau : {-3e-9, 0.0, 1e-9}) {
        CHECK(cross_single(un, sigma, tau) ==
              doctest::Approx(cross_single_oracle(un, sigma, tau)).epsilon(1e-9));
    }
}

TEST_CASE("singly resonant limit: idler leads signal") {
    Linewidths un{kPi * 126e6, 0, true};
    const double sigma = 30e-12;
    // decay on the tau < 0 side only
    CHECK(cross_single(un, sigma, 1e-9) / cross_single(un, sigma, -1e-9) < 1e-3);
    // the tau < 0 tail recovers the 126 MHz FWHM from its exponential slope
    const double t1 = -1e-9, t2 = -4e-9;
    const double slope = (std::log(cross_single(un, sigma, t1)) -
                          std::log(cross_single(un, sigma, t2))) /
                         (t1 - t2);
    const double fwhm = slope / (2.0 * kPi);
    CHECK(fwhm == doctest::Approx(126e6).epsilon(0.01));
}

TEST_CASE("cross_single converges to the unconvolved envelope as sigma -> 0") {
    Linewidths lw{kPi * 126e6, kPi * 400e6, false};
    // The leading deviation is the e^{(2 gamma sigma)^2} prefactor, so
    // sigma = 2e-4/gamma_s puts it well below the 1e-6 tolerance.
    const double sigma = 2e-4 / lw.gamma_s;
    auto envelope = [&](double tau) {
        return tau >= 0.0 ? std::exp(-2.0 * lw.gamma_i * tau) : std::exp(2.0 * lw.gamma_s * tau);
    };
    for (double tau : {-2e-9, -1e-10, 1e-10, 1e-9}) {
        CHECK(cross_single(lw, sigma, tau) == doctest::Approx(envelope(tau)).epsilon(1e-6));
    }
    // and the deviation shrinks quadratically in sigma
    const double d1 = std::fabs(cross_single(lw, 1e-3 / lw.gamma_s, -1e-9) - envelope(-1e-9));
    const double d2 = std::fabs(cross_single(lw, 5e-4 / lw.gamma_s, -1e-9) - envelope(-1e-9));
    CHECK(d2 < 0.35 * d1);
}

TEST_CASE("cross_multi peak structure") {
    Linewidths lw{kPi * 126e6, 0, true};
    const double t0 = 1.0 / 3.5e9;  // 285.7 ps
    const double sigma = 12e-12;
    const int j_max = default_j_max(lw, t0);

    // side peaks on the negative-delay side at -j T0
    for (int j = 1; j <= 3; ++j) {
        const double at_peak = cross_multi(lw, sigma, -j * t0, t0, j_max);
        const double off_a = cross_multi(lw, sigma, -j * t0 + 0.5 * t0, t0, j_max);
        const double off_b = cross_multi(lw, sigma, -j * t0 - 0.5 * t0, t0, j_max);
        CHECK(at_peak > 10.0 * off_a);
        CHECK(at_peak > 10.0 * off_b);
    }
    // no side peaks at positive delay for the unconfined idler
    CHECK(cross_multi(lw, sigma, t0, t0, j_max) <
          1e-6 * cross_multi(lw, sigma, -t0, t0, j_max));

    // central peak value: 1/(2 sqrt(pi) sigma) when side peaks are negligible
    Linewidths broad{3.0 / t0, 3.0 / t0, false};
    CHECK(cross_multi(broad, sigma, 0.0, t0, default_j_max(broad, t0)) ==
          doctest::Approx(1.0 / (2.0 * std::sqrt(M_PI) * sigma)).epsilon(1e-10));

    CHECK_THROWS(cross_multi(lw, sigma, 0.0, t0, 0));
}

TEST_CASE("cross_multi merges into the single-mode envelope for sigma >> T0") {
    // T0 * multi is a Riemann sum of the convolution integral behind single;
    // the envelope kink at zero delay makes the error O((gamma T0)^2).
    auto max_diff = [](double finesse) {
        const double fsr = 3.5e9;
        Linewidths lw{kPi * fsr / finesse, 2.0 * kPi * fsr / finesse, false};
        const double t0 = 1.0 / fsr;
        const double sigma = 4.0 * t0;
        const int j_max = default_j_max(lw, t0);
        double worst = 0.0;
        for (double tau : {0.0, -20.0 * t0, -60.0 * t0, 15.0 * t0}) {
            const double a = t0 * cross_multi(lw, sigma, tau, t0, j_max);
            const double b = cross_single(lw, sigma, tau);
            worst = std::max(worst, std::fabs(a - b) / b);
        }
        return worst;
    };
    const double coarse = max_diff(100.0);
    const double fine = max_diff(300.0);
    CHECK(fine < 1e-3);
    CHECK(fine < 0.3 * coarse);  // quadratic shrink with gamma T0
}

TEST_CASE("cross_sum endpoints and mass invariance in p") {
    CombSpec comb = make_comb(3.5e9, 3.5e9, 5.0e9, false, 10);  // modest finesse: compact tails
    CrossCorrelationModel model;
    model.comb = comb;
    model.sigma = 30e-12;
    model.amplitude = 123.0;
    model.background = 0.25;

    const double t0 = comb.round_trip_time_s();
    const CrossPrefactors pre = cross_norm_prefactors(comb.lw, t0);
    const int j_max = default_j_max(comb.lw, t0);

    model.purity = 1.0;
    CHECK(cross_sum(model, 0.4e-9) ==
          doctest::Approx(model.amplitude * pre.multi *
                              cross_multi(comb.lw, model.sigma, 0.4e-9, t0, j_max) +
                          model.background)
              .epsilon(1e-14));
    model.purity = 0.0;
    CHECK(cross_sum(model, 0.4e-9) ==
          doctest::Approx(model.amplitude * pre.single *
                              cross_single(comb.lw, model.sigma, 0.4e-9) +
                          model.background)
              .epsilon(1e-14));

    // integral of (cross_sum - background) is amplitude, independent of p.
    // Panels centered on the comb peaks so the adaptive rule sees them head-on.
    auto mass = [&](double p) {
        model.purity = p;
        double total = 0.0;
        const int n_periods = 40;
        for (int j = -n_periods; j <= n_periods; ++j) {
            auto f = [&](double tau) { return cross_sum(model, tau) - model.background; };
            total += integrate_adaptive(f, (j - 0.5) * t0, (j + 0.5) * t0, 1e-12, 15).value;
        }
        return total;
    };
    const double m1 = mass(1.0);
    const double m0 = mass(0.0);
    const double mh = mass(0.5);
    CHECK(m1 == doctest::Approx(model.amplitude).epsilon(1e-6));
    CHECK(m0 == doctest::Approx(model.amplitude).epsilon(1e-6));
    CHECK(mh == doctest::Approx(0.5 * (m0 + m1)).epsilon(1e-9));
}

TEST_CASE("g2_auto_single basics") {
    // g2(0) = 2 exactly over random linewidth pairs
    CounterRng rng(2024, 0);
    for (int i = 0; i < 1000; ++i) {
        Linewidths lw;
        lw.gamma_s = kPi * 1e6 * std::pow(10.0, 3.0 * rng.next_u01());
        lw.gamma_i = kPi * 1e6 * std::pow(10.0, 3.0 * rng.next_u01());
        CHECK(g2_auto_single(lw, 0.0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(g2_auto_single(lw, 0.37e-9) >= 1.0);
    }
    Linewidths lw{kPi * 126e6, kPi * 400e6, false};
    CHECK(g2_auto_single(lw, 1e-3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("g2_auto_single degenerate limit matches the symmetric finite difference") {
    const double g = kPi * 126e6;
    Linewidths equal{g, g, false};
    for (double tau : {0.0, 0.3e-9, 1.5e-9, 6e-9}) {
        const double limit = g2_auto_single(equal, tau);
        // closed-form limit value
        const double e = (1.0 + g * std::fabs(tau)) * std::exp(-g * std::fabs(tau));
        CHECK(limit == doctest::Approx(1.0 + e * e).epsilon(1e-12));
        // central mean of the generic formula at gamma_i = g (1 +- 1e-6)
        Linewidths up{g, g * (1.0 + 1e-6), false};
        Linewidths dn{g, g * (1.0 - 1e-6), false};
        const double mean = 0.5 * (g2_auto_single(up, tau) + g2_auto_single(dn, tau));
        CHECK(limit == doctest::Approx(mean).epsilon(1e-8));
    }
}

TEST_CASE("g2_auto_excess_conv against a quadrature oracle") {
    const double sigma = 40e-12;
    const double s = std::numbers::sqrt2 * sigma;
    auto oracle = [&](const Linewidths& lw, double tau) {
        auto integrand = [&](double t) {
            const double e = auto_envelope(lw, t);
            const double g = std::exp(-(tau - t) * (tau - t) / (2.0 * s * s)) /
                             (s * std::sqrt(2.0 * M_PI));
            return g * e * e;
        };
        // kernel support around tau plus the envelope scale around zero
        const double reach = 5.0 / lw.gamma_s;
        const double lo = std::min(tau - 14.0 * s, -reach);
        const double hi = std::max(tau + 14.0 * s, reach);
        return segmented_integral(integrand, lo, 0.0, s) +
               segmented_integral(integrand, 0.0, hi, s);
    };
    Linewidths lw{kPi * 126e6, kPi * 310e6, false};
    for (double tau : {-2e-9, 0.0, 0.5e-9, 3e-9}) {
        CHECK(g2_auto_excess_conv(lw, sigma, tau) ==
              doctest::Approx(oracle(lw, tau)).epsilon(1e-9));
    }
    // degenerate branch
    Linewidths equal{kPi * 126e6, kPi * 126e6, false};
    CHECK(g2_auto_excess_conv(equal, sigma, 0.4e-9) ==
          doctest::Approx(oracle(equal, 0.4e-9)).epsilon(1e-9));
    // unconfined branch
    Linewidths un{kPi * 126e6, 0, true};
    CHECK(g2_auto_excess_conv(un, sigma, -0.7e-9) ==
          doctest::Approx(oracle(un, -0.7e-9)).epsilon(1e-9));
}

TEST_CASE("g2_auto_excess_conv gamma derivatives by finite differences") {
    Linewidths lw{kPi * 126e6, kPi * 310e6, false};
    const double sigma = 40e-12;
    for (double tau : {-1e-9, 0.2e-9}) {
        const double h = 1e-6 * lw.gamma_s;
        Linewidths up = lw, dn = lw;
        up.gamma_s += h;
        dn.gamma_s -= h;
        const double fd =
            (g2_auto_excess_conv(up, sigma, tau) - g2_auto_excess_conv(dn, sigma, tau)) / (2 * h);
        CHECK(g2_auto_excess_conv_dgamma_s(lw, sigma, tau) ==
              doctest::Approx(fd).epsilon(1e-6));
        Linewidths upi = lw, dni = lw;
        upi.gamma_i += h;
        dni.gamma_i -= h;
        const double fdi =
            (g2_auto_excess_conv(upi, sigma, tau) - g2_auto_excess_conv(dni, sigma, tau)) /
            (2 * h);
        CHECK(g2_auto_excess_conv_dgamma_i(lw, sigma, tau) ==
              doctest::Approx(fdi).epsilon(1e-6));
    }
}

TEST_CASE("delta_g2 closed form reproduces the reported values") {
    Linewidths un{kPi * 126e6, 0, true};
    CHECK(delta_g2_closed_form(un, 1.2) == doctest::Approx(2.1e-9).epsilon(0.01));
    CHECK(delta_g2_closed_form(un, 14.9) == doctest::Approx(0.17e-9).epsilon(0.01));
    Linewidths equal{kPi * 126e6, kPi * 126e6, false};
    CHECK(delta_g2_closed_form(equal, 1.0) ==
          doctest::Approx(2.5 / (kPi * 126e6)).epsilon(1e-12));
}

TEST_CASE("estimate_mode_count inverts the closed form") {
    Linewidths un{kPi * 126e6, 0, true};
    CHECK(estimate_mode_count(2.1e-9, un) == doctest::Approx(1.20).epsilon(0.017));
    CHECK(estimate_mode_count(0.17e-9, un) == doctest::Approx(14.9).epsilon(0.02));
    CHECK(estimate_mode_count(1.0 / un.gamma_s, un) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(estimate_mode_count(-1.0, un));
}

TEST_CASE("delta_g2 spectral oracle agrees with the closed form") {
    const double fsr = 3.5e9;
    {
        const double gs = kPi * 126e6;
        CombSpec c = make_comb(fsr, gs, gs, false, 1);
        CHECK(delta_g2_spectral(c) ==
              doctest::Approx(delta_g2_closed_form(c)).epsilon(1e-6));
    }
    {
        const double gs = kPi * fsr / 1e4;  // high finesse: cross-tooth terms negligible
        CombSpec c = make_comb(fsr, gs, 10.0 * gs, false, 10);
        CHECK(delta_g2_spectral(c) ==
              doctest::Approx(delta_g2_closed_form(c)).epsilon(1e-6));
    }
    {
        // gamma_i = 1e4 gamma_s approximates the singly resonant limit
        const double gs = kPi * fsr / 1e5;
        CombSpec c = make_comb(fsr, gs, 1e4 * gs, false, 1);
        Linewidths un{gs, 0, true};
        CHECK(delta_g2_spectral(c) ==
              doctest::Approx(delta_g2_closed_form(un, 1.0)).epsilon(1e-3));
    }
}
