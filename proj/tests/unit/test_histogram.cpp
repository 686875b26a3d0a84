#include "doctest.h"

#include <cmath>
#include <sstream>

#include "bfc/histogram.hpp"

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

DetectorSpec make_det(double sigma, double bin, double lo, double hi, double total,
                      double accidental = 0.0) {
    DetectorSpec d;
    d.jitter_sigma_s = sigma;
    d.bin_width_s = bin;
    d.tau_min_s = lo;
    d.tau_max_s = hi;
    d.total_counts = total;
    d.accidental_rate = accidental;
    return d;
}

}  // namespace

TEST_CASE("synthesize_cross determinism and zero-count edge") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, 0, true, 1);
    const DetectorSpec det = make_det(30e-12, 4e-12, -6e-9, 1e-9, 1e5);

    const Histogram a = synthesize_cross(comb, det, 0.95, 42);
    const Histogram b = synthesize_cross(comb, det, 0.95, 42);
    REQUIRE(a.n_bins() == b.n_bins());
    for (int i = 0; i < a.n_bins(); ++i) {
        CHECK(a.counts[i] == b.counts[i]);
    }
    const Histogram c = synthesize_cross(comb, det, 0.95, 43);
    bool any_diff = false;
    for (int i = 0; i < a.n_bins(); ++i) {
        any_diff |= (a.counts[i] != c.counts[i]);
    }
    CHECK(any_diff);

    DetectorSpec empty = det;
    empty.total_counts = 0.0;
    empty.accidental_rate = 0.0;
    const Histogram z = synthesize_cross(comb, empty, 0.95, 1);
    CHECK(z.total() == 0.0);
}

TEST_CASE("synthesize_cross count bookkeeping") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, 0, true, 1);
    const DetectorSpec det = make_det(30e-12, 4e-12, -8e-9, 2e-9, 2e5, 0.5);
    for (uint64_t seed : {11ull, 123ull, 4242ull}) {
        const Histogram h = synthesize_cross(comb, det, 0.95, seed);
        const double expected = det.total_counts + h.n_bins() * det.accidental_rate;
        CHECK(std::fabs(h.total() - expected) < 3.0 * std::sqrt(expected));
    }
}

TEST_CASE("synthesize_cross beat structure at multiples of T0") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, 0, true, 100);
    const double t0 = comb.round_trip_time_s();
    const DetectorSpec det = make_det(12e-12, 4e-12, -1.5e-9, 0.3e-9, 5e5);
    const Histogram h = synthesize_cross(comb, det, 1.0, 3);

    auto bin_of = [&](double tau) {
        return static_cast<int>(std::floor((tau - h.tau_min_s) / h.bin_width_s));
    };
    for (int j = 1; j <= 4; ++j) {
        const int peak_bin = bin_of(-j * t0);
        double local_peak = 0.0;
        for (int b = peak_bin - 2; b <= peak_bin + 2; ++b) {
            local_peak = std::max(local_peak, h.counts[b]);
        }
        double mid_level = 0.0;
        const int mid_bin = bin_of(-(j + 0.5) * t0);
        for (int b = mid_bin - 2; b <= mid_bin + 2; ++b) {
            mid_level = std::max(mid_level, h.counts[b]);
        }
        INFO("side peak j=", j);
        CHECK(local_peak > 3.0 * (mid_level + 1.0));
    }
}

TEST_CASE("synthesize_cross warns when the window misses model mass") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, 0, true, 1);
    const DetectorSpec narrow = make_det(30e-12, 4e-12, -0.5e-9, 0.2e-9, 1e4);
    const Histogram h = synthesize_cross(comb, narrow, 0.95, 5);
    REQUIRE(!h.warnings.empty());
    CHECK(h.warnings[0].find("99%") != std::string::npos);
}

TEST_CASE("synthesize_auto normalized peak behavior") {
    // single mode, moderate jitter: washed bunching peak strictly between 1 and 2
    const double gs = kPi * 126e6;
    const CombSpec comb = make_comb(3.5e9, gs, gs, false, 1);
    const DetectorSpec det = make_det(400e-12, 40e-12, -20e-9, 20e-9, 4e6);
    const Histogram h = synthesize_auto(comb, det, 11, NoiseModel::none);
    const double baseline = det.total_counts / h.n_bins();
    const int zero_bin = static_cast<int>(std::floor((0.0 - h.tau_min_s) / h.bin_width_s));
    const double g2_peak = h.counts[zero_bin] / baseline;
    CHECK(g2_peak > 1.2);
    CHECK(g2_peak < 2.0);

    // sigma -> 0: normalized zero bin -> 2 within bin averaging
    const DetectorSpec sharp = make_det(2e-12, 4e-12, -20e-9, 20e-9, 4e6);
    const Histogram hs = synthesize_auto(comb, sharp, 11, NoiseModel::none);
    const double g2_sharp =
        hs.counts[static_cast<int>(std::floor(-hs.tau_min_s / hs.bin_width_s))] /
        (sharp.total_counts / hs.n_bins());
    CHECK(g2_sharp > 1.97);
    CHECK(g2_sharp <= 2.0);
}

TEST_CASE("synthesize_auto multi-mode suppression of the zero-delay excess") {
    // sigma >> T0 merges the Dirichlet comb: excess(0) ~ 1/M
    const double fsr = 35e9;
    const double gs = kPi * 12.6e6;
    const DetectorSpec det = make_det(100e-12, 40e-12, -2e-9, 2e-9, 1e6);

    auto zero_excess = [&](int m_count) {
        const CombSpec comb = make_comb(fsr, gs, 0, true, m_count);
        const Histogram h = synthesize_auto(comb, det, 17, NoiseModel::none);
        const double baseline = det.total_counts / h.n_bins();
        const int zero_bin = static_cast<int>(std::floor(-h.tau_min_s / h.bin_width_s));
        return h.counts[zero_bin] / baseline - 1.0;
    };
    const double single = zero_excess(1);
    const double multi = zero_excess(10);
    CHECK(single / multi == doctest::Approx(10.0).epsilon(0.25));
}

TEST_CASE("integrate_delta_g2 recovers the closed form") {
    // gamma_s tuned so the true Delta g2 is 2.1 ns at M = 1
    const double gs = 1.0 / 2.1e-9;
    const CombSpec comb = make_comb(3.5e9, gs, 0, true, 1);
    const DetectorSpec det = make_det(30e-12, 40e-12, -20e-9, 20e-9, 2e6);
    const Histogram h = synthesize_auto(comb, det, 23);
    CHECK(integrate_delta_g2(h) == doctest::Approx(2.1e-9).epsilon(0.10));
}

TEST_CASE("multi-mode comb round trip recovers the mode number") {
    // M = 15 teeth in band: synthesize, integrate, invert
    const double gs = kPi * 126e6;
    const CombSpec comb = make_comb(3.5e9, gs, 0, true, 15);
    const DetectorSpec det = make_det(30e-12, 40e-12, -10e-9, 10e-9, 8e6);
    const Histogram h = synthesize_auto(comb, det, 314);
    const double dg2 = integrate_delta_g2(h);
    const double m_hat = estimate_mode_count(dg2, comb.lw);
    CHECK(m_hat >= 13.0);
    CHECK(m_hat <= 17.0);
}

TEST_CASE("integrate_delta_g2 jitter independence") {
    const double gs = kPi * 126e6;
    const CombSpec comb = make_comb(3.5e9, gs, 0, true, 1);
    const int n_seeds = 20;
    auto ensemble_mean = [&](double sigma, uint64_t base) {
        const DetectorSpec det = make_det(sigma, 40e-12, -25e-9, 25e-9, 1e6);
        double acc = 0.0;
        for (int k = 0; k < n_seeds; ++k) {
            acc += integrate_delta_g2(synthesize_auto(comb, det, base + k));
        }
        return acc / n_seeds;
    };
    const double m10 = ensemble_mean(10e-12, 1000);
    const double m100 = ensemble_mean(100e-12, 2000);
    const double truth = delta_g2_closed_form(comb);
    CHECK(m10 == doctest::Approx(truth).epsilon(0.05));
    CHECK(m100 == doctest::Approx(truth).epsilon(0.05));
}

TEST_CASE("integrate_delta_g2 edge cases") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, 0, true, 1);

    // flat histogram at baseline: estimate consistent with zero
    DetectorSpec det = make_det(30e-12, 40e-12, -20e-9, 20e-9, 1e6);
    Histogram flat = synthesize_auto(comb, det, 3, NoiseModel::none);
    const double baseline = det.total_counts / flat.n_bins();
    for (auto& c : flat.counts) {
        c = baseline;
    }
    CHECK(std::fabs(integrate_delta_g2(flat)) < 1e-12);

    // window that never reaches baseline: error names the edge
    const DetectorSpec narrow = make_det(30e-12, 10e-12, -1.2e-9, 0.1e-9, 1e6);
    const CombSpec wide = make_comb(3.5e9, 1.0 / 2.1e-9, 0, true, 1);
    const Histogram bad = synthesize_auto(wide, narrow, 3, NoiseModel::none);
    CHECK_THROWS_WITH_AS(integrate_delta_g2(bad),
                         doctest::Contains("edge not at baseline"), std::runtime_error);

    // kind mismatch
    const Histogram cross = synthesize_cross(comb, det, 1.0, 3);
    CHECK_THROWS(integrate_delta_g2(cross));
}

TEST_CASE("histogram csv round trip is byte-exact") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, kPi * 453e6, false, 10);
    const DetectorSpec det = make_det(30e-12, 4e-12, -2e-9, 1e-9, 1e4, 0.25);
    const Histogram h = synthesize_cross(comb, det, 0.9, 77);

    std::ostringstream first;
    write_histogram_csv(h, first);
    std::istringstream in(first.str());
    const Histogram back = read_histogram_csv(in);
    std::ostringstream second;
    write_histogram_csv(back, second);
    CHECK(first.str() == second.str());

    CHECK(back.kind == h.kind);
    CHECK(back.seed == h.seed);
    CHECK(back.comb.lw.gamma_s == h.comb.lw.gamma_s);
    CHECK(back.det.total_counts == h.det.total_counts);
    CHECK(back.purity == h.purity);
    REQUIRE(back.n_bins() == h.n_bins());
    for (int i = 0; i < h.n_bins(); ++i) {
        CHECK(back.counts[i] == h.counts[i]);
    }
}

TEST_CASE("detector spec validation") {
    CHECK_THROWS(make_det(0.0, 4e-12, -1e-9, 1e-9, 1e4).validate());
    CHECK_THROWS(make_det(30e-12, 0.0, -1e-9, 1e-9, 1e4).validate());
    CHECK_THROWS(make_det(30e-12, 4e-12, 1e-9, -1e-9, 1e4).validate());
    CHECK_NOTHROW(make_det(30e-12, 4e-12, -1e-9, 1e-9, 1e4).validate());
}
