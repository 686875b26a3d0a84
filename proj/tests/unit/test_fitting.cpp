#include "doctest.h"

#include <cmath>

#include "bfc/fitting.hpp"

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

DetectorSpec make_det(double sigma, double bin, double lo, double hi, double total) {
    DetectorSpec d;
    d.jitter_sigma_s = sigma;
    d.bin_width_s = bin;
    d.tau_min_s = lo;
    d.tau_max_s = hi;
    d.total_counts = total;
    return d;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

FitProblem cross_sum_problem(const Histogram& h, double gs0, double t00, double p0) {
    FitProblem prob;
    prob.histogram = h;
    prob.model = FitModelKind::cross_sum;
    prob.initial["gamma_s"] = gs0;
    prob.initial["t0"] = t00;
    prob.initial["p"] = p0;
    prob.initial["amplitude"] = h.total();
    prob.initial["background"] = 0.0;
    prob.bounds["p"] = {0.0, 1.0};
    prob.bounds["gamma_s"] = {gs0 / 10.0, gs0 * 10.0};
    prob.bounds["t0"] = {t00 / 2.0, t00 * 2.0};
    prob.bounds["amplitude"] = {0.0, kInf};
    prob.bounds["background"] = {0.0, kInf};
    prob.fixed["sigma"] = h.det.jitter_sigma_s;
    prob.fixed["gamma_i"] = kInf;
    return prob;
}

}  // namespace

TEST_CASE("noiseless data with the exact initial guess converges immediately") {
    const double gs = kPi * 126e6;
    const double gi = kPi * 453e6;
    const CombSpec comb = make_comb(3.5e9, gs, gi, false, 1);
    const DetectorSpec det = make_det(30e-12, 4e-12, -4e-9, 2e-9, 1e5);
    Histogram h = synthesize_cross(comb, det, 0.0, 1, NoiseModel::none);

    FitProblem prob;
    prob.histogram = h;
    prob.model = FitModelKind::cross_single;
    const double mass = 0.5 / gi + 0.5 / gs;  // model integral: amplitude scale
    prob.initial["gamma_s"] = gs;
    prob.initial["gamma_i"] = gi;
    prob.initial["amplitude"] = det.total_counts / mass;
    prob.initial["background"] = 0.0;
    prob.fixed["sigma"] = det.jitter_sigma_s;

    // exact zero-residual fixed point: data is the model at the initial guess
    std::map<std::string, double> truth = prob.initial;
    truth.insert(prob.fixed.begin(), prob.fixed.end());
    prob.histogram.counts = fit_model_curve(prob, truth);

    const FitResult r = fit(prob);
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    CHECK(r.estimate("gamma_s") == doctest::Approx(gs).epsilon(1e-8));
    CHECK(r.estimate("gamma_i") == doctest::Approx(gi).epsilon(1e-8));
}

TEST_CASE("cross_sum synth-fit round trip over seeds") {
    const double gs = kPi * 126e6;
    const double t0 = 1.0 / 3.5e9;
    const CombSpec comb = make_comb(3.5e9, gs, 0, true, 100);
    const DetectorSpec det = make_det(30e-12, 4e-12, -6e-9, 1e-9, 1e5);

    std::vector<double> gs_err, t0_err, p_err;
    int converged = 0;
    const int n_seeds = 20;
    for (int seed = 0; seed < n_seeds; ++seed) {
        const Histogram h = synthesize_cross(comb, det, 0.95, 1000 + seed);
        FitProblem prob = cross_sum_problem(h, estimate_gamma_s_from_tail(h),
                                            estimate_t0_from_beat(h), 0.9);
        const FitResult r = fit(prob);
        if (!r.converged) {
            continue;
        }
        ++converged;
        gs_err.push_back(std::fabs(r.estimate("gamma_s") / gs - 1.0));
        t0_err.push_back(std::fabs(r.estimate("t0") / t0 - 1.0));
        p_err.push_back(std::fabs(r.estimate("p") - 0.95));
    }
    CHECK(converged >= 19);
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(gs_err) < 0.05);
    CHECK(median(t0_err) < 0.01);
    CHECK(median(p_err) < 0.05);
}

TEST_CASE("fit recovers the reported per-window FWHM trend") {
    // five windows synthesized from the reported FWHM values; the recovered
    // trend must be monotone decreasing
    const double fwhm[5] = {516e6, 243e6, 126e6, 85e6, 57e6};
    double recovered[5];
    for (int i = 0; i < 5; ++i) {
        const double gs = kPi * fwhm[i];
        const CombSpec comb = make_comb(3.5e9, gs, 0, true, 1);
        const DetectorSpec det = make_det(30e-12, 4e-12, -5e-9, 1e-9, 2e5);
        const Histogram h = synthesize_cross(comb, det, 0.0, 40 + i);
        FitProblem prob;
        prob.histogram = h;
        prob.model = FitModelKind::cross_single;
        prob.initial["gamma_s"] = 1.3 * gs;
        prob.initial["amplitude"] = h.total() * 2.0 * gs;
        prob.initial["background"] = 0.1;
        prob.bounds["background"] = {0.0, kInf};
        prob.fixed["sigma"] = det.jitter_sigma_s;
        prob.fixed["gamma_i"] = kInf;
        const FitResult r = fit(prob);
        REQUIRE(r.converged);
        recovered[i] = r.estimate("gamma_s") / kPi;
        CHECK(recovered[i] == doctest::Approx(fwhm[i]).epsilon(0.05));
    }
    for (int i = 0; i + 1 < 5; ++i) {
        CHECK(recovered[i] > recovered[i + 1]);
    }
}

TEST_CASE("fit objective is monotone over accepted steps") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, 0, true, 10);
    const DetectorSpec det = make_det(30e-12, 4e-12, -4e-9, 1e-9, 5e4);
    const Histogram h = synthesize_cross(comb, det, 0.95, 5);
    FitProblem prob = cross_sum_problem(h, 1.5 * kPi * 126e6, 1.2 / 3.5e9, 0.5);
    const FitResult r = fit(prob);
    REQUIRE(r.sse_trace.size() > 1);
    for (size_t i = 1; i < r.sse_trace.size(); ++i) {
        CHECK(r.sse_trace[i] <= r.sse_trace[i - 1]);
    }
}

TEST_CASE("singular jacobian names the degenerate pair") {
    // A window that never sees the bunching peak leaves amplitude and
    // background exactly collinear (the model is flat over every bin).
    const double gs = kPi * 126e6;
    const CombSpec comb = make_comb(3.5e9, gs, 0, true, 1);
    const DetectorSpec det = make_det(40e-12, 40e-12, 20e-9, 60e-9, 1e5);
    const Histogram h = synthesize_auto(comb, det, 6);
    FitProblem prob;
    prob.histogram = h;
    prob.model = FitModelKind::auto_single;
    prob.initial["gamma_s"] = gs;
    prob.initial["amplitude"] = 100.0;
    prob.initial["background"] = 0.0;
    prob.fixed["sigma"] = det.jitter_sigma_s;
    prob.fixed["gamma_i"] = kInf;
    try {
        fit(prob);
        FAIL("expected SingularJacobianError");
    } catch (const SingularJacobianError& e) {
        CHECK(e.param_a == "amplitude");
        CHECK(e.param_b == "background");
    }

    // a parameter with an identically vanishing column is reported by name
    FitProblem dead = prob;
    dead.histogram = synthesize_auto(comb, make_det(40e-12, 40e-12, -20e-9, 20e-9, 1e5), 6);
    dead.initial["amplitude"] = 0.0;  // every shape column scales with amplitude
    try {
        fit(dead);
        FAIL("expected SingularJacobianError");
    } catch (const SingularJacobianError& e) {
        CHECK(e.param_a == "gamma_s");
    }
}

TEST_CASE("fit validation errors") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, 0, true, 1);
    const DetectorSpec det = make_det(30e-12, 4e-12, -2e-9, 1e-9, 1e4);
    const Histogram h = synthesize_cross(comb, det, 0.5, 9);

    FitProblem prob;
    prob.histogram = h;
    prob.model = FitModelKind::cross_single;
    prob.initial["gamma_s"] = kPi * 126e6;
    prob.initial["amplitude"] = 1e4;
    prob.initial["background"] = 0.0;
    prob.fixed["gamma_i"] = kInf;
    // missing sigma
    CHECK_THROWS_WITH_AS(fit(prob), doctest::Contains("sigma"), std::invalid_argument);
    // sigma free is refused
    prob.initial["sigma"] = 30e-12;
    CHECK_THROWS_WITH_AS(fit(prob), doctest::Contains("sigma"), std::invalid_argument);
    prob.initial.erase("sigma");
    prob.fixed["sigma"] = 30e-12;
    // unknown parameter
    prob.initial["t0"] = 1e-10;
    CHECK_THROWS_WITH_AS(fit(prob), doctest::Contains("t0"), std::invalid_argument);
    prob.initial.erase("t0");
    // initial guess outside bounds
    prob.bounds["gamma_s"] = {1.0, 2.0};
    CHECK_THROWS_WITH_AS(fit(prob), doctest::Contains("bounds"), std::invalid_argument);
}

TEST_CASE("derive_cavity_report arithmetic") {
    CavityReport r = make_cavity_report(126e6, 3.5e9, 1580.0);
    CHECK(std::llround(r.finesse) == 28);
    CHECK(r.q_factor == doctest::Approx(1.5e6).epsilon(0.05));
    CHECK(r.finesse * r.fwhm_hz == doctest::Approx(r.fsr_hz).epsilon(1e-12));

    CavityReport r2 = make_cavity_report(57e6, 3.5e9, 1600.0);
    CHECK(std::fabs(r2.finesse - 62.0) <= 1.0);
    CHECK(r2.q_factor == doctest::Approx(3.3e6).epsilon(0.05));

    CavityReport unity = make_cavity_report(3.5e9, 3.5e9, 1580.0);
    CHECK(unity.finesse == doctest::Approx(1.0).epsilon(1e-15));

    FitResult fr;
    fr.converged = true;
    fr.estimates["gamma_s"] = kPi * 126e6;
    fr.fixed["sigma"] = 30e-12;
    CHECK_THROWS_WITH_AS(derive_cavity_report(fr, 1580.0),
                         doctest::Contains("t0"), std::runtime_error);
    fr.estimates["t0"] = 1.0 / 3.5e9;
    const CavityReport from_fit = derive_cavity_report(fr, 1580.0);
    CHECK(from_fit.fwhm_hz == doctest::Approx(126e6).epsilon(1e-12));
    CHECK(std::llround(from_fit.finesse) == 28);
    fr.converged = false;
    CHECK_THROWS(derive_cavity_report(fr, 1580.0));
}

TEST_CASE("bootstrap errors behave statistically") {
    const double gs = kPi * 126e6;
    const CombSpec comb = make_comb(3.5e9, gs, 0, true, 1);

    // near-noiseless: huge counts, Poisson resampling spreads ~ 1/sqrt(N)
    {
        const DetectorSpec det = make_det(30e-12, 20e-12, -5e-9, 1e-9, 1e16);
        const Histogram h = synthesize_cross(comb, det, 0.0, 2, NoiseModel::none);
        FitProblem prob;
        prob.histogram = h;
        prob.model = FitModelKind::cross_single;
        prob.initial["gamma_s"] = gs;
        prob.initial["amplitude"] = det.total_counts * 2.0 * gs;
        prob.initial["background"] = 0.0;
        prob.bounds["background"] = {0.0, kInf};
        prob.fixed["sigma"] = det.jitter_sigma_s;
        prob.fixed["gamma_i"] = kInf;
        const auto sd = bootstrap_errors(prob, 50, 7);
        CHECK(sd.at("gamma_s") / gs < 1e-6);
    }

    // spread scales like 1/sqrt(total counts)
    {
        auto spread = [&](double total) {
            const DetectorSpec det = make_det(30e-12, 20e-12, -5e-9, 1e-9, total);
            const Histogram h = synthesize_cross(comb, det, 0.0, 3);
            FitProblem prob;
            prob.histogram = h;
            prob.model = FitModelKind::cross_single;
            prob.initial["gamma_s"] = gs;
            prob.initial["amplitude"] = total * 2.0 * gs;
            prob.initial["background"] = 0.0;
            prob.bounds["background"] = {0.0, kInf};
            prob.fixed["sigma"] = det.jitter_sigma_s;
            prob.fixed["gamma_i"] = kInf;
            return bootstrap_errors(prob, 60, 11).at("gamma_s");
        };
        const double s4 = spread(1e4);
        const double s6 = spread(1e6);
        const double slope = std::log(s6 / s4) / std::log(1e6 / 1e4);
        CHECK(slope == doctest::Approx(-0.5).epsilon(0.3));
    }

    // resample-count precondition
    {
        const DetectorSpec det = make_det(30e-12, 20e-12, -5e-9, 1e-9, 1e4);
        const Histogram h = synthesize_cross(comb, det, 0.0, 4);
        FitProblem prob;
        prob.histogram = h;
        prob.model = FitModelKind::cross_single;
        prob.initial["gamma_s"] = gs;
        prob.initial["amplitude"] = 1e4 * 2.0 * gs;
        prob.initial["background"] = 0.0;
        prob.bounds["background"] = {0.0, kInf};
        prob.fixed["sigma"] = det.jitter_sigma_s;
        prob.fixed["gamma_i"] = kInf;
        CHECK_THROWS(bootstrap_errors(prob, 10, 1));
    }
}

TEST_CASE("bootstrap spread is consistent with the seed-ensemble scatter") {
    const double gs = kPi * 126e6;
    const CombSpec comb = make_comb(3.5e9, gs, 0, true, 100);
    const DetectorSpec det = make_det(30e-12, 4e-12, -6e-9, 1e-9, 1e5);

    auto problem_for = [&](const Histogram& h) {
        FitProblem prob;
        prob.histogram = h;
        prob.model = FitModelKind::cross_sum;
        prob.initial["gamma_s"] = gs;
        prob.initial["t0"] = comb.round_trip_time_s();
        prob.initial["p"] = 0.9;
        prob.initial["amplitude"] = h.total();
        prob.initial["background"] = 0.0;
        prob.bounds["p"] = {0.0, 1.0};
        prob.bounds["amplitude"] = {0.0, kInf};
        prob.bounds["background"] = {0.0, kInf};
        prob.fixed["sigma"] = det.jitter_sigma_s;
        prob.fixed["gamma_i"] = kInf;
        return prob;
    };

    std::vector<double> gs_hat;
    for (int seed = 0; seed < 15; ++seed) {
        const FitResult r = fit(problem_for(synthesize_cross(comb, det, 0.95, 600 + seed)));
        REQUIRE(r.converged);
        gs_hat.push_back(r.estimate("gamma_s"));
    }
    double mean = 0.0;
    for (double v : gs_hat) {
        mean += v;
    }
    mean /= gs_hat.size();
    double ss = 0.0;
    for (double v : gs_hat) {
        ss += (v - mean) * (v - mean);
    }
    const double ensemble_sd = std::sqrt(ss / (gs_hat.size() - 1));

    const auto boot = bootstrap_errors(problem_for(synthesize_cross(comb, det, 0.95, 600)), 60, 9);
    const double ratio = boot.at("gamma_s") / ensemble_sd;
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
}

TEST_CASE("auto_single model fits a synthesized autocorrelation") {
    const double gs = kPi * 126e6;
    const double gi = kPi * 400e6;
    const CombSpec comb = make_comb(3.5e9, gs, gi, false, 1);
    const DetectorSpec det = make_det(40e-12, 40e-12, -25e-9, 25e-9, 4e6);
    const Histogram h = synthesize_auto(comb, det, 21);

    FitProblem prob;
    prob.histogram = h;
    prob.model = FitModelKind::auto_single;
    prob.initial["gamma_s"] = 1.4 * gs;
    prob.initial["gamma_i"] = 0.8 * gi;
    prob.initial["amplitude"] = det.total_counts / h.n_bins();
    prob.initial["background"] = 0.0;
    prob.bounds["background"] = {0.0, kInf};
    prob.fixed["sigma"] = det.jitter_sigma_s;
    const FitResult r = fit(prob);
    REQUIRE(r.converged);
    // gammas are exchangeable in the envelope; compare as a sorted pair
    double a = r.estimate("gamma_s"), b = r.estimate("gamma_i");
    if (a > b) {
        std::swap(a, b);
    }
    CHECK(a == doctest::Approx(gs).epsilon(0.10));
    CHECK(b == doctest::Approx(gi).epsilon(0.15));
}

TEST_CASE("fit report serialization carries the estimates") {
    const CombSpec comb = make_comb(3.5e9, kPi * 126e6, 0, true, 1);
    const DetectorSpec det = make_det(30e-12, 4e-12, -3e-9, 1e-9, 1e4);
    const Histogram h = synthesize_cross(comb, det, 0.0, 8);
    FitProblem prob;
    prob.histogram = h;
    prob.model = FitModelKind::cross_single;
    prob.initial["gamma_s"] = kPi * 126e6;
    prob.initial["amplitude"] = 1e4 * 2.0 * kPi * 126e6;
    prob.initial["background"] = 0.0;
    prob.bounds["background"] = {0.0, kInf};
    prob.fixed["sigma"] = det.jitter_sigma_s;
    prob.fixed["gamma_i"] = kInf;
    const FitResult r = fit(prob);
    const std::string report = format_fit_report(prob, r);
    CHECK(report.find("model=cross_single") != std::string::npos);
    CHECK(report.find("estimate.gamma_s=") != std::string::npos);
    CHECK(report.find("covariance.row=") != std::string::npos);
    CHECK(report.find("fixed.sigma=") != std::string::npos);
}
