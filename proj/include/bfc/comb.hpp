#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "bfc/constants.hpp"
#include "bfc/quadrature.hpp"

namespace bfc {

// Angular half-widths (HWHM, rad/s) of one comb tooth for each photon of the
// pair. The singly resonant cavity confines only the signal; that limit
// (gamma_i -> infinity) is carried as an explicit flag so every formula can
// branch rather than juggle sentinel floats.
struct Linewidths {
    double gamma_s = 0.0;
    double gamma_i = 0.0;           // ignored when idler_unconfined
    bool idler_unconfined = false;

    double fwhm_signal_hz() const { return gamma_s / kPi; }
    double fwhm_idler_hz() const;   // throws when idler_unconfined

    void validate() const;
};

struct CombSpec {
    double fsr_hz = 0.0;
    Linewidths lw;
    double center_freq_hz = 0.0;  // optical frequency of mode index 0
    int mode_count = 1;
    double pump_omega = 0.0;      // angular pump frequency, rad/s

    double round_trip_time_s() const { return 1.0 / fsr_hz; }
    double mode_spacing_rad_s() const { return kTwoPi * fsr_hz; }
    int mode_index_lo() const { return -(mode_count / 2); }
    int mode_index_hi() const { return mode_index_lo() + mode_count - 1; }

    void validate() const;
};

// omega_0 + 2 pi m fsr, rad/s.
double mode_frequency(const CombSpec& spec, int m);

// Unnormalized single-tooth amplitude at detuning delta = omega - omega_m.
std::complex<double> tooth_amplitude(const Linewidths& lw, double delta);

// Closed-form single-tooth norm  N2 = ∫ |t(delta)|^2 d delta:
//   confined:    pi / (gamma_i gamma_s (gamma_i + gamma_s))
//   unconfined:  pi / gamma_s
double tooth_norm(const Linewidths& lw);

// Closed-form overlap  ∫ t*(delta) t(delta - sep) d delta  between two teeth
// separated by sep (rad/s). Reduces to tooth_norm at sep = 0.
std::complex<double> tooth_overlap(const Linewidths& lw, double sep);

// ∫ |sum_m t_m|^2 over the M in-band teeth, assembled analytically from
// tooth_norm and tooth_overlap. This is the normalization used by
// jsa_marginal, exact including cross-tooth terms.
double jsa_total_norm(const CombSpec& spec);

// Idler marginal of the joint spectral amplitude, normalized so that
// ∫ |f(omega_i)|^2 d omega_i = 1. The signal frequency is implied as
// omega_p - omega_i (delta-function pump).
std::complex<double> jsa_marginal(const CombSpec& spec, double omega_i);
double jsa_intensity(const CombSpec& spec, double omega_i);  // |f|^2

// ∫ g(omega) d omega over the whole line, organized around the comb: one
// panel per tooth (split at the midpoints) plus tan-substituted wings so the
// Lorentzian power-law tails become polynomial-friendly on a finite interval.
// Each tooth panel is pre-split geometrically around the linewidth scales: a
// Lorentzian occupying a percent of its panel can otherwise fool the adaptive
// rule into a confidently wrong estimate.
template <class F>
QuadratureResult integrate_comb_line(const CombSpec& spec, F&& g, double rel_tol = 1e-12,
                                     int max_depth = 15, GkRule rule = GkRule::k15) {
    const double half = kPi * spec.fsr_hz;  // half tooth spacing, rad/s
    const double w_first = mode_frequency(spec, spec.mode_index_lo());
    const double w_last = mode_frequency(spec, spec.mode_index_hi());

    std::vector<double> offsets{0.0, half, -half};
    auto add_scale = [&](double gamma) {
        for (double k = 1.0; k * gamma < half; k *= 4.0) {
            offsets.push_back(k * gamma);
            offsets.push_back(-k * gamma);
        }
    };
    add_scale(spec.lw.gamma_s);
    if (!spec.lw.idler_unconfined) {
        add_scale(spec.lw.gamma_i);
    }
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

    QuadratureResult total;
    for (int m = spec.mode_index_lo(); m <= spec.mode_index_hi(); ++m) {
        const double center = mode_frequency(spec, m);
        for (size_t i = 0; i + 1 < offsets.size(); ++i) {
            const QuadratureResult r = integrate_rule(rule, g, center + offsets[i],
                                                      center + offsets[i + 1], rel_tol, max_depth);
            total.value += r.value;
            total.error += r.error;
        }
    }
    // omega = w_first - half * tan(theta): theta in [pi/4, pi/2) sweeps the
    // left tail from the first panel edge to -infinity.
    auto left = [&](double theta) {
        const double t = std::tan(theta);
        return g(w_first - half * t) * half * (1.0 + t * t);
    };
    auto right = [&](double theta) {
        const double t = std::tan(theta);
        return g(w_last + half * t) * half * (1.0 + t * t);
    };
    const QuadratureResult lw_res = integrate_rule(rule, left, kPi / 4.0, kPi / 2.0, rel_tol, max_depth);
    const QuadratureResult rw_res = integrate_rule(rule, right, kPi / 4.0, kPi / 2.0, rel_tol, max_depth);
    total.value += lw_res.value + rw_res.value;
    total.error += lw_res.error + rw_res.error;
    return total;
}

enum class Regime { hyperentangled, multiplexed, neither };

struct PumpRegime {
    std::complex<double> zeta;  // squeezing parameter per mode
    int mode_count = 1;
};

// Hyperentangled when 2 M |zeta|^2 < threshold, multiplexed when
// 2 |zeta|^2 < threshold, neither otherwise.
Regime classify_regime(const PumpRegime& regime, double threshold = 0.1);

const char* regime_name(Regime r);

}  // namespace bfc
