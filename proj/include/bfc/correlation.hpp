#pragma once

#include "bfc/comb.hpp"

namespace bfc {

// ---------------------------------------------------------------------------
// Second-order cross-correlation between signal and idler, as measured by two
// detectors of Gaussian timing jitter sigma each (combined kernel sqrt(2)
// sigma). All functions return unit-mass shapes: the time integral of
// cross_single is 1/(2 gamma_i) + 1/(2 gamma_s) and of cross_multi is the
// geometric comb mass; cross_norm_prefactors rescales both to unit mass.
// ---------------------------------------------------------------------------

// Single frequency mode:
//   1/2 e^{(2 g_i s)^2 - 2 g_i tau} erfc(2 g_i s - tau/2s)
// + 1/2 e^{(2 g_s s)^2 + 2 g_s tau} erfc(2 g_s s + tau/2s),
// evaluated in erfcx form so the e^{x^2} erfc product never overflows.
double cross_single(const Linewidths& lw, double sigma, double tau);
double cross_single_dgamma_s(const Linewidths& lw, double sigma, double tau);
double cross_single_dgamma_i(const Linewidths& lw, double sigma, double tau);

// Many modes: central Gaussian plus side peaks at +-j T0 weighted by the
// cavity decay per round trip. j_max bounds the side-peak sum; the default
// makes the dropped geometric tail < 1e-12.
int default_j_max(const Linewidths& lw, double t0);
double cross_multi(const Linewidths& lw, double sigma, double tau, double t0, int j_max);
double cross_multi_dgamma_s(const Linewidths& lw, double sigma, double tau, double t0, int j_max);
double cross_multi_dgamma_i(const Linewidths& lw, double sigma, double tau, double t0, int j_max);
double cross_multi_dt0(const Linewidths& lw, double sigma, double tau, double t0, int j_max);

// Normalization prefactors that give the multi- and single-mode components
// equal (unit) time-integrated mass.
struct CrossPrefactors {
    double multi = 0.0;   // (1-e^{-2 g_i T0})(1-e^{-2 g_s T0}) / (1-e^{-2(g_i+g_s) T0})
    double single = 0.0;  // 2 g_i g_s / (g_i + g_s)
};
CrossPrefactors cross_norm_prefactors(const Linewidths& lw, double t0);
CrossPrefactors cross_norm_prefactors_dgamma_s(const Linewidths& lw, double t0);
CrossPrefactors cross_norm_prefactors_dgamma_i(const Linewidths& lw, double t0);
double cross_prefactor_multi_dt0(const Linewidths& lw, double t0);

struct CrossCorrelationModel {
    CombSpec comb;
    double sigma = 0.0;       // per-detector jitter, s
    double purity = 1.0;      // p: weight of the coherent (multi) component
    double amplitude = 1.0;   // counts scale
    double background = 0.0;  // flat offset

    void validate() const;
};

// p-weighted, mass-normalized mix of cross_multi and cross_single, scaled and
// offset: amplitude * [p * pre_m * multi + (1-p) * pre_s * single] + background.
double cross_sum(const CrossCorrelationModel& model, double tau);

// ---------------------------------------------------------------------------
// Second-order autocorrelation of the idler (unheralded, thermal per mode).
// ---------------------------------------------------------------------------

// Envelope E(tau) with g2(tau) = 1 + E^2 for a single mode:
//   E = (g_i e^{-g_s|tau|} - g_s e^{-g_i|tau|}) / (g_i - g_s),
// analytic limits for g_i = g_s and for the unconfined idler.
double auto_envelope(const Linewidths& lw, double tau);

// 1 + E(tau)^2; equals 2 at tau = 0 for any linewidths.
double g2_auto_single(const Linewidths& lw, double tau);

// Excess g2 - 1 for the M-mode comb under the orthogonal-teeth approximation:
// E(tau)^2 * D_M(tau) / M^2 with D_M the Dirichlet kernel of spacing 2 pi fsr.
double g2_auto_excess(const CombSpec& spec, double tau);

// Excess convolved with the sqrt(2) sigma detection kernel, closed form
// (single mode only; multi-mode synthesis convolves on a grid).
double g2_auto_excess_conv(const Linewidths& lw, double sigma, double tau);
double g2_auto_excess_conv_dgamma_s(const Linewidths& lw, double sigma, double tau);
double g2_auto_excess_conv_dgamma_i(const Linewidths& lw, double sigma, double tau);

// ---------------------------------------------------------------------------
// Time-integrated autocorrelation excess  Delta g2 = ∫ (g2(tau) - 1) d tau.
// ---------------------------------------------------------------------------

struct AutoCorrelationResult {
    double delta_g2_s = 0.0;   // seconds
    double mode_estimate = 0.0;
};

// (1/M) (g_i^2 + 3 g_i g_s + g_s^2) / (g_i g_s (g_i + g_s));
// 5/(2 g_s M) in the degenerate case, 1/(g_s M) for the unconfined idler.
// M is real so fractional effective mode numbers can be evaluated.
double delta_g2_closed_form(const Linewidths& lw, double mode_count);
double delta_g2_closed_form(const CombSpec& spec);

// Inverts the closed form for M given a measured Delta g2.
double estimate_mode_count(double delta_g2_s, const Linewidths& lw);

// Independent spectral route: 2 pi ∫ |f(omega_i)|^4 d omega_i by adaptive
// quadrature over the comb built from jsa_marginal. Throws QuadratureError
// when the 15- and 31-point rules disagree beyond cross_check_tol.
double delta_g2_spectral(const CombSpec& spec, double rel_tol = 1e-12,
                         double cross_check_tol = 1e-6);

}  // namespace bfc
