#include "bfc/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bfc/quadrature.hpp"
#include "bfc/special.hpp"

namespace bfc {

namespace {

constexpr double kDegenerateRelTol = 1e-8;  // |g_i - g_s| / g_s below which the analytic limit is used
constexpr double kSqrtPi = 1.772453850905516027298;

bool degenerate(const Linewidths& lw) {
    return !lw.idler_unconfined &&
           std::fabs(lw.gamma_i - lw.gamma_s) < kDegenerateRelTol * lw.gamma_s;
}

// Gaussian of the combined two-detector kernel: std dev sqrt(2) sigma,
// written with the 4 sigma^2 denominator of the literature.
double comb_gaussian(double x, double sigma) {
    return std::exp(-x * x / (4.0 * sigma * sigma)) / (2.0 * kSqrtPi * sigma);
}

double comb_gaussian_dx(double x, double sigma) {
    return -x / (2.0 * sigma * sigma) * comb_gaussian(x, sigma);
}

void check_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("cross/auto correlation: sigma must be positive");
    }
}

}  // namespace

// --------------------------------------------------------------------------
// cross-correlation
// --------------------------------------------------------------------------

double cross_single(const Linewidths& lw, double sigma, double tau) {
    check_sigma(sigma);
    const double u = tau / (2.0 * sigma);
    const double lp = -u * u;
    double value = 0.5 * scaled_erfcx(lp, 2.0 * lw.gamma_s * sigma + u);
    if (!lw.idler_unconfined) {
        value += 0.5 * scaled_erfcx(lp, 2.0 * lw.gamma_i * sigma - u);
    }
    return value;
}

double cross_single_dgamma_s(const Linewidths& lw, double sigma, double tau) {
    const double u = tau / (2.0 * sigma);
    return sigma * scaled_erfcx_prime(-u * u, 2.0 * lw.gamma_s * sigma + u);
}

double cross_single_dgamma_i(const Linewidths& lw, double sigma, double tau) {
    if (lw.idler_unconfined) {
        return 0.0;
    }
    const double u = tau / (2.0 * sigma);
    return sigma * scaled_erfcx_prime(-u * u, 2.0 * lw.gamma_i * sigma - u);
}

int default_j_max(const Linewidths& lw, double t0) {
    const double gamma_min =
        lw.idler_unconfined ? lw.gamma_s : std::min(lw.gamma_s, lw.gamma_i);
    // e^{-2 gamma_min j T0} < 1e-12
    const double j = std::ceil(std::log(1e12) / (2.0 * gamma_min * t0));
    return static_cast<int>(std::max(1.0, j));
}

namespace {

// Side-peak loop shared by cross_multi and its derivatives. Gaussians more
// than 12 combined widths away from tau are dropped (< 1e-31 of peak).
template <class Term>
void for_each_side_peak(double sigma, double tau, double t0, int j_max, Term&& term) {
    const double reach = 12.0 * std::numbers::sqrt2 * sigma;
    // Positive-delay branch: peaks at +j T0.
    {
        const int lo = std::max(1, static_cast<int>(std::floor((tau - reach) / t0)));
        const int hi = std::min(j_max, static_cast<int>(std::ceil((tau + reach) / t0)));
        for (int j = lo; j <= hi; ++j) {
            term(j, +1);
        }
    }
    // Negative-delay branch: peaks at -j T0.
    {
        const int lo = std::max(1, static_cast<int>(std::floor((-tau - reach) / t0)));
        const int hi = std::min(j_max, static_cast<int>(std::ceil((-tau + reach) / t0)));
        for (int j = lo; j <= hi; ++j) {
            term(j, -1);
        }
    }
}

}  // namespace

double cross_multi(const Linewidths& lw, double sigma, double tau, double t0, int j_max) {
    check_sigma(sigma);
    if (j_max <= 0) {
        throw std::invalid_argument("cross_multi: j_max must be positive");
    }
    if (!(t0 > 0.0)) {
        throw std::invalid_argument("cross_multi: round-trip time must be positive");
    }
    double value = comb_gaussian(tau, sigma);
    for_each_side_peak(sigma, tau, t0, j_max, [&](int j, int side) {
        if (side > 0) {
            if (!lw.idler_unconfined) {
                value += std::exp(-2.0 * lw.gamma_i * j * t0) * comb_gaussian(j * t0 - tau, sigma);
            }
        } else {
            value += std::exp(-2.0 * lw.gamma_s * j * t0) * comb_gaussian(j * t0 + tau, sigma);
        }
    });
    return value;
}

double cross_multi_dgamma_s(const Linewidths& lw, double sigma, double tau, double t0,
                            int j_max) {
    double value = 0.0;
    for_each_side_peak(sigma, tau, t0, j_max, [&](int j, int side) {
        if (side < 0) {
            value += -2.0 * j * t0 * std::exp(-2.0 * lw.gamma_s * j * t0) *
                     comb_gaussian(j * t0 + tau, sigma);
        }
    });
    return value;
}

double cross_multi_dgamma_i(const Linewidths& lw, double sigma, double tau, double t0,
                            int j_max) {
    if (lw.idler_unconfined) {
        return 0.0;
    }
    double value = 0.0;
    for_each_side_peak(sigma, tau, t0, j_max, [&](int j, int side) {
        if (side > 0) {
            value += -2.0 * j * t0 * std::exp(-2.0 * lw.gamma_i * j * t0) *
                     comb_gaussian(j * t0 - tau, sigma);
        }
    });
    return value;
}

double cross_multi_dt0(const Linewidths& lw, double sigma, double tau, double t0, int j_max) {
    double value = 0.0;
    for_each_side_peak(sigma, tau, t0, j_max, [&](int j, int side) {
        if (side > 0) {
            if (!lw.idler_unconfined) {
                const double w = std::exp(-2.0 * lw.gamma_i * j * t0);
                value += j * w *
                         (-2.0 * lw.gamma_i * comb_gaussian(j * t0 - tau, sigma) +
                          comb_gaussian_dx(j * t0 - tau, sigma));
            }
        } else {
            const double w = std::exp(-2.0 * lw.gamma_s * j * t0);
            value += j * w *
                     (-2.0 * lw.gamma_s * comb_gaussian(j * t0 + tau, sigma) +
                      comb_gaussian_dx(j * t0 + tau, sigma));
        }
    });
    return value;
}

CrossPrefactors cross_norm_prefactors(const Linewidths& lw, double t0) {
    CrossPrefactors pre;
    if (lw.idler_unconfined) {
        pre.multi = -std::expm1(-2.0 * lw.gamma_s * t0);
        pre.single = 2.0 * lw.gamma_s;
        return pre;
    }
    const double a = -std::expm1(-2.0 * lw.gamma_i * t0);
    const double b = -std::expm1(-2.0 * lw.gamma_s * t0);
    const double c = -std::expm1(-2.0 * (lw.gamma_i + lw.gamma_s) * t0);
    pre.multi = a * b / c;
    pre.single = 2.0 * lw.gamma_i * lw.gamma_s / (lw.gamma_i + lw.gamma_s);
    return pre;
}

CrossPrefactors cross_norm_prefactors_dgamma_s(const Linewidths& lw, double t0) {
    CrossPrefactors d;
    if (lw.idler_unconfined) {
        d.multi = 2.0 * t0 * std::exp(-2.0 * lw.gamma_s * t0);
        d.single = 2.0;
        return d;
    }
    const double a = -std::expm1(-2.0 * lw.gamma_i * t0);
    const double b = -std::expm1(-2.0 * lw.gamma_s * t0);
    const double c = -std::expm1(-2.0 * (lw.gamma_i + lw.gamma_s) * t0);
    const double db = 2.0 * t0 * std::exp(-2.0 * lw.gamma_s * t0);
    const double dc = 2.0 * t0 * std::exp(-2.0 * (lw.gamma_i + lw.gamma_s) * t0);
    d.multi = (a * db * c - a * b * dc) / (c * c);
    const double gsum = lw.gamma_i + lw.gamma_s;
    d.single = 2.0 * lw.gamma_i * lw.gamma_i / (gsum * gsum);
    return d;
}

CrossPrefactors cross_norm_prefactors_dgamma_i(const Linewidths& lw, double t0) {
    CrossPrefactors d;
    if (lw.idler_unconfined) {
        return d;  // zero
    }
    const double a = -std::expm1(-2.0 * lw.gamma_i * t0);
    const double b = -std::expm1(-2.0 * lw.gamma_s * t0);
    const double c = -std::expm1(-2.0 * (lw.gamma_i + lw.gamma_s) * t0);
    const double da = 2.0 * t0 * std::exp(-2.0 * lw.gamma_i * t0);
    const double dc = 2.0 * t0 * std::exp(-2.0 * (lw.gamma_i + lw.gamma_s) * t0);
    d.multi = (da * b * c - a * b * dc) / (c * c);
    const double gsum = lw.gamma_i + lw.gamma_s;
    d.single = 2.0 * lw.gamma_s * lw.gamma_s / (gsum * gsum);
    return d;
}

double cross_prefactor_multi_dt0(const Linewidths& lw, double t0) {
    if (lw.idler_unconfined) {
        return 2.0 * lw.gamma_s * std::exp(-2.0 * lw.gamma_s * t0);
    }
    const double a = -std::expm1(-2.0 * lw.gamma_i * t0);
    const double b = -std::expm1(-2.0 * lw.gamma_s * t0);
    const double c = -std::expm1(-2.0 * (lw.gamma_i + lw.gamma_s) * t0);
    const double da = 2.0 * lw.gamma_i * std::exp(-2.0 * lw.gamma_i * t0);
    const double db = 2.0 * lw.gamma_s * std::exp(-2.0 * lw.gamma_s * t0);
    const double dc = 2.0 * (lw.gamma_i + lw.gamma_s) * std::exp(-2.0 * (lw.gamma_i + lw.gamma_s) * t0);
    return ((da * b + a * db) * c - a * b * dc) / (c * c);
}

void CrossCorrelationModel::validate() const {
    comb.validate();
    check_sigma(sigma);
    if (!(purity >= 0.0) || !(purity <= 1.0)) {
        throw std::invalid_argument("CrossCorrelationModel: purity must be in [0,1]");
    }
    if (!(amplitude > 0.0)) {
        throw std::invalid_argument("CrossCorrelationModel: amplitude must be positive");
    }
    if (!(background >= 0.0)) {
        throw std::invalid_argument("CrossCorrelationModel: background must be >= 0");
    }
}

double cross_sum(const CrossCorrelationModel& model, double tau) {
    model.validate();
    const double t0 = model.comb.round_trip_time_s();
    const CrossPrefactors pre = cross_norm_prefactors(model.comb.lw, t0);
    const int j_max = default_j_max(model.comb.lw, t0);
    const double multi = cross_multi(model.comb.lw, model.sigma, tau, t0, j_max);
    const double single = cross_single(model.comb.lw, model.sigma, tau);
    return model.amplitude * (model.purity * pre.multi * multi +
                              (1.0 - model.purity) * pre.single * single) +
           model.background;
}

// --------------------------------------------------------------------------
// autocorrelation
// --------------------------------------------------------------------------

double auto_envelope(const Linewidths& lw, double tau) {
    const double at = std::fabs(tau);
    if (lw.idler_unconfined) {
        return std::exp(-lw.gamma_s * at);
    }
    if (degenerate(lw)) {
        const double g = 0.5 * (lw.gamma_i + lw.gamma_s);
        return (1.0 + g * at) * std::exp(-g * at);
    }
    return (lw.gamma_i * std::exp(-lw.gamma_s * at) - lw.gamma_s * std::exp(-lw.gamma_i * at)) /
           (lw.gamma_i - lw.gamma_s);
}

double g2_auto_single(const Linewidths& lw, double tau) {
    lw.validate();
    const double e = auto_envelope(lw, tau);
    return 1.0 + e * e;
}

double g2_auto_excess(const CombSpec& spec, double tau) {
    const double e = auto_envelope(spec.lw, tau);
    const int m_count = spec.mode_count;
    if (m_count == 1) {
        return e * e;
    }
    // Dirichlet kernel sin^2(M x)/sin^2(x), x = pi fsr tau, via the reduced
    // angle so both sines stay accurate for large tau.
    const double x = kPi * spec.fsr_hz * tau;
    const double eps = std::remainder(x, kPi);
    double dirichlet;
    if (std::fabs(eps) < 1e-7) {
        const double ratio = m_count * (1.0 - (static_cast<double>(m_count) * m_count - 1.0) *
                                                  eps * eps / 6.0);
        dirichlet = ratio * ratio;
    } else {
        const double s1 = std::sin(m_count * eps);
        const double s2 = std::sin(eps);
        dirichlet = (s1 * s1) / (s2 * s2);
    }
    return e * e * dirichlet / (static_cast<double>(m_count) * m_count);
}

namespace {

// E^2 expanded into exponentials:
//   confined:   [g_i^2 e^{-2 g_s|t|} + g_s^2 e^{-2 g_i|t|} - 2 g_i g_s e^{-(g_i+g_s)|t|}] / (g_i-g_s)^2
//   unconfined: e^{-2 g_s|t|}
// Each term convolves in closed form through gauss_exp_conv.
struct AutoConvTerms {
    double k[3];
    double coeff[3];
    int n = 0;
};

AutoConvTerms auto_conv_terms(const Linewidths& lw) {
    AutoConvTerms t;
    if (lw.idler_unconfined) {
        t.k[0] = 2.0 * lw.gamma_s;
        t.coeff[0] = 1.0;
        t.n = 1;
        return t;
    }
    const double d = lw.gamma_i - lw.gamma_s;
    t.k[0] = 2.0 * lw.gamma_s;
    t.coeff[0] = lw.gamma_i * lw.gamma_i / (d * d);
    t.k[1] = 2.0 * lw.gamma_i;
    t.coeff[1] = lw.gamma_s * lw.gamma_s / (d * d);
    t.k[2] = lw.gamma_i + lw.gamma_s;
    t.coeff[2] = -2.0 * lw.gamma_i * lw.gamma_s / (d * d);
    t.n = 3;
    return t;
}

double auto_excess_conv_degenerate(double gamma, double s, double tau) {
    // conv of (1 + g|t|)^2 e^{-2g|t|} = C(2g) - 2g C'(2g) + g^2 C''(2g)
    const double k = 2.0 * gamma;
    return gauss_exp_conv(k, s, tau) - 2.0 * gamma * gauss_exp_conv_dk(k, s, tau) +
           gamma * gamma * gauss_exp_conv_dk2(k, s, tau);
}

}  // namespace

double g2_auto_excess_conv(const Linewidths& lw, double sigma, double tau) {
    check_sigma(sigma);
    const double s = std::numbers::sqrt2 * sigma;
    if (degenerate(lw)) {
        return auto_excess_conv_degenerate(0.5 * (lw.gamma_i + lw.gamma_s), s, tau);
    }
    const AutoConvTerms t = auto_conv_terms(lw);
    double value = 0.0;
    for (int i = 0; i < t.n; ++i) {
        value += t.coeff[i] * gauss_exp_conv(t.k[i], s, tau);
    }
    return value;
}

namespace {

double auto_excess_conv_dgamma(const Linewidths& lw, double sigma, double tau, bool wrt_signal) {
    const double s = std::numbers::sqrt2 * sigma;
    if (degenerate(lw)) {
        // Hairline branch: symmetric central difference on the mean width.
        const double g = 0.5 * (lw.gamma_i + lw.gamma_s);
        const double h = 1e-6 * g;
        const double up = auto_excess_conv_degenerate(g + h, s, tau);
        const double dn = auto_excess_conv_degenerate(g - h, s, tau);
        return 0.5 * (up - dn) / (2.0 * h);  // d/dgamma_s = d/dgamma_i = half the total
    }
    const double gi = lw.gamma_i;
    const double gs = lw.gamma_s;
    const double d = gi - gs;
    const double cs = gauss_exp_conv(2.0 * gs, s, tau);
    const double ci = gauss_exp_conv(2.0 * gi, s, tau);
    const double cm = gauss_exp_conv(gi + gs, s, tau);
    const double q = (gi * gi * cs + gs * gs * ci - 2.0 * gi * gs * cm) / (d * d);
    if (wrt_signal) {
        if (lw.idler_unconfined) {
            return 2.0 * gauss_exp_conv_dk(2.0 * gs, s, tau);
        }
        const double dq = (2.0 * gs * ci - 2.0 * gi * cm +
                           2.0 * gi * gi * gauss_exp_conv_dk(2.0 * gs, s, tau) -
                           2.0 * gi * gs * gauss_exp_conv_dk(gi + gs, s, tau)) /
                          (d * d);
        return dq + 2.0 * q / d;
    }
    const double dq = (2.0 * gi * cs - 2.0 * gs * cm +
                       2.0 * gs * gs * gauss_exp_conv_dk(2.0 * gi, s, tau) -
                       2.0 * gi * gs * gauss_exp_conv_dk(gi + gs, s, tau)) /
                      (d * d);
    return dq - 2.0 * q / d;
}

}  // namespace

double g2_auto_excess_conv_dgamma_s(const Linewidths& lw, double sigma, double tau) {
    if (lw.idler_unconfined) {
        const double s = std::numbers::sqrt2 * sigma;
        return 2.0 * gauss_exp_conv_dk(2.0 * lw.gamma_s, s, tau);
    }
    return auto_excess_conv_dgamma(lw, sigma, tau, true);
}

double g2_auto_excess_conv_dgamma_i(const Linewidths& lw, double sigma, double tau) {
    if (lw.idler_unconfined) {
        return 0.0;
    }
    return auto_excess_conv_dgamma(lw, sigma, tau, false);
}

// --------------------------------------------------------------------------
// Delta g2
// --------------------------------------------------------------------------

double delta_g2_closed_form(const Linewidths& lw, double mode_count) {
    lw.validate();
    if (!(mode_count > 0.0)) {
        throw std::invalid_argument("delta_g2_closed_form: mode count must be positive");
    }
    if (lw.idler_unconfined) {
        return 1.0 / (lw.gamma_s * mode_count);
    }
    if (degenerate(lw)) {
        return 2.5 / (lw.gamma_s * mode_count);
    }
    const double gi = lw.gamma_i;
    const double gs = lw.gamma_s;
    return (gi * gi + 3.0 * gi * gs + gs * gs) / (gi * gs * (gi + gs)) / mode_count;
}

double delta_g2_closed_form(const CombSpec& spec) {
    spec.validate();
    return delta_g2_closed_form(spec.lw, static_cast<double>(spec.mode_count));
}

double estimate_mode_count(double delta_g2_s, const Linewidths& lw) {
    if (!(delta_g2_s > 0.0)) {
        throw std::invalid_argument("estimate_mode_count: delta_g2 must be positive");
    }
    return delta_g2_closed_form(lw, 1.0) / delta_g2_s;
}

double delta_g2_spectral(const CombSpec& spec, double rel_tol, double cross_check_tol) {
    spec.validate();
    const double norm = jsa_total_norm(spec);

    // |f|^4 with the tooth sum evaluated directly (cheaper than jsa_marginal
    // which revalidates and renormalizes per call).
    auto intensity_sq = [&](double omega) {
        std::complex<double> sum(0.0, 0.0);
        for (int m = spec.mode_index_lo(); m <= spec.mode_index_hi(); ++m) {
            sum += tooth_amplitude(spec.lw, omega - mode_frequency(spec, m));
        }
        const double i2 = std::norm(sum) / norm;
        return i2 * i2;
    };

    const double total15 = integrate_comb_line(spec, intensity_sq, rel_tol, 15, GkRule::k15).value;
    const double total31 = integrate_comb_line(spec, intensity_sq, rel_tol, 12, GkRule::k31).value;

    const double achieved = std::fabs(total15 - total31) / std::max(std::fabs(total31), 1e-300);
    if (achieved > cross_check_tol) {
        throw QuadratureError("delta_g2_spectral: quadrature did not converge", achieved);
    }
    return kTwoPi * total31;
}

}  // namespace bfc
