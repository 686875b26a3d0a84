#include "bfc/comb.hpp"

#include <cmath>
#include <stdexcept>

namespace bfc {

double Linewidths::fwhm_idler_hz() const {
    if (idler_unconfined) {
        throw std::logic_error("fwhm_idler_hz: idler is unconfined (singly resonant limit)");
    }
    return gamma_i / kPi;
}

void Linewidths::validate() const {
    if (!(gamma_s > 0.0) || !std::isfinite(gamma_s)) {
        throw std::invalid_argument("Linewidths: gamma_s must be positive and finite");
    }
    if (!idler_unconfined && (!(gamma_i > 0.0) || !std::isfinite(gamma_i))) {
        throw std::invalid_argument("Linewidths: gamma_i must be positive and finite");
    }
}

void CombSpec::validate() const {
    lw.validate();
    if (!(fsr_hz > 0.0) || !std::isfinite(fsr_hz)) {
        throw std::invalid_argument("CombSpec: fsr_hz must be positive and finite");
    }
    if (!(center_freq_hz > 0.0) || !std::isfinite(center_freq_hz)) {
        throw std::invalid_argument("CombSpec: center_freq_hz must be positive and finite");
    }
    if (mode_count < 1) {
        throw std::invalid_argument("CombSpec: mode_count must be >= 1");
    }
    if (!(pump_omega > 0.0) || !std::isfinite(pump_omega)) {
        throw std::invalid_argument("CombSpec: pump_omega must be positive and finite");
    }
}

double mode_frequency(const CombSpec& spec, int m) {
    return kTwoPi * spec.center_freq_hz + kTwoPi * static_cast<double>(m) * spec.fsr_hz;
}

std::complex<double> tooth_amplitude(const Linewidths& lw, double delta) {
    // Far tails: the amplitude is below 1e-260 and the naive complex product
    // overflows to NaN; quadrature transforms do probe such detunings.
    if (std::fabs(delta) > 1e130) {
        return {0.0, 0.0};
    }
    const std::complex<double> i(0.0, 1.0);
    if (lw.idler_unconfined) {
        return 1.0 / (lw.gamma_s + i * delta);
    }
    return 1.0 / ((lw.gamma_i - i * delta) * (lw.gamma_s + i * delta));
}

double tooth_norm(const Linewidths& lw) {
    if (lw.idler_unconfined) {
        return kPi / lw.gamma_s;
    }
    return kPi / (lw.gamma_i * lw.gamma_s * (lw.gamma_i + lw.gamma_s));
}

std::complex<double> tooth_overlap(const Linewidths& lw, double sep) {
    const std::complex<double> i(0.0, 1.0);
    if (lw.idler_unconfined) {
        return 2.0 * kPi / (2.0 * lw.gamma_s - i * sep);
    }
    // Residue sum collapses to a cancellation-free product form.
    return 4.0 * kPi /
           ((lw.gamma_i + lw.gamma_s) * (2.0 * lw.gamma_s - i * sep) *
            (2.0 * lw.gamma_i + i * sep));
}

double jsa_total_norm(const CombSpec& spec) {
    const int m_count = spec.mode_count;
    const double spacing = spec.mode_spacing_rad_s();
    double total = static_cast<double>(m_count) * tooth_norm(spec.lw);
    for (int d = 1; d < m_count; ++d) {
        const double pairs = static_cast<double>(m_count - d);
        total += 2.0 * pairs * tooth_overlap(spec.lw, d * spacing).real();
    }
    return total;
}

std::complex<double> jsa_marginal(const CombSpec& spec, double omega_i) {
    spec.validate();
    if (!std::isfinite(omega_i)) {
        throw std::invalid_argument("jsa_marginal: omega_i must be finite");
    }
    std::complex<double> sum(0.0, 0.0);
    for (int m = spec.mode_index_lo(); m <= spec.mode_index_hi(); ++m) {
        sum += tooth_amplitude(spec.lw, omega_i - mode_frequency(spec, m));
    }
    return sum / std::sqrt(jsa_total_norm(spec));
}

double jsa_intensity(const CombSpec& spec, double omega_i) {
    return std::norm(jsa_marginal(spec, omega_i));
}

Regime classify_regime(const PumpRegime& regime, double threshold) {
    if (!(threshold > 0.0) || !(threshold < 1.0)) {
        throw std::invalid_argument("classify_regime: threshold must be in (0,1)");
    }
    if (regime.mode_count < 1) {
        throw std::invalid_argument("classify_regime: mode_count must be >= 1");
    }
    const double zeta_sq = std::norm(regime.zeta);
    if (2.0 * regime.mode_count * zeta_sq < threshold) {
        return Regime::hyperentangled;
    }
    if (2.0 * zeta_sq < threshold) {
        return Regime::multiplexed;
    }
    return Regime::neither;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::hyperentangled: return "hyperentangled";
        case Regime::multiplexed: return "multiplexed";
        case Regime::neither: return "neither";
    }
    return "unknown";
}

}  // namespace bfc
