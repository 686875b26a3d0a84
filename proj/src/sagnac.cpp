#include "bfc/sagnac.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace bfc {

namespace {
constexpr int kHH = 0;
constexpr int kVH = 2;
constexpr int kVV = 3;
}  // namespace

DensityMatrix::DensityMatrix(const Eigen::Matrix4cd& rho) : rho_(rho) {
    const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12) {
        throw std::invalid_argument("DensityMatrix: not Hermitian");
    }
    const double tr = rho_.trace().real();
    if (std::fabs(tr - 1.0) > 1e-12 || std::fabs(rho_.trace().imag()) > 1e-12) {
        throw std::invalid_argument("DensityMatrix: trace must be 1");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (rho_ + rho_.adjoint()),
                                                       Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) {
        throw std::invalid_argument("DensityMatrix: negative eigenvalue");
    }
}

DensityMatrix DensityMatrix::maximally_mixed() {
    return DensityMatrix(0.25 * Eigen::Matrix4cd::Identity());
}

DensityMatrix DensityMatrix::bell_phi(double phase) {
    Eigen::Vector4cd phi = Eigen::Vector4cd::Zero();
    phi(kHH) = 1.0 / std::numbers::sqrt2;
    phi(kVV) = std::polar(1.0 / std::numbers::sqrt2, phase);
    return DensityMatrix(phi * phi.adjoint());
}

void write_density_matrix(const DensityMatrix& rho, std::ostream& out) {
    out << "# bfcsim density matrix v1\n# basis=HH,HV,VH,VV (row-major, re im pairs)\n";
    char buf[64];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            snprintf(buf, sizeof buf, "%s%.17g %.17g", c ? " " : "", rho(r, c).real(),
                     rho(r, c).imag());
            out << buf;
        }
        out << "\n";
    }
}

void write_density_matrix(const DensityMatrix& rho, const std::string& path) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("write_density_matrix: cannot open " + path);
    }
    write_density_matrix(rho, f);
}

DensityMatrix read_density_matrix(std::istream& in) {
    Eigen::Matrix4cd m;
    std::string line;
    int row = 0;
    while (std::getline(in, line) && row < 4) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream is(line);
        for (int c = 0; c < 4; ++c) {
            double re, im;
            if (!(is >> re >> im)) {
                throw std::runtime_error("read_density_matrix: malformed row");
            }
            m(row, c) = {re, im};
        }
        ++row;
    }
    if (row != 4) {
        throw std::runtime_error("read_density_matrix: expected 4 rows");
    }
    return DensityMatrix(m);
}

DensityMatrix read_density_matrix_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("read_density_matrix: cannot open " + path);
    }
    return read_density_matrix(f);
}

void SagnacSpec::validate() const {
    const double unit_l = std::norm(t_l) + std::norm(r_l);
    const double unit_r = std::norm(t_r) + std::norm(r_r);
    if (std::fabs(unit_l - 1.0) > 1e-9 || std::fabs(unit_r - 1.0) > 1e-9) {
        throw std::invalid_argument("SagnacSpec: |t|^2 + |r|^2 must be 1 on each side");
    }
    for (double eta : {eta_sl, eta_sr, eta_il, eta_ir}) {
        if (!(eta > 0.0) || !(eta <= 1.0)) {
            throw std::invalid_argument("SagnacSpec: arm transmissions must be in (0,1]");
        }
    }
    if (!(delta_tau_s >= 0.0)) {
        throw std::invalid_argument("SagnacSpec: delta_tau must be >= 0");
    }
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("SagnacSpec: gamma must be positive");
    }
}

SagnacSpec make_symmetric_sagnac(double r_power, double eta_sl, double eta_sr, double eta_il,
                                 double eta_ir, double delta_tau_s, double gamma,
                                 double phase_phi, double delta_theta) {
    if (!(r_power >= 0.0) || !(r_power < 1.0)) {
        throw std::invalid_argument("make_symmetric_sagnac: |r|^2 must be in [0,1)");
    }
    SagnacSpec s;
    const double r_abs = std::sqrt(r_power);
    const double t_abs = std::sqrt(1.0 - r_power);
    s.r_l = s.r_r = std::complex<double>(0.0, r_abs);
    s.t_l = s.t_r = t_abs;
    s.eta_sl = eta_sl;
    s.eta_sr = eta_sr;
    s.eta_il = eta_il;
    s.eta_ir = eta_ir;
    s.delta_tau_s = delta_tau_s;
    s.gamma = gamma;
    s.phase_phi = phase_phi;
    s.delta_theta = delta_theta;
    s.g_h = 1.0;
    // g_H eta_ir t_l eta_sr = g_V eta_il t_r eta_sl
    s.g_v = s.g_h * (eta_ir * t_abs * eta_sr) / (eta_il * t_abs * eta_sl);
    s.validate();
    return s;
}

std::pair<std::complex<double>, std::complex<double>> beta_factors(const SagnacSpec& spec) {
    spec.validate();
    if (std::abs(spec.t_l) < 1e-15 || std::abs(spec.t_r) < 1e-15) {
        throw std::invalid_argument("beta_factors: zero transmittance");
    }
    const std::complex<double> beta_h = spec.r_l * spec.eta_sl / (spec.t_l * spec.eta_sr);
    const std::complex<double> beta_v = spec.r_r * spec.eta_sr / (spec.t_r * spec.eta_sl);
    return {beta_h, beta_v};
}

double contamination_weight(const SagnacSpec& spec) {
    const auto [beta_h, beta_v] = beta_factors(spec);
    return 0.5 * std::norm(beta_h) * std::exp(-2.0 * spec.gamma * spec.delta_tau_s);
}

DensityMatrix postselected_state(const SagnacSpec& spec, PumpBalance mode) {
    spec.validate();
    if (mode == PumpBalance::assert_balanced) {
        const std::complex<double> lhs = spec.g_h * spec.eta_ir * spec.t_l * spec.eta_sr;
        const std::complex<double> rhs = spec.g_v * spec.eta_il * spec.t_r * spec.eta_sl;
        const double scale = std::max(std::abs(lhs), std::abs(rhs));
        if (std::abs(lhs - rhs) > 1e-9 * scale) {
            throw std::invalid_argument(
                "postselected_state: pump balance condition violated "
                "(use PumpBalance::solve_for_gv to impose it)");
        }
    }
    // solve_for_gv: the balanced g_v is implied; the postselected state does
    // not depend on its value beyond the balance itself.
    const double w = contamination_weight(spec);
    Eigen::Vector4cd phi = Eigen::Vector4cd::Zero();
    phi(kHH) = 1.0 / std::numbers::sqrt2;
    phi(kVV) = std::polar(1.0 / std::numbers::sqrt2, spec.phase_phi);
    Eigen::Matrix4cd rho = phi * phi.adjoint();
    rho(kVH, kVH) += w;  // dephased contaminant: no coherences with the Phi block
    rho /= (1.0 + w);
    return DensityMatrix(rho);
}

FidelityResult fidelity_max_theta(const DensityMatrix& rho) {
    const std::complex<double> coh = rho(kHH, kVV);
    FidelityResult out;
    out.fidelity = 0.5 * (rho(kHH, kHH).real() + rho(kVV, kVV).real()) + std::abs(coh);
    out.theta_star = std::abs(coh) > 0.0 ? -std::arg(coh) : 0.0;
    return out;
}

CorrectedFidelity corrected_fidelity(double measured_fidelity, const SagnacSpec& spec) {
    if (!(measured_fidelity > 0.0) || !(measured_fidelity <= 1.0)) {
        throw std::invalid_argument("corrected_fidelity: measured fidelity must be in (0,1]");
    }
    const double raw = measured_fidelity * (1.0 + contamination_weight(spec));
    CorrectedFidelity out;
    out.clamped = raw > 1.0;
    out.value = out.clamped ? 1.0 : raw;
    return out;
}

double balanced_fidelity_bound(const SagnacSpec& spec) {
    spec.validate();
    if (spec.delta_tau_s != 0.0) {
        throw std::invalid_argument("balanced_fidelity_bound: requires tau_r = tau_l (delta_tau = 0)");
    }
    const auto [beta_h, beta_v] = beta_factors(spec);
    const double num = std::abs(1.0 - beta_h * beta_v);
    const double den =
        std::sqrt((1.0 + std::norm(beta_h)) * (1.0 + std::norm(beta_v)));
    const double bound_beta = 0.5 * (1.0 + num / den);

    const bool moduli_symmetric = std::fabs(std::abs(spec.r_l) - std::abs(spec.r_r)) <= 1e-12 &&
                                  std::fabs(std::abs(spec.t_l) - std::abs(spec.t_r)) <= 1e-12;
    const bool reciprocal =
        std::abs(std::conj(spec.r_l) * spec.t_r + std::conj(spec.t_l) * spec.r_r) <= 1e-12;
    if (moduli_symmetric && reciprocal) {
        const double r2 = std::norm(spec.r_l);
        const double x = (spec.eta_sl / spec.eta_sr) * (spec.eta_sl / spec.eta_sr);
        const double bound_loss =
            0.5 * (1.0 + 1.0 / std::sqrt((1.0 + r2 * (x - 1.0)) * (1.0 + r2 * (1.0 / x - 1.0))));
        if (std::fabs(bound_loss - bound_beta) > 1e-10) {
            throw std::logic_error("balanced_fidelity_bound: beta and loss forms disagree");
        }
        return bound_loss;
    }
    return bound_beta;
}

}  // namespace bfc
