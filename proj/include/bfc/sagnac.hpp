#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace bfc {

// Two-qubit polarization state on the {HH, HV, VH, VV} basis (idler first).
class DensityMatrix {
  public:
    // Validates hermiticity (1e-12), unit trace (1e-12) and positivity
    // (eigenvalues >= -1e-10).
    explicit DensityMatrix(const Eigen::Matrix4cd& rho);

    const Eigen::Matrix4cd& matrix() const { return rho_; }
    std::complex<double> operator()(int r, int c) const { return rho_(r, c); }

    static DensityMatrix maximally_mixed();
    // (|HH> + e^{i phase} |VV>)/sqrt(2) projector.
    static DensityMatrix bell_phi(double phase);

  private:
    Eigen::Matrix4cd rho_;
};

void write_density_matrix(const DensityMatrix& rho, std::ostream& out);
void write_density_matrix(const DensityMatrix& rho, const std::string& path);
DensityMatrix read_density_matrix(std::istream& in);
DensityMatrix read_density_matrix_file(const std::string& path);

// Sagnac interferometer around the singly resonant resonator. r/t are the
// complex reflection/transmission amplitudes of the resonator seen from each
// side (|t|^2 + |r|^2 = 1 per side), eta the amplitude transmissions of each
// arm for signal and idler, delta_tau the arm-length delay and gamma the
// temporal decay of the signal wavepacket.
struct SagnacSpec {
    std::complex<double> r_l, r_r;
    std::complex<double> t_l = 1.0, t_r = 1.0;
    double eta_sl = 1.0, eta_sr = 1.0, eta_il = 1.0, eta_ir = 1.0;
    double delta_tau_s = 0.0;
    double gamma = 1.0;
    double phase_phi = 0.0;
    double delta_theta = 0.0;
    std::complex<double> g_h = 1.0, g_v = 1.0;

    void validate() const;  // refuses |t|^2+|r|^2 != 1 beyond 1e-9
};

// Balanced-face convention: t real, r = i |r|, so r_l* t_r + t_l* r_r = 0
// (reciprocity) holds exactly. g_v is solved for pump balance.
SagnacSpec make_symmetric_sagnac(double r_power, double eta_sl, double eta_sr, double eta_il,
                                 double eta_ir, double delta_tau_s, double gamma,
                                 double phase_phi, double delta_theta);

// beta_H = r_l eta_sl / (t_l eta_sr),  beta_V = r_r eta_sr / (t_r eta_sl).
std::pair<std::complex<double>, std::complex<double>> beta_factors(const SagnacSpec& spec);

// Weight of the reflected-signal VH contaminant: |beta_H|^2 e^{-2 gamma dtau} / 2.
double contamination_weight(const SagnacSpec& spec);

enum class PumpBalance { assert_balanced, solve_for_gv };

// Time-window postselected state: normalized mixture of the maximally
// entangled |Phi> (relative phase phi) with the dephased VH contaminant.
DensityMatrix postselected_state(const SagnacSpec& spec,
                                 PumpBalance mode = PumpBalance::assert_balanced);

// F = max_theta <Psi_theta| rho |Psi_theta> = (rho_HHHH + rho_VVVV)/2 + |rho_HHVV|
// with theta* = -arg rho_HHVV.
struct FidelityResult {
    double fidelity = 0.0;
    double theta_star = 0.0;
};
FidelityResult fidelity_max_theta(const DensityMatrix& rho);

// measured_F * (1 + contamination weight), clamped at 1.
struct CorrectedFidelity {
    double value = 0.0;
    bool clamped = false;
};
CorrectedFidelity corrected_fidelity(double measured_fidelity, const SagnacSpec& spec);

// Lower bound for the balanced interferometer (tau_r = tau_l, i.e.
// delta_tau = 0):  1/2 [1 + |1 - bH bV| / sqrt((1+|bH|^2)(1+|bV|^2))].
// For symmetric face moduli the loss form
//   1/2 [1 + ((1+|r|^2(x-1))(1+|r|^2(1/x-1)))^{-1/2}],  x = eta_sl^2/eta_sr^2,
// is evaluated as well, asserted equal, and returned.
double balanced_fidelity_bound(const SagnacSpec& spec);

}  // namespace bfc
