#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bfc/histogram.hpp"  // NoiseModel
#include "bfc/sagnac.hpp"

namespace bfc {

enum class Polarization { H, V, D, A, R, L };

Eigen::Vector2cd polarization_ket(Polarization p);
char polarization_letter(Polarization p);
Polarization polarization_from_letter(char c);

struct MeasurementSetting {
    Polarization a = Polarization::H;  // idler-side projector
    Polarization b = Polarization::H;  // signal-side projector

    std::string label() const;
    Eigen::Matrix4cd projector() const;  // Pi_a (x) Pi_b
};

// Canonical 16-setting tomography: {H, V, D, R} x {H, V, D, R}.
std::vector<MeasurementSetting> canonical_settings();

struct TomographyRecord {
    std::vector<MeasurementSetting> settings;
    std::vector<double> counts;  // integer-valued when Poisson-sampled
    double acquisition_scale = 0.0;
};

// Per setting: expectation = scale * Tr[rho (Pi_a x Pi_b)], Poisson-sampled
// from an independent per-setting stream.
TomographyRecord simulate_counts(const DensityMatrix& rho, double scale, uint64_t seed,
                                 NoiseModel noise = NoiseModel::poisson);

// Throws unless the settings span the full two-qubit operator space.
void check_informationally_complete(const std::vector<MeasurementSetting>& settings);

// Linear (Stokes) inversion; Hermitian and unit trace by construction, but
// eigenvalues may be negative. Throws on a singular design matrix.
Eigen::Matrix4cd linear_inversion(const TomographyRecord& rec);

struct MleResult {
    DensityMatrix rho;
    bool converged = false;
    int iterations = 0;
    double log_likelihood = 0.0;           // per-count Poisson log likelihood
    std::vector<double> objective_trace;   // negative log likelihood per accepted step

    MleResult() : rho(DensityMatrix::maximally_mixed()) {}
};

// Poisson maximum likelihood over Cholesky-parameterized states (T^dag T with
// the intensity absorbed into T); quasi-Newton with analytic gradient.
MleResult mle_reconstruct(const TomographyRecord& rec, int max_iterations = 2000);

// Gradient of the per-count negative log likelihood at the packed Cholesky
// parameter vector (exposed for the finite-difference check in the tests).
Eigen::VectorXd mle_objective_gradient(const TomographyRecord& rec, const Eigen::VectorXd& x);
double mle_objective(const TomographyRecord& rec, const Eigen::VectorXd& x);

double trace_distance(const Eigen::Matrix4cd& a, const Eigen::Matrix4cd& b);

// CSV: '# key=value' metadata, then 'setting,count'.
void write_tomography_csv(const TomographyRecord& rec, std::ostream& out);
void write_tomography_csv(const TomographyRecord& rec, const std::string& path);
TomographyRecord read_tomography_csv(std::istream& in);
TomographyRecord read_tomography_csv_file(const std::string& path);

}  // namespace bfc
