#include "bfc/tomography.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "bfc/rng.hpp"

namespace bfc {

namespace {

const Eigen::Matrix2cd& pauli(int i) {
    static const std::array<Eigen::Matrix2cd, 4> sigma = [] {
        std::array<Eigen::Matrix2cd, 4> s;
        const std::complex<double> im(0.0, 1.0);
        s[0] << 1, 0, 0, 1;
        s[1] << 0, 1, 1, 0;
        s[2] << 0, -im, im, 0;
        s[3] << 1, 0, 0, -1;
        return s;
    }();
    return sigma[i];
}

Eigen::Matrix4cd kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
    Eigen::Matrix4cd out;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
        }
    }
    return out;
}

constexpr int kMleParams = 16;

// Lower-triangular T from the packed real parameter vector: 4 real diagonal
// entries then re/im pairs for the 6 sub-diagonal entries.
Eigen::Matrix4cd unpack_cholesky(const Eigen::VectorXd& x) {
    Eigen::Matrix4cd t = Eigen::Matrix4cd::Zero();
    for (int i = 0; i < 4; ++i) {
        t(i, i) = x[i];
    }
    int k = 4;
    for (int i = 1; i < 4; ++i) {
        for (int j = 0; j < i; ++j) {
            t(i, j) = {x[k], x[k + 1]};
            k += 2;
        }
    }
    return t;
}

Eigen::VectorXd pack_cholesky(const Eigen::Matrix4cd& t) {
    Eigen::VectorXd x(kMleParams);
    for (int i = 0; i < 4; ++i) {
        x[i] = t(i, i).real();
    }
    int k = 4;
    for (int i = 1; i < 4; ++i) {
        for (int j = 0; j < i; ++j) {
            x[k] = t(i, j).real();
            x[k + 1] = t(i, j).imag();
            k += 2;
        }
    }
    return x;
}

std::vector<Eigen::Matrix4cd> setting_projectors(const TomographyRecord& rec) {
    std::vector<Eigen::Matrix4cd> ops;
    ops.reserve(rec.settings.size());
    for (const auto& s : rec.settings) {
        ops.push_back(s.projector());
    }
    return ops;
}

constexpr double kLambdaFloor = 1e-300;

}  // namespace

Eigen::Vector2cd polarization_ket(Polarization p) {
    const std::complex<double> im(0.0, 1.0);
    const double rs2 = 1.0 / std::numbers::sqrt2;
    Eigen::Vector2cd k;
    switch (p) {
        case Polarization::H: k << 1, 0; break;
        case Polarization::V: k << 0, 1; break;
        case Polarization::D: k << rs2, rs2; break;
        case Polarization::A: k << rs2, -rs2; break;
        case Polarization::R: k << rs2, im * rs2; break;
        case Polarization::L: k << rs2, -im * rs2; break;
    }
    return k;
}

char polarization_letter(Polarization p) {
    switch (p) {
        case Polarization::H: return 'H';
        case Polarization::V: return 'V';
        case Polarization::D: return 'D';
        case Polarization::A: return 'A';
        case Polarization::R: return 'R';
        case Polarization::L: return 'L';
    }
    return '?';
}

Polarization polarization_from_letter(char c) {
    switch (c) {
        case 'H': return Polarization::H;
        case 'V': return Polarization::V;
        case 'D': return Polarization::D;
        case 'A': return Polarization::A;
        case 'R': return Polarization::R;
        case 'L': return Polarization::L;
    }
    throw std::invalid_argument(std::string("unknown polarization letter '") + c + "'");
}

std::string MeasurementSetting::label() const {
    return std::string{polarization_letter(a), polarization_letter(b)};
}

Eigen::Matrix4cd MeasurementSetting::projector() const {
    const Eigen::Vector2cd ka = polarization_ket(a);
    const Eigen::Vector2cd kb = polarization_ket(b);
    return kron2(ka * ka.adjoint(), kb * kb.adjoint());
}

std::vector<MeasurementSetting> canonical_settings() {
    const std::array<Polarization, 4> basis = {Polarization::H, Polarization::V, Polarization::D,
                                               Polarization::R};
    std::vector<MeasurementSetting> out;
    out.reserve(16);
    for (Polarization a : basis) {
        for (Polarization b : basis) {
            out.push_back({a, b});
        }
    }
    return out;
}

TomographyRecord simulate_counts(const DensityMatrix& rho, double scale, uint64_t seed,
                                 NoiseModel noise) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("simulate_counts: scale must be positive");
    }
    TomographyRecord rec;
    rec.settings = canonical_settings();
    rec.acquisition_scale = scale;
    rec.counts.resize(rec.settings.size());
    for (size_t k = 0; k < rec.settings.size(); ++k) {
        const double mean =
            scale * (rho.matrix() * rec.settings[k].projector()).trace().real();
        if (noise == NoiseModel::none) {
            rec.counts[k] = std::max(0.0, mean);
        } else {
            CounterRng rng(seed, k);
            rec.counts[k] = poisson_sample(std::max(0.0, mean), rng);
        }
    }
    return rec;
}

namespace {

// Rows of the real 16x16 design matrix: p_k = 1/4 sum_ij S_ij Tr[B_k sig_i x sig_j].
Eigen::MatrixXd design_matrix(const std::vector<MeasurementSetting>& settings) {
    const int n = static_cast<int>(settings.size());
    Eigen::MatrixXd a(n, 16);
    for (int k = 0; k < n; ++k) {
        const Eigen::Matrix4cd b = settings[k].projector();
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                a(k, 4 * i + j) = 0.25 * (b * kron2(pauli(i), pauli(j))).trace().real();
            }
        }
    }
    return a;
}

}  // namespace

void check_informationally_complete(const std::vector<MeasurementSetting>& settings) {
    if (settings.size() < 16) {
        throw std::invalid_argument("tomography: need at least 16 settings");
    }
    const Eigen::MatrixXd a = design_matrix(settings);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) < 1e-10 * sv(0)) {
        throw std::invalid_argument("tomography: settings are not informationally complete");
    }
}

Eigen::Matrix4cd linear_inversion(const TomographyRecord& rec) {
    if (rec.settings.size() != rec.counts.size()) {
        throw std::invalid_argument("linear_inversion: settings/counts size mismatch");
    }
    if (!(rec.acquisition_scale > 0.0)) {
        throw std::invalid_argument("linear_inversion: acquisition scale must be positive");
    }
    check_informationally_complete(rec.settings);
    const int n = static_cast<int>(rec.settings.size());
    const Eigen::MatrixXd a = design_matrix(rec.settings);
    Eigen::VectorXd p(n);
    for (int k = 0; k < n; ++k) {
        p[k] = rec.counts[k] / rec.acquisition_scale;
    }
    const Eigen::VectorXd stokes =
        n == 16 ? a.fullPivLu().solve(p)
                : (a.transpose() * a).ldlt().solve(a.transpose() * p).eval();

    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            rho += 0.25 * stokes[4 * i + j] * kron2(pauli(i), pauli(j));
        }
    }
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double tr = rho.trace().real();
    if (!(tr > 1e-12)) {
        throw std::runtime_error("linear_inversion: reconstructed trace is not positive");
    }
    return rho / tr;
}

// The physical state is rho = T T^dag / Tr(T T^dag) with T lower triangular;
// the unnormalized T T^dag carries the intensity, lambda_k = Tr[T T^dag B_k].

double mle_objective(const TomographyRecord& rec, const Eigen::VectorXd& x) {
    const auto ops = setting_projectors(rec);
    const Eigen::Matrix4cd t = unpack_cholesky(x);
    const Eigen::Matrix4cd tt = t * t.adjoint();
    double total = 0.0;
    for (double c : rec.counts) {
        total += c;
    }
    const double norm = std::max(1.0, total);
    double nll = 0.0;
    for (size_t k = 0; k < ops.size(); ++k) {
        const double lam = std::max((tt * ops[k]).trace().real(), kLambdaFloor);
        nll -= rec.counts[k] * std::log(lam) - lam;
    }
    return nll / norm;
}

Eigen::VectorXd mle_objective_gradient(const TomographyRecord& rec, const Eigen::VectorXd& x) {
    const auto ops = setting_projectors(rec);
    const Eigen::Matrix4cd t = unpack_cholesky(x);
    const Eigen::Matrix4cd tt = t * t.adjoint();
    double total = 0.0;
    for (double c : rec.counts) {
        total += c;
    }
    const double norm = std::max(1.0, total);

    // d lambda_k / d conj(T) = B_k T; accumulate G = sum_k c_k B_k T with
    // c_k = -(n_k/lambda_k - 1)/norm.
    Eigen::Matrix4cd g_mat = Eigen::Matrix4cd::Zero();
    for (size_t k = 0; k < ops.size(); ++k) {
        const double lam = std::max((tt * ops[k]).trace().real(), kLambdaFloor);
        const double c = -(rec.counts[k] / lam - 1.0) / norm;
        g_mat += c * (ops[k] * t);
    }
    Eigen::VectorXd grad(kMleParams);
    for (int i = 0; i < 4; ++i) {
        grad[i] = 2.0 * g_mat(i, i).real();
    }
    int k = 4;
    for (int i = 1; i < 4; ++i) {
        for (int j = 0; j < i; ++j) {
            grad[k] = 2.0 * g_mat(i, j).real();
            grad[k + 1] = 2.0 * g_mat(i, j).imag();
            k += 2;
        }
    }
    return grad;
}

MleResult mle_reconstruct(const TomographyRecord& rec, int max_iterations) {
    if (rec.settings.size() != rec.counts.size()) {
        throw std::invalid_argument("mle_reconstruct: settings/counts size mismatch");
    }
    check_informationally_complete(rec.settings);
    for (double c : rec.counts) {
        if (!(c >= 0.0)) {
            throw std::invalid_argument("mle_reconstruct: counts must be nonnegative");
        }
    }

    MleResult result;
    double total = 0.0;
    for (double c : rec.counts) {
        total += c;
    }
    if (total == 0.0) {
        // Zero intensity: the likelihood is maximized by T -> 0 and carries no
        // state information; report the maximally mixed state.
        result.rho = DensityMatrix::maximally_mixed();
        result.converged = true;
        return result;
    }

    // Start from the PSD-projected linear inversion with the intensity folded in.
    Eigen::Matrix4cd rho0;
    try {
        rho0 = linear_inversion(rec);
    } catch (const std::runtime_error&) {
        rho0 = 0.25 * Eigen::Matrix4cd::Identity();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho0);
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(1e-6);
    Eigen::Matrix4cd psd =
        es.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<std::complex<double>>() *
        es.eigenvectors().adjoint();
    psd /= psd.trace().real();

    const auto ops = setting_projectors(rec);
    double prob_sum = 0.0;
    for (const auto& op : ops) {
        prob_sum += (psd * op).trace().real();
    }
    psd *= total / std::max(prob_sum, 1e-12);
    const Eigen::LLT<Eigen::Matrix4cd> llt(psd);
    Eigen::VectorXd x = pack_cholesky(llt.matrixL());

    double f = mle_objective(rec, x);
    Eigen::VectorXd grad = mle_objective_gradient(rec, x);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(kMleParams, kMleParams);
    result.objective_trace.push_back(f);

    int iter = 0;
    bool converged = false;
    for (; iter < max_iterations; ++iter) {
        if (grad.lpNorm<Eigen::Infinity>() < 1e-8) {
            converged = true;
            break;
        }
        Eigen::VectorXd dir = -h_inv * grad;
        if (dir.dot(grad) >= 0.0) {
            h_inv = Eigen::MatrixXd::Identity(kMleParams, kMleParams);
            dir = -grad;
        }
        // Armijo backtracking
        double step = 1.0;
        const double slope = grad.dot(dir);
        double f_new = f;
        Eigen::VectorXd x_new = x;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x + step * dir;
            f_new = mle_objective(rec, x_new);
            if (f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            break;
        }
        const Eigen::VectorXd grad_new = mle_objective_gradient(rec, x_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = grad_new - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const Eigen::VectorXd hy = h_inv * y;
            const double yhy = y.dot(hy);
            h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
                     (hy * s.transpose() + s * hy.transpose()) / sy;
        }
        x = x_new;
        f = f_new;
        grad = grad_new;
        result.objective_trace.push_back(f);
    }

    const Eigen::Matrix4cd t = unpack_cholesky(x);
    Eigen::Matrix4cd rho = t * t.adjoint();
    const double tr = rho.trace().real();
    if (!(tr > 0.0)) {
        result.rho = DensityMatrix::maximally_mixed();
    } else {
        rho /= tr;
        rho = 0.5 * (rho + rho.adjoint()).eval();
        result.rho = DensityMatrix(rho);
    }
    result.converged = converged;
    result.iterations = iter;
    result.log_likelihood = -f;
    return result;
}

double trace_distance(const Eigen::Matrix4cd& a, const Eigen::Matrix4cd& b) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(a - b, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

void write_tomography_csv(const TomographyRecord& rec, std::ostream& out) {
    char buf[80];
    out << "# bfcsim tomography v1\n";
    snprintf(buf, sizeof buf, "# scale=%.17g\n", rec.acquisition_scale);
    out << buf << "setting,count\n";
    for (size_t k = 0; k < rec.settings.size(); ++k) {
        snprintf(buf, sizeof buf, "%s,%.17g\n", rec.settings[k].label().c_str(), rec.counts[k]);
        out << buf;
    }
}

void write_tomography_csv(const TomographyRecord& rec, const std::string& path) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("write_tomography_csv: cannot open " + path);
    }
    write_tomography_csv(rec, f);
}

TomographyRecord read_tomography_csv(std::istream& in) {
    TomographyRecord rec;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos && line.substr(2, eq - 2) == "scale") {
                rec.acquisition_scale = std::strtod(line.c_str() + eq + 1, nullptr);
            }
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma < 2) {
            throw std::runtime_error("read_tomography_csv: malformed row: " + line);
        }
        MeasurementSetting s;
        s.a = polarization_from_letter(line[0]);
        s.b = polarization_from_letter(line[1]);
        rec.settings.push_back(s);
        rec.counts.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
    }
    return rec;
}

TomographyRecord read_tomography_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("read_tomography_csv: cannot open " + path);
    }
    return read_tomography_csv(f);
}

}  // namespace bfc
