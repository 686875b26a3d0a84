#include "bfc/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "bfc/rng.hpp"

namespace bfc {

namespace {

constexpr double kGl5Node[5] = {-0.906179845938663992797626878299,
                                -0.538469310105683091036314420700, 0.0,
                                0.538469310105683091036314420700,
                                0.906179845938663992797626878299};
constexpr double kGl5Weight[5] = {0.236926885056189087514264040720,
                                  0.478628670499366468041291514836,
                                  0.568888888888888888888888888889,
                                  0.478628670499366468041291514836,
                                  0.236926885056189087514264040720};

enum ParamId { kGammaS = 0, kGammaI, kSigma, kT0, kP, kAmplitude, kBackground, kParamCount };

const char* kParamNames[kParamCount] = {"gamma_s", "gamma_i", "sigma", "t0",
                                        "p",       "amplitude", "background"};

int param_id(const std::string& name) {
    for (int i = 0; i < kParamCount; ++i) {
        if (name == kParamNames[i]) {
            return i;
        }
    }
    throw std::invalid_argument("fit: unknown parameter name '" + name + "'");
}

struct Params {
    double value[kParamCount] = {0, 0, 0, 0, 1, 1, 0};

    Linewidths linewidths() const {
        Linewidths lw;
        lw.gamma_s = value[kGammaS];
        lw.idler_unconfined = std::isinf(value[kGammaI]);
        lw.gamma_i = lw.idler_unconfined ? 0.0 : value[kGammaI];
        return lw;
    }
};

std::vector<int> model_param_ids(FitModelKind kind) {
    switch (kind) {
        case FitModelKind::cross_single:
            return {kGammaS, kGammaI, kSigma, kAmplitude, kBackground};
        case FitModelKind::cross_multi:
            return {kGammaS, kGammaI, kSigma, kT0, kAmplitude, kBackground};
        case FitModelKind::cross_sum:
            return {kGammaS, kGammaI, kSigma, kT0, kP, kAmplitude, kBackground};
        case FitModelKind::auto_single:
            return {kGammaS, kGammaI, kSigma, kAmplitude, kBackground};
    }
    throw std::logic_error("fit: unknown model kind");
}

// Shape density and its partial derivatives wrt the shape parameters at one
// delay. The amplitude/background mapping is applied by the caller.
struct ShapeEval {
    double value = 0.0;
    double d_gamma_s = 0.0;
    double d_gamma_i = 0.0;
    double d_t0 = 0.0;
    double d_p = 0.0;
};

ShapeEval eval_shape(FitModelKind kind, const Params& par, double tau, bool want_gs,
                     bool want_gi, bool want_t0, bool want_p) {
    const Linewidths lw = par.linewidths();
    const double sigma = par.value[kSigma];
    ShapeEval out;
    switch (kind) {
        case FitModelKind::cross_single: {
            out.value = cross_single(lw, sigma, tau);
            if (want_gs) out.d_gamma_s = cross_single_dgamma_s(lw, sigma, tau);
            if (want_gi) out.d_gamma_i = cross_single_dgamma_i(lw, sigma, tau);
            return out;
        }
        case FitModelKind::cross_multi: {
            const double t0 = par.value[kT0];
            const int j_max = default_j_max(lw, t0);
            out.value = cross_multi(lw, sigma, tau, t0, j_max);
            if (want_gs) out.d_gamma_s = cross_multi_dgamma_s(lw, sigma, tau, t0, j_max);
            if (want_gi) out.d_gamma_i = cross_multi_dgamma_i(lw, sigma, tau, t0, j_max);
            if (want_t0) out.d_t0 = cross_multi_dt0(lw, sigma, tau, t0, j_max);
            return out;
        }
        case FitModelKind::cross_sum: {
            const double t0 = par.value[kT0];
            const double p = par.value[kP];
            const int j_max = default_j_max(lw, t0);
            const CrossPrefactors pre = cross_norm_prefactors(lw, t0);
            const double v = cross_multi(lw, sigma, tau, t0, j_max);
            const double s = cross_single(lw, sigma, tau);
            out.value = p * pre.multi * v + (1.0 - p) * pre.single * s;
            if (want_p) out.d_p = pre.multi * v - pre.single * s;
            if (want_gs) {
                const CrossPrefactors dpre = cross_norm_prefactors_dgamma_s(lw, t0);
                out.d_gamma_s =
                    p * (dpre.multi * v + pre.multi * cross_multi_dgamma_s(lw, sigma, tau, t0, j_max)) +
                    (1.0 - p) * (dpre.single * s + pre.single * cross_single_dgamma_s(lw, sigma, tau));
            }
            if (want_gi) {
                const CrossPrefactors dpre = cross_norm_prefactors_dgamma_i(lw, t0);
                out.d_gamma_i =
                    p * (dpre.multi * v + pre.multi * cross_multi_dgamma_i(lw, sigma, tau, t0, j_max)) +
                    (1.0 - p) * (dpre.single * s + pre.single * cross_single_dgamma_i(lw, sigma, tau));
            }
            if (want_t0) {
                out.d_t0 = p * (cross_prefactor_multi_dt0(lw, t0) * v +
                                pre.multi * cross_multi_dt0(lw, sigma, tau, t0, j_max));
            }
            return out;
        }
        case FitModelKind::auto_single: {
            out.value = 1.0 + g2_auto_excess_conv(lw, sigma, tau);
            if (want_gs) out.d_gamma_s = g2_auto_excess_conv_dgamma_s(lw, sigma, tau);
            if (want_gi) out.d_gamma_i = g2_auto_excess_conv_dgamma_i(lw, sigma, tau);
            return out;
        }
    }
    throw std::logic_error("fit: unknown model kind");
}

// For auto_single the "shape" is a normalized rate (bin mean); for the cross
// models it is a density (bin integral).
bool model_uses_bin_mean(FitModelKind kind) { return kind == FitModelKind::auto_single; }

struct BinEval {
    double model = 0.0;
    // partial of the model counts per free parameter, fit order
    Eigen::VectorXd jac;
};

class ModelEngine {
  public:
    ModelEngine(const FitProblem& problem) : problem_(problem) {
        free_ids_.reserve(problem.initial.size());
        for (const auto& [name, v] : problem.initial) {
            free_ids_.push_back(param_id(name));
        }
        std::sort(free_ids_.begin(), free_ids_.end());
        for (int id : free_ids_) {
            free_names_.push_back(kParamNames[id]);
        }
        for (const auto& [name, v] : problem.fixed) {
            base_.value[param_id(name)] = v;
        }
        want_gs_ = has_free(kGammaS);
        want_gi_ = has_free(kGammaI);
        want_t0_ = has_free(kT0);
        want_p_ = has_free(kP);
    }

    bool has_free(int id) const {
        return std::find(free_ids_.begin(), free_ids_.end(), id) != free_ids_.end();
    }
    const std::vector<int>& free_ids() const { return free_ids_; }
    const std::vector<std::string>& free_names() const { return free_names_; }

    Params assemble(const Eigen::VectorXd& theta) const {
        Params par = base_;
        for (size_t k = 0; k < free_ids_.size(); ++k) {
            par.value[free_ids_[k]] = theta[k];
        }
        return par;
    }

    // Model counts and Jacobian row for one bin.
    BinEval eval_bin(const Params& par, double lo, double hi) const {
        const double mid = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo);
        ShapeEval acc;
        for (int i = 0; i < 5; ++i) {
            const ShapeEval e = eval_shape(problem_.model, par, mid + half * kGl5Node[i],
                                           want_gs_, want_gi_, want_t0_, want_p_);
            acc.value += kGl5Weight[i] * e.value;
            acc.d_gamma_s += kGl5Weight[i] * e.d_gamma_s;
            acc.d_gamma_i += kGl5Weight[i] * e.d_gamma_i;
            acc.d_t0 += kGl5Weight[i] * e.d_t0;
            acc.d_p += kGl5Weight[i] * e.d_p;
        }
        const double scale = model_uses_bin_mean(problem_.model) ? 0.5 : half;
        acc.value *= scale;
        acc.d_gamma_s *= scale;
        acc.d_gamma_i *= scale;
        acc.d_t0 *= scale;
        acc.d_p *= scale;

        const double amp = par.value[kAmplitude];
        BinEval out;
        out.model = amp * acc.value + par.value[kBackground];
        out.jac.resize(static_cast<int>(free_ids_.size()));
        for (size_t k = 0; k < free_ids_.size(); ++k) {
            switch (free_ids_[k]) {
                case kGammaS: out.jac[k] = amp * acc.d_gamma_s; break;
                case kGammaI: out.jac[k] = amp * acc.d_gamma_i; break;
                case kT0: out.jac[k] = amp * acc.d_t0; break;
                case kP: out.jac[k] = amp * acc.d_p; break;
                case kAmplitude: out.jac[k] = acc.value; break;
                case kBackground: out.jac[k] = 1.0; break;
                default:
                    throw std::logic_error("fit: sigma cannot be a free parameter");
            }
        }
        return out;
    }

  private:
    const FitProblem& problem_;
    Params base_;
    std::vector<int> free_ids_;
    std::vector<std::string> free_names_;
    bool want_gs_ = false, want_gi_ = false, want_t0_ = false, want_p_ = false;
};

}  // namespace

FitModelKind fit_model_from_name(const std::string& name) {
    if (name == "cross_single") return FitModelKind::cross_single;
    if (name == "cross_multi") return FitModelKind::cross_multi;
    if (name == "cross_sum") return FitModelKind::cross_sum;
    if (name == "auto_single") return FitModelKind::auto_single;
    throw std::invalid_argument("fit: unknown model name '" + name + "'");
}

const char* fit_model_name(FitModelKind kind) {
    switch (kind) {
        case FitModelKind::cross_single: return "cross_single";
        case FitModelKind::cross_multi: return "cross_multi";
        case FitModelKind::cross_sum: return "cross_sum";
        case FitModelKind::auto_single: return "auto_single";
    }
    return "unknown";
}

std::vector<std::string> fit_model_parameters(FitModelKind kind) {
    std::vector<std::string> names;
    for (int id : model_param_ids(kind)) {
        names.push_back(kParamNames[id]);
    }
    return names;
}

void FitProblem::validate() const {
    const std::vector<std::string> expected = fit_model_parameters(model);
    std::set<std::string> expected_set(expected.begin(), expected.end());
    std::set<std::string> seen;
    for (const auto& [name, v] : initial) {
        if (!expected_set.count(name)) {
            throw std::invalid_argument("fit: parameter '" + name + "' not part of model " +
                                        fit_model_name(model));
        }
        if (!seen.insert(name).second) {
            throw std::invalid_argument("fit: duplicate parameter '" + name + "'");
        }
    }
    for (const auto& [name, v] : fixed) {
        if (!expected_set.count(name)) {
            throw std::invalid_argument("fit: parameter '" + name + "' not part of model " +
                                        fit_model_name(model));
        }
        if (!seen.insert(name).second) {
            throw std::invalid_argument("fit: parameter '" + name + "' is both free and fixed");
        }
    }
    if (seen.size() != expected_set.size()) {
        for (const auto& name : expected) {
            if (!seen.count(name)) {
                throw std::invalid_argument("fit: parameter '" + name + "' missing (free or fixed)");
            }
        }
    }
    if (initial.count("sigma")) {
        throw std::invalid_argument("fit: sigma must be fixed (measured detector property)");
    }
    if (initial.count("gamma_i") && !std::isfinite(initial.at("gamma_i"))) {
        throw std::invalid_argument("fit: a free gamma_i must start finite");
    }
    for (const auto& [name, bb] : bounds) {
        if (!initial.count(name)) {
            throw std::invalid_argument("fit: bounds given for non-free parameter '" + name + "'");
        }
        const double x = initial.at(name);
        if (!(x >= bb.lo && x <= bb.hi)) {
            throw std::invalid_argument("fit: initial guess for '" + name + "' outside bounds");
        }
    }
    const int n_free = static_cast<int>(initial.size());
    if (n_free == 0) {
        throw std::invalid_argument("fit: no free parameters");
    }
    if (histogram.n_bins() < 5 * n_free) {
        throw std::invalid_argument("fit: need at least 5x more bins than free parameters");
    }
}

double FitResult::estimate(const std::string& name) const {
    auto it = estimates.find(name);
    if (it == estimates.end()) {
        throw std::invalid_argument("FitResult: no estimate for parameter '" + name + "'");
    }
    return it->second;
}

double FitResult::value(const std::string& name) const {
    auto it = estimates.find(name);
    if (it != estimates.end()) {
        return it->second;
    }
    auto fx = fixed.find(name);
    if (fx != fixed.end()) {
        return fx->second;
    }
    throw std::invalid_argument("FitResult: missing parameter '" + name + "'");
}

namespace {

Eigen::VectorXd clamp_to_bounds(const Eigen::VectorXd& theta, const FitProblem& problem,
                                const std::vector<std::string>& names) {
    Eigen::VectorXd out = theta;
    for (int k = 0; k < out.size(); ++k) {
        auto it = problem.bounds.find(names[k]);
        if (it != problem.bounds.end()) {
            out[k] = std::clamp(out[k], it->second.lo, it->second.hi);
        }
    }
    return out;
}

struct Linearization {
    Eigen::VectorXd residual;  // weighted
    Eigen::MatrixXd jacobian;  // weighted
    double sse = 0.0;
};

// Pearson-style weighting: the Poisson variance is taken from the model
// expectation rather than the observed count (floored at 1). Observed-count
// weights bias decay rates upward by a few percent at these count levels
// because downward fluctuations get overweighted; model weights are bias-free
// to O(1/N^2). The residual r = (m - N)/sqrt(max(m,1)) depends on the model
// through the weight as well, so its exact Jacobian carries the multiplier
// (m + N)/(2 m^{3/2}) instead of the naive 1/sqrt(m).
Linearization linearize(const ModelEngine& engine, const FitProblem& problem,
                        const Eigen::VectorXd& theta, bool with_jacobian) {
    const Histogram& h = problem.histogram;
    const int n = h.n_bins();
    const int p = static_cast<int>(theta.size());
    Linearization lin;
    lin.residual.resize(n);
    if (with_jacobian) {
        lin.jacobian.resize(n, p);
    }
    const Params par = engine.assemble(theta);
    for (int b = 0; b < n; ++b) {
        const BinEval e = engine.eval_bin(par, h.edge(b), h.edge(b + 1));
        double mult;
        if (e.model > 1.0) {
            const double root = std::sqrt(e.model);
            lin.residual[b] = (e.model - h.counts[b]) / root;
            mult = (e.model + h.counts[b]) / (2.0 * e.model * root);
        } else {
            lin.residual[b] = e.model - h.counts[b];
            mult = 1.0;
        }
        if (with_jacobian) {
            lin.jacobian.row(b) = (e.jac * mult).transpose();
        }
    }
    lin.sse = lin.residual.squaredNorm();
    return lin;
}

void check_initial_jacobian(const Eigen::MatrixXd& jac, const std::vector<std::string>& names) {
    const int p = static_cast<int>(jac.cols());
    Eigen::VectorXd norms(p);
    for (int k = 0; k < p; ++k) {
        norms[k] = jac.col(k).norm();
        // Columns carry the parameters' own units, so only an identically
        // vanishing column is evidence of a dead parameter.
        if (norms[k] == 0.0) {
            throw SingularJacobianError(
                "fit: singular Jacobian, parameter '" + names[k] +
                    "' has no effect at the initial guess",
                names[k], names[k]);
        }
    }
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            const double corr = std::fabs(jac.col(i).dot(jac.col(j))) / (norms[i] * norms[j]);
            if (corr > 1.0 - 1e-8) {
                throw SingularJacobianError("fit: singular Jacobian, parameters '" + names[i] +
                                                "' and '" + names[j] + "' are degenerate",
                                            names[i], names[j]);
            }
        }
    }
}

}  // namespace

FitResult fit(const FitProblem& problem) {
    problem.validate();
    ModelEngine engine(problem);
    const std::vector<std::string>& names = engine.free_names();
    const int p = static_cast<int>(names.size());

    Eigen::VectorXd theta(p);
    for (int k = 0; k < p; ++k) {
        theta[k] = problem.initial.at(names[k]);
    }

    Linearization lin = linearize(engine, problem, theta, true);
    check_initial_jacobian(lin.jacobian, names);

    FitResult result;
    result.param_names = names;
    result.fixed = problem.fixed;
    result.sse_trace.push_back(lin.sse);

    double lambda = 1e-3;
    double nu = 2.0;
    bool converged = false;
    int iter = 0;
    for (; iter < problem.max_iterations && !converged; ++iter) {
        // Parameters carry wildly different units; solve in column-normalized
        // variables (More's scaling) so the normal equations stay conditioned.
        Eigen::VectorXd scale(p);
        for (int k = 0; k < p; ++k) {
            scale[k] = lin.jacobian.col(k).norm();
            if (scale[k] <= 0.0) {
                scale[k] = 1.0;
            }
        }
        const Eigen::MatrixXd jac_scaled = lin.jacobian * scale.cwiseInverse().asDiagonal();
        const Eigen::MatrixXd h_mat = jac_scaled.transpose() * jac_scaled;
        const Eigen::VectorXd g = jac_scaled.transpose() * lin.residual;
        Eigen::MatrixXd damped = h_mat;
        for (int k = 0; k < p; ++k) {
            damped(k, k) += lambda * std::max(h_mat(k, k), 1e-300);
        }
        const Eigen::VectorXd step_scaled = damped.ldlt().solve(-g);
        const Eigen::VectorXd step = scale.cwiseInverse().asDiagonal() * step_scaled;
        const Eigen::VectorXd trial = clamp_to_bounds(theta + step, problem, names);
        Linearization trial_lin = linearize(engine, problem, trial, true);

        if (trial_lin.sse <= lin.sse) {
            const Eigen::VectorXd applied = trial - theta;
            double rel_step = 0.0;
            for (int k = 0; k < p; ++k) {
                rel_step = std::max(rel_step,
                                    std::fabs(applied[k]) / std::max(std::fabs(theta[k]), 1e-300));
            }
            const double rel_drop = (lin.sse - trial_lin.sse) / std::max(lin.sse, 1e-300);
            // Nielsen's gain-ratio damping update: shrink hard after steps
            // that track the quadratic model, so the solver cannot settle
            // into an accept/reject limit cycle.
            const double predicted =
                step_scaled.dot(lambda * step_scaled - g);
            const double gain = predicted > 0.0 ? (lin.sse - trial_lin.sse) / predicted : 1.0;
            const double shrink = 1.0 - std::pow(2.0 * gain - 1.0, 3);
            lambda = std::max(1e-14, lambda * std::max(1.0 / 3.0, shrink));
            nu = 2.0;
            theta = trial;
            lin = std::move(trial_lin);
            result.sse_trace.push_back(lin.sse);
            if (rel_step < 1e-8 || rel_drop < 1e-10) {
                converged = true;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            if (lambda > 1e15) {
                break;
            }
        }
    }

    result.iterations = iter;
    result.converged = converged;
    for (int k = 0; k < p; ++k) {
        result.estimates[names[k]] = theta[k];
    }

    // Damped normal-equations inverse at the optimum, assembled through the
    // same column scaling used for the steps.
    Eigen::VectorXd scale(p);
    for (int k = 0; k < p; ++k) {
        scale[k] = lin.jacobian.col(k).norm();
        if (scale[k] <= 0.0) {
            scale[k] = 1.0;
        }
    }
    const Eigen::MatrixXd jac_scaled = lin.jacobian * scale.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd h_mat = jac_scaled.transpose() * jac_scaled;
    Eigen::MatrixXd damped = h_mat;
    for (int k = 0; k < p; ++k) {
        damped(k, k) += lambda * std::max(h_mat(k, k), 1e-300);
    }
    Eigen::MatrixXd cov_scaled = damped.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd cov = scale.cwiseInverse().asDiagonal() * cov_scaled *
                          scale.cwiseInverse().asDiagonal();
    result.covariance = 0.5 * (cov + cov.transpose());
    const int dof = std::max(1, problem.histogram.n_bins() - p);
    result.reduced_chi2 = lin.sse / dof;
    return result;
}

std::vector<double> fit_model_curve(const FitProblem& problem,
                                    const std::map<std::string, double>& params) {
    FitProblem scratch = problem;
    scratch.initial.clear();
    scratch.fixed.clear();
    for (const auto& name : fit_model_parameters(problem.model)) {
        scratch.fixed[name] = params.at(name);
    }
    ModelEngine engine(scratch);
    Params par = engine.assemble(Eigen::VectorXd());
    const Histogram& h = problem.histogram;
    std::vector<double> curve(h.n_bins());
    for (int b = 0; b < h.n_bins(); ++b) {
        curve[b] = engine.eval_bin(par, h.edge(b), h.edge(b + 1)).model;
    }
    return curve;
}

CavityReport make_cavity_report(double fwhm_hz, double fsr_hz, double wavelength_nm) {
    if (!(fwhm_hz > 0.0) || !(fsr_hz > 0.0) || !(wavelength_nm > 0.0)) {
        throw std::invalid_argument("CavityReport: fwhm, fsr and wavelength must be positive");
    }
    CavityReport r;
    r.fwhm_hz = fwhm_hz;
    r.fsr_hz = fsr_hz;
    r.wavelength_nm = wavelength_nm;
    r.finesse = fsr_hz / fwhm_hz;
    r.q_factor = frequency_from_nm(wavelength_nm) / fwhm_hz;
    return r;
}

CavityReport derive_cavity_report(const FitResult& fit, double wavelength_nm,
                                  double fsr_hint_hz) {
    if (!fit.converged) {
        throw std::runtime_error("derive_cavity_report: fit did not converge");
    }
    double gamma_s;
    try {
        gamma_s = fit.value("gamma_s");
    } catch (const std::invalid_argument&) {
        throw std::runtime_error("derive_cavity_report: missing parameter gamma_s");
    }
    double fsr_hz;
    if (fit.estimates.count("t0") || fit.fixed.count("t0")) {
        fsr_hz = 1.0 / fit.value("t0");
    } else if (std::isfinite(fsr_hint_hz)) {
        fsr_hz = fsr_hint_hz;
    } else {
        throw std::runtime_error("derive_cavity_report: missing parameter t0 (and no fsr hint)");
    }
    return make_cavity_report(gamma_s / kPi, fsr_hz, wavelength_nm);
}

std::map<std::string, double> bootstrap_errors(const FitProblem& problem, int n_resamples,
                                               uint64_t seed) {
    if (n_resamples < 50) {
        throw std::invalid_argument("bootstrap_errors: need at least 50 resamples");
    }
    const FitResult base = fit(problem);
    if (!base.converged) {
        throw std::runtime_error("bootstrap_errors: base fit did not converge");
    }

    std::map<std::string, std::vector<double>> samples;
    int failures = 0;
    for (int k = 0; k < n_resamples; ++k) {
        FitProblem resampled = problem;
        CounterRng rng(seed, static_cast<uint64_t>(k));
        for (auto& c : resampled.histogram.counts) {
            c = poisson_sample(c, rng);
        }
        resampled.initial = base.estimates;
        // A bound may exclude a resampled start; clamp back in.
        for (auto& [name, v] : resampled.initial) {
            auto it = problem.bounds.find(name);
            if (it != problem.bounds.end()) {
                v = std::clamp(v, it->second.lo, it->second.hi);
            }
        }
        try {
            const FitResult r = fit(resampled);
            if (!r.converged) {
                ++failures;
                continue;
            }
            for (const auto& [name, v] : r.estimates) {
                samples[name].push_back(v);
            }
        } catch (const std::exception&) {
            ++failures;
        }
    }
    if (failures * 5 > n_resamples) {
        throw std::runtime_error("bootstrap_errors: more than 20% of refits failed to converge");
    }

    std::map<std::string, double> stddev;
    for (const auto& [name, xs] : samples) {
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - mean) * (x - mean);
        }
        stddev[name] = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0;
    }
    return stddev;
}

double estimate_background(const Histogram& h) {
    const int n = h.n_bins();
    const int n_out = std::max(1, n / 20);
    double acc = 0.0;
    for (int b = 0; b < n_out; ++b) {
        acc += h.counts[b] + h.counts[n - 1 - b];
    }
    return acc / (2.0 * n_out);
}

double estimate_t0_from_beat(const Histogram& h) {
    const int n = h.n_bins();
    const double w = h.bin_width_s;
    const double window = n * w;
    const double mean = h.total() / n;

    const double f_lo = 2.0 / window;
    const double f_hi = 0.25 / w;
    const int n_freq = 4 * n / 2;
    const double df = (f_hi - f_lo) / n_freq;

    double best_f = f_lo;
    double best_p = -1.0;
    for (int k = 0; k <= n_freq; ++k) {
        const double f = f_lo + k * df;
        std::complex<double> acc(0.0, 0.0);
        for (int b = 0; b < n; ++b) {
            const double phase = -kTwoPi * f * h.center(b);
            acc += (h.counts[b] - mean) * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        const double p = std::norm(acc);
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    return 1.0 / best_f;
}

double estimate_gamma_s_from_tail(const Histogram& h) {
    const double bg = estimate_background(h);
    const int n = h.n_bins();
    double peak = 0.0;
    for (int b = 0; b < n; ++b) {
        peak = std::max(peak, h.counts[b]);
    }
    const double floor_counts = std::max(bg + 9.0, 0.002 * (peak - bg) + bg);

    // ln(N - bg) is linear with slope 2 gamma_s on the tau < 0 tail.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (int b = 0; b < n; ++b) {
        const double tau = h.center(b);
        if (tau >= -h.bin_width_s) {
            continue;
        }
        if (h.counts[b] <= floor_counts) {
            continue;
        }
        const double y = std::log(h.counts[b] - bg);
        sx += tau;
        sy += y;
        sxx += tau * tau;
        sxy += tau * y;
        ++m;
    }
    if (m < 3) {
        throw std::runtime_error("estimate_gamma_s_from_tail: too few tail bins above background");
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    if (!(slope > 0.0)) {
        throw std::runtime_error("estimate_gamma_s_from_tail: tail slope is not positive");
    }
    return 0.5 * slope;
}

std::string format_fit_report(const FitProblem& problem, const FitResult& result) {
    std::ostringstream os;
    char buf[128];
    os << "# bfcsim fit report v1\n";
    os << "model=" << fit_model_name(problem.model) << "\n";
    os << "histogram.kind=" << (problem.histogram.kind == HistogramKind::cross ? "cross" : "auto")
       << "\n";
    os << "histogram.seed=" << problem.histogram.seed << "\n";
    os << "histogram.bins=" << problem.histogram.n_bins() << "\n";
    os << "converged=" << (result.converged ? "yes" : "no") << "\n";
    os << "iterations=" << result.iterations << "\n";
    snprintf(buf, sizeof buf, "reduced_chi2=%.17g\n", result.reduced_chi2);
    os << buf;
    for (size_t k = 0; k < result.param_names.size(); ++k) {
        const auto& name = result.param_names[k];
        snprintf(buf, sizeof buf, "estimate.%s=%.17g\n", name.c_str(),
                 result.estimates.at(name));
        os << buf;
        snprintf(buf, sizeof buf, "stddev.%s=%.17g\n", name.c_str(),
                 std::sqrt(std::max(0.0, result.covariance(k, k))));
        os << buf;
    }
    for (const auto& [name, v] : result.fixed) {
        snprintf(buf, sizeof buf, "fixed.%s=%.17g\n", name.c_str(), v);
        os << buf;
    }
    os << "covariance.order=";
    for (size_t k = 0; k < result.param_names.size(); ++k) {
        os << (k ? "," : "") << result.param_names[k];
    }
    os << "\n";
    for (int i = 0; i < result.covariance.rows(); ++i) {
        os << "covariance.row=";
        for (int j = 0; j < result.covariance.cols(); ++j) {
            snprintf(buf, sizeof buf, "%s%.17g", j ? "," : "", result.covariance(i, j));
            os << buf;
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace bfc
