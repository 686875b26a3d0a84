#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bfc/histogram.hpp"

namespace bfc {

enum class FitModelKind { cross_single, cross_multi, cross_sum, auto_single };

FitModelKind fit_model_from_name(const std::string& name);
const char* fit_model_name(FitModelKind kind);

// Parameter names accepted by each model. 'sigma' must always be fixed (the
// detector jitter is measured independently and only the remaining parameters
// carry analytic Jacobians). 'gamma_i' may be fixed to +inf to select the
// singly resonant reduced model.
std::vector<std::string> fit_model_parameters(FitModelKind kind);

struct Bounds {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct FitProblem {
    Histogram histogram;
    FitModelKind model = FitModelKind::cross_sum;
    std::map<std::string, double> initial;  // free parameters with start values
    std::map<std::string, Bounds> bounds;   // optional per free parameter
    std::map<std::string, double> fixed;
    int max_iterations = 500;

    void validate() const;
};

struct FitResult {
    std::vector<std::string> param_names;  // free parameters, fit order
    std::map<std::string, double> estimates;
    std::map<std::string, double> fixed;
    Eigen::MatrixXd covariance;   // damped normal-equations inverse at the optimum
    double reduced_chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> sse_trace;  // objective after each accepted step

    double estimate(const std::string& name) const;
    // Free estimate if present, else fixed value; throws naming the parameter.
    double value(const std::string& name) const;
};

class SingularJacobianError : public std::runtime_error {
  public:
    SingularJacobianError(const std::string& what, std::string a, std::string b)
        : std::runtime_error(what), param_a(std::move(a)), param_b(std::move(b)) {}
    std::string param_a;
    std::string param_b;
};

// Weighted least squares (weights 1/max(N,1)) by damped Gauss-Newton with
// analytic Jacobians; the objective never increases across accepted steps.
FitResult fit(const FitProblem& problem);

// Model expectation per bin at the given parameter values (for overlays).
std::vector<double> fit_model_curve(const FitProblem& problem,
                                    const std::map<std::string, double>& params);

struct CavityReport {
    double fwhm_hz = 0.0;
    double fsr_hz = 0.0;
    double finesse = 0.0;
    double q_factor = 0.0;
    double wavelength_nm = 0.0;
};

CavityReport make_cavity_report(double fwhm_hz, double fsr_hz, double wavelength_nm);

// fwhm = gamma_s/pi and fsr = 1/T0 from the fit estimates; an fsr_hint
// substitutes for T0 in models without it (NaN = not provided).
CavityReport derive_cavity_report(const FitResult& fit, double wavelength_nm,
                                  double fsr_hint_hz = std::numeric_limits<double>::quiet_NaN());

// Poisson-resamples each bin around the observed counts, refits from the
// original optimum, and reports per-parameter sample standard deviations.
std::map<std::string, double> bootstrap_errors(const FitProblem& problem, int n_resamples,
                                               uint64_t seed);

// Initial-guess heuristics (overridable by the caller).
double estimate_t0_from_beat(const Histogram& h);        // periodogram peak
double estimate_gamma_s_from_tail(const Histogram& h);   // log-slope of the tau<0 tail
double estimate_background(const Histogram& h);          // outer-bin mean

// Plain-text fit report (named estimates, covariance, chi2, provenance).
std::string format_fit_report(const FitProblem& problem, const FitResult& result);

}  // namespace bfc
