#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace bfc {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  // estimate reported by the rule
};

class QuadratureError : public std::runtime_error {
  public:
    QuadratureError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_tolerance(achieved) {}
    double achieved_tolerance;
};

// Adaptive Gauss-Kronrod on [a, b]; infinite endpoints are allowed.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-10,
                                    int max_depth = 30) {
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        std::forward<F>(f), a, b, max_depth, rel_tol, &err);
    return {v, err};
}

// Same rule with 31 Kronrod points; used to cross-check convergence where a
// single error estimate is too pessimistic to act on.
template <class F>
QuadratureResult integrate_adaptive_31(F&& f, double a, double b, double rel_tol = 1e-10,
                                       int max_depth = 20) {
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        std::forward<F>(f), a, b, max_depth, rel_tol, &err);
    return {v, err};
}

enum class GkRule { k15, k31 };

template <class F>
QuadratureResult integrate_rule(GkRule rule, F&& f, double a, double b, double rel_tol,
                                int max_depth) {
    return rule == GkRule::k15
               ? integrate_adaptive(std::forward<F>(f), a, b, rel_tol, max_depth)
               : integrate_adaptive_31(std::forward<F>(f), a, b, rel_tol, max_depth);
}

}  // namespace bfc
