#pragma once

#include <functional>

namespace coldplasma {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

/// Adaptive Gauss-Kronrod (15-point) integration of f over [a, b].
QuadratureResult integrate_gk(const std::function<double(double)>& f, double a, double b,
                              double rel_tol = 1e-12, int max_depth = 20);

/// Integral of f(eta)/eta^2 over [eta0, infinity) for a damping law with
/// power-law tail exponent gamma < 1: quadrature up to a matching point
/// plus the analytic power-law remainder. Exact (no quadrature) for pure
/// power laws.
double damping_tail_integral(const std::function<double(double)>& f, double eta0,
                             double tail_gamma, double rel_tol = 1e-12);

}  // namespace coldplasma
