#include "coldplasma/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <stdexcept>

namespace coldplasma {

QuadratureResult integrate_gk(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, int max_depth) {
    using boost::math::quadrature::gauss_kronrod;
    QuadratureResult r;
    if (a == b) return r;
    double err = 0.0;
    r.value = gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol, &err);
    r.error_estimate = err;
    return r;
}

double damping_tail_integral(const std::function<double(double)>& f, double eta0,
                             double tail_gamma, double rel_tol) {
    if (!(eta0 > 0.0)) throw std::domain_error("damping_tail_integral: eta0 must be positive");
    if (!(tail_gamma < 1.0)) {
        throw std::domain_error("damping_tail_integral: divergent for tail exponent >= 1");
    }
    // Finite head by quadrature, power-law remainder past the matching
    // point: integral_H^inf f(H) (eta/H)^g eta^-2 deta = f(H) / (H (1-g)).
    const double H = std::max(1e8, 1e4 * eta0);
    auto integrand = [&](double eta) { return f(eta) / (eta * eta); };
    const double head = integrate_gk(integrand, eta0, H, rel_tol).value;
    const double tail = f(H) / (H * (1.0 - tail_gamma));
    return head + tail;
}

}  // namespace coldplasma
