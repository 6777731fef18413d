#include "coldplasma/perturbation.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "coldplasma/affine.hpp"
#include "coldplasma/quadrature.hpp"

namespace coldplasma {

namespace {

// integral_b^b0 a0(beta) f(1-beta)/(1-beta)^3 dbeta under the
// substitution beta = 1 - e^u, which turns the far tail b -> -infinity
// into a logarithmic range and keeps power-law integrands resolved.
double corrector_integral(double C, double b0, const DampingSpec& spec, double b) {
    const double u_lo = std::log(1.0 - b0);
    const double u_hi = std::log(1.0 - b);
    auto integrand = [&](double u) {
        const double eta = std::exp(u);  // 1 - beta
        const double beta = 1.0 - eta;
        const double a0 = unperturbed_branch(beta, C, -1);
        return a0 * spec.f(eta) / (eta * eta);
    };
    return integrate_gk(integrand, u_lo, u_hi, 1e-13).value;
}

}  // namespace

CorrectorCurve corrector_alpha1(double C, double b0, const DampingSpec& spec,
                                std::span<const double> b_grid) {
    if (!(C >= 0.0)) {
        throw std::domain_error("corrector_alpha1: C must be nonnegative");
    }
    if (!(b0 < 1.0)) {
        throw std::domain_error("corrector_alpha1: b0 must be < 1");
    }
    CorrectorCurve curve;
    curve.b0 = b0;
    curve.C = C;
    curve.b_grid.assign(b_grid.begin(), b_grid.end());
    curve.alpha1.reserve(b_grid.size());
    for (double b : b_grid) {
        if (!(b < b0)) {
            throw std::domain_error("corrector_alpha1: grid point " + std::to_string(b) +
                                    " is not below b0");
        }
        const double a0 = unperturbed_branch(b, C, -1);
        if (a0 == 0.0) {
            throw std::domain_error("corrector_alpha1: a0 vanishes at b = " + std::to_string(b));
        }
        const double pref = (1.0 - b) * (1.0 - b) / a0;
        curve.alpha1.push_back(pref * corrector_integral(C, b0, spec, b));
    }
    return curve;
}

double corrector_alpha1_at(double C, double b0, const DampingSpec& spec, double b) {
    const double grid[1] = {b};
    return corrector_alpha1(C, b0, spec, grid).alpha1[0];
}

PersistenceBound blowup_persistence_bound(double C, const DampingSpec& spec, double eta0) {
    if (!(C > 0.0)) {
        throw std::domain_error("blowup_persistence_bound: needs hyperbolic data (C > 0)");
    }
    if (!(eta0 > 0.0)) {
        throw std::domain_error("blowup_persistence_bound: eta0 must be positive");
    }
    if (!spec.tail_gamma()) {
        throw UnsupportedAnalysisError(
            "blowup_persistence_bound: needs a declared power-law tail exponent");
    }

    PersistenceBound out;
    const double gamma = *spec.tail_gamma();
    if (gamma >= 1.0) {
        // infinite damping integral: suppression for every epsilon > 0
        out.integral_divergent = true;
        out.integral = std::numeric_limits<double>::infinity();
        out.epsilon_bound = 0.0;
        out.persists = false;
        return out;
    }
    if (spec.is_power_law()) {
        // integral_eta0^inf nu0 eta^(g-2) deta = nu0 eta0^(g-1) / (1-g)
        out.integral = spec.nu0() * std::pow(eta0, gamma - 1.0) / (1.0 - gamma);
    } else {
        out.integral =
            damping_tail_integral([&](double eta) { return spec.f(eta); }, eta0, gamma);
    }
    out.epsilon_bound = std::sqrt(C) / out.integral;
    out.persists = spec.epsilon() < out.epsilon_bound;
    return out;
}

std::vector<SigmaSample> sigma0_system(double s_start, double s_end, double sigma0_init,
                                       double xi0_init, double C, int branch, double tol,
                                       std::size_t n_samples) {
    if (n_samples < 2) throw std::invalid_argument("sigma0_system: need >= 2 samples");
    bool branch_turn = false;

    auto q0_at = [&](double s) { return unperturbed_branch(s, C, branch); };
    // endpoints must sit on the real locus with q0 != 0
    for (double s : {s_start, s_end}) {
        const double q = q0_at(s);
        if (q == 0.0) {
            throw std::domain_error("sigma0_system: q0 vanishes at s = " + std::to_string(s));
        }
    }

    auto rhs = [&](double s, std::span<const double> y, std::span<double> dy) {
        const double rad = 1.0 - 2.0 * s + C * (1.0 - s) * (1.0 - s);
        if (!(rad > 0.0)) {
            branch_turn = true;
            dy[0] = dy[1] = 0.0;
            return;
        }
        const double q0 = (branch >= 0 ? 1.0 : -1.0) * std::sqrt(rad);
        const double den = (1.0 - s) * q0;
        const double sigma = y[0], xi = y[1];
        dy[0] = ((1.0 - s) * xi - sigma * q0) / den;
        dy[1] = -(2.0 * q0 * xi + sigma) / den;
    };

    Trace trace;
    std::vector<double> y{sigma0_init, xi0_init};
    {
        std::vector<double> dy0(2);
        rhs(s_start, y, std::span<double>(dy0));
        trace.push(s_start, y, dy0, 0.0);
    }
    OdeOptions ode;
    ode.rel_tol = tol;
    ode.abs_tol = tol;
    auto observer = [&](double s, std::span<const double> yy, std::span<const double> dyy,
                        double h) { trace.push(s, yy, dyy, h); };
    auto halt = [&](double, std::span<const double>) { return branch_turn; };
    const auto stats = integrate_adaptive(rhs, y, s_start, s_end, ode, observer, halt);
    if (branch_turn || stats.reason != StopReason::ReachedEnd) {
        throw IntegrationError("sigma0_system: q0 branch turning inside the s range");
    }

    std::vector<SigmaSample> samples;
    samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double s =
            s_start + (s_end - s_start) * static_cast<double>(i) / (n_samples - 1);
        samples.push_back({s, trace.value_at(s, 0), trace.value_at(s, 1)});
    }
    return samples;
}

SigmaZeroFit fit_sigma0(std::span<const SigmaSample> samples, double C, int branch) {
    if (samples.size() < 3) {
        throw std::invalid_argument("fit_sigma0: need at least 3 samples");
    }
    auto basis1 = [](double s) { return (s - 1.0) * s; };
    auto basis2 = [&](double s) { return (s - 1.0) * unperturbed_branch(s, C, branch); };

    double scale = 0.0;
    for (const auto& smp : samples) scale = std::max(scale, std::abs(smp.sigma0));

    SigmaZeroFit fit;
    if (scale == 0.0) return fit;  // zero solution

    const auto& A = samples.front();
    const auto& B = samples.back();
    const double m11 = basis1(A.s), m12 = basis2(A.s);
    const double m21 = basis1(B.s), m22 = basis2(B.s);
    const double det = m11 * m22 - m12 * m21;
    const double det_scale = std::max({std::abs(m11 * m22), std::abs(m12 * m21), 1e-300});
    if (std::abs(det) < 1e-12 * det_scale) {
        throw std::runtime_error("fit_sigma0: degenerate sample placement (singular system)");
    }
    fit.C1 = (A.sigma0 * m22 - m12 * B.sigma0) / det;
    fit.C2 = (m11 * B.sigma0 - A.sigma0 * m21) / det;

    for (std::size_t i = 1; i + 1 < samples.size(); ++i) {
        const double pred = fit.C1 * basis1(samples[i].s) + fit.C2 * basis2(samples[i].s);
        fit.residual = std::max(fit.residual, std::abs(pred - samples[i].sigma0) / scale);
    }
    return fit;
}

}  // namespace coldplasma
