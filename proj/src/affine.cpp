#include "coldplasma/affine.hpp"

#include <cmath>
#include <string>

namespace coldplasma {

ConicClass conic_constant(double a0, double b0, double tol) {
    if (!(b0 < 1.0)) {
        throw std::domain_error("conic_constant: b0 must be < 1 (density 1-b0 positive)");
    }
    // single expression, no intermediate rounding of the numerator
    const double C = (a0 * a0 + 2.0 * b0 - 1.0) / ((1.0 - b0) * (1.0 - b0));
    ConicClass c;
    c.C = C;
    c.kind = (std::abs(C) <= tol) ? ConicKind::Parabola
                                  : (C < 0.0 ? ConicKind::Ellipse : ConicKind::Hyperbola);
    return c;
}

double unperturbed_branch(double b, double C, int sign) {
    const double rad = 1.0 - 2.0 * b + C * (1.0 - b) * (1.0 - b);
    if (rad < 0.0) {
        throw std::domain_error("unperturbed_branch: negative radicand at b = " +
                                std::to_string(b) + " (off the conic)");
    }
    return (sign >= 0 ? 1.0 : -1.0) * std::sqrt(rad);
}

SimOutcome integrate_affine(const AffineState& init, const DampingSpec& spec, double t_end,
                            double tol, const AffineOptions& opt) {
    if (!(init.b < 1.0)) {
        throw std::domain_error("integrate_affine: init.b must be < 1");
    }
    if (!(tol > 0.0 && tol <= 1e-3)) {
        throw std::invalid_argument("integrate_affine: tol must lie in (0, 1e-3]");
    }

    const double eps = spec.epsilon();
    const double a_sign = opt.paper_sign ? -1.0 : 1.0;
    bool density_failure = false;

    auto rhs = [&](double /*t*/, std::span<const double> y, std::span<double> dy) {
        const double a = y[0], b = y[1], A = y[2], B = y[3];
        const double n = 1.0 - b;
        if (!(n > 0.0)) {
            density_failure = true;
            dy[0] = dy[1] = dy[2] = dy[3] = 0.0;
            return;
        }
        const double nu = eps * spec.f(n);
        dy[0] = -a * a - b - nu * a;
        dy[1] = n * a;
        dy[2] = -A * (a + a_sign * nu) - B;
        dy[3] = n * A;
    };

    SimOutcome out;
    out.trace.reserve(1024);
    std::vector<double> y{init.a, init.b, init.A, init.B};

    AffineDiagnostics diag;
    diag.max_abs_a = std::abs(init.a);
    diag.min_b = init.b;
    diag.min_density = 1.0 - init.b;
    diag.min_step = std::numeric_limits<double>::infinity();

    {
        std::vector<double> dy0(4);
        rhs(init.t, std::span<const double>(y), std::span<double>(dy0));
        out.trace.push(init.t, y, dy0, 0.0);
    }

    OdeOptions ode;
    ode.rel_tol = tol;
    ode.abs_tol = tol;
    ode.h_min = opt.h_min;

    auto observer = [&](double t, std::span<const double> yy, std::span<const double> dyy,
                        double h) {
        out.trace.push(t, yy, dyy, h);
        diag.max_abs_a = std::max(diag.max_abs_a, std::abs(yy[0]));
        diag.min_b = std::min(diag.min_b, yy[1]);
        diag.min_density = std::min(diag.min_density, 1.0 - yy[1]);
        diag.min_step = std::min(diag.min_step, h);
    };
    auto halt_pred = [&](double /*t*/, std::span<const double> yy) {
        return density_failure || std::abs(yy[0]) > opt.theta_blow || !(yy[1] < 1.0);
    };

    const auto stats =
        integrate_adaptive(rhs, y, init.t, init.t + t_end, ode, observer, halt_pred);

    diag.accepted_steps = stats.accepted;
    diag.rejected_steps = stats.rejected;
    diag.median_step = out.trace.median_step();
    out.diagnostics = diag;

    if (density_failure || !(y[1] < 1.0)) {
        throw IntegrationError("integrate_affine: density 1-b became nonpositive (t = " +
                               std::to_string(out.trace.back().t) + ")");
    }

    switch (stats.reason) {
        case StopReason::ReachedEnd:
            out.verdict = {VerdictKind::GloballySmooth, init.t + t_end};
            return out;
        case StopReason::Halted:
        case StopReason::MinStep: {
            BlowupThresholds thr;
            thr.theta_blow = opt.theta_blow;
            if (auto t_star = detect_blowup(out.trace, thr)) {
                out.verdict = {VerdictKind::BlowUp, *t_star};
                return out;
            }
            if (stats.reason == StopReason::MinStep) {
                throw IntegrationError(
                    "integrate_affine: step collapsed without divergence at t = " +
                    std::to_string(out.trace.back().t));
            }
            // |a| crossed the threshold but steps never collapsed; treat the
            // threshold time itself as blow-up only if steps did shrink.
            throw IntegrationError(
                "integrate_affine: threshold crossed without step collapse at t = " +
                std::to_string(out.trace.back().t));
        }
    }
    throw IntegrationError("integrate_affine: unreachable");
}

std::vector<std::array<double, 2>> phase_curve(const AffineState& init, const DampingSpec& spec,
                                               double t_end, double tol,
                                               const AffineOptions& opt) {
    SimOutcome out = integrate_affine(init, spec, t_end, tol, opt);
    std::vector<std::array<double, 2>> pts;
    pts.reserve(out.trace.size());
    for (const auto& node : out.trace.nodes()) {
        pts.push_back({node.y[1], node.y[0]});
    }
    return pts;
}

std::optional<double> detect_blowup(const Trace& trace, const BlowupThresholds& thr) {
    if (trace.size() < 2) return std::nullopt;
    const double med = trace.median_step();
    if (med <= 0.0) return std::nullopt;
    const double h_collapse = med / thr.step_collapse_factor;
    for (const auto& node : trace.nodes()) {
        if (node.h > 0.0 && node.h <= h_collapse && std::abs(node.y[0]) > thr.theta_blow) {
            return node.t;
        }
    }
    return std::nullopt;
}

}  // namespace coldplasma
