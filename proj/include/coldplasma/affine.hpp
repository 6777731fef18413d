#pragma once

#include <array>
#include <optional>
#include <vector>

#include "coldplasma/damping.hpp"
#include "coldplasma/ode.hpp"

namespace coldplasma {

/// Coefficients of the affine solution V = a*x + A, E = b*x + B.
/// Admissible states have b < 1 (density n = 1 - b stays positive).
struct AffineState {
    double t = 0.0;
    double a = 0.0;
    double b = 0.0;
    double A = 0.0;
    double B = 0.0;
};

enum class ConicKind { Ellipse, Parabola, Hyperbola };

/// The undamped phase curves a(b) are conics classified by the sign of
/// C = (a0^2 + 2 b0 - 1) / (1 - b0)^2: ellipse (C < 0, bounded orbit),
/// parabola (C = 0) or hyperbola (C > 0, escape to -infinity).
struct ConicClass {
    double C = 0.0;
    ConicKind kind = ConicKind::Ellipse;
};

/// Parabola tolerance: |C| <= tol classifies as Parabola. The raw C is
/// always reported so callers can apply their own cutoff.
[[nodiscard]] ConicClass conic_constant(double a0, double b0, double tol = 1e-12);

/// The undamped branch a = sign * sqrt(1 - 2b + C (1-b)^2). Throws
/// std::domain_error off the real locus (negative radicand).
[[nodiscard]] double unperturbed_branch(double b, double C, int sign);

enum class VerdictKind { GloballySmooth, BlowUp };

struct Verdict {
    VerdictKind kind = VerdictKind::GloballySmooth;
    /// T_end for smooth runs, t* for blow-up.
    double time = 0.0;
};

struct AffineDiagnostics {
    double max_abs_a = 0.0;
    double min_b = 0.0;
    double min_density = 0.0;  // min over trace of 1 - b
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    double min_step = 0.0;
    double median_step = 0.0;
};

/// Trace layout: y = (a, b, A, B).
struct SimOutcome {
    Verdict verdict;
    Trace trace;
    AffineDiagnostics diagnostics;
};

struct AffineOptions {
    /// |a| beyond this (with collapsed steps) classifies blow-up.
    double theta_blow = 1e8;
    double h_min = 1e-14;
    /// Reproduce the printed form of the A-equation, dA/dt = -A(a - eps f) - B,
    /// instead of the one substitution actually yields (plus sign).
    bool paper_sign = false;
};

/// Integrates da/dt = -a^2 - b - eps f(1-b) a, db/dt = (1-b) a together
/// with the offset pair (A, B). Adaptive 5(4) stepping; the density
/// 1 - b is never clamped -- a nonpositive value aborts with
/// IntegrationError. Step collapse with |a| past the threshold is a
/// blow-up verdict, step collapse without divergence is an error.
[[nodiscard]] SimOutcome integrate_affine(const AffineState& init, const DampingSpec& spec,
                                          double t_end, double tol,
                                          const AffineOptions& opt = {});

/// (b, a) samples of the trajectory, monotonically parameterized by t.
[[nodiscard]] std::vector<std::array<double, 2>> phase_curve(const AffineState& init,
                                                             const DampingSpec& spec,
                                                             double t_end, double tol,
                                                             const AffineOptions& opt = {});

struct BlowupThresholds {
    double theta_blow = 1e8;
    double step_collapse_factor = 1e6;
};

/// Earliest trace time where |a| exceeds theta_blow while the step has
/// shrunk by >= the collapse factor from its median.
[[nodiscard]] std::optional<double> detect_blowup(const Trace& trace,
                                                  const BlowupThresholds& thr = {});

/// Conserved along undamped trajectories: (a^2 + 2b - 1)/(1-b)^2.
[[nodiscard]] inline double conic_invariant(double a, double b) {
    return (a * a + 2.0 * b - 1.0) / ((1.0 - b) * (1.0 - b));
}

}  // namespace coldplasma
