#pragma once

#include <span>
#include <vector>

#include "coldplasma/damping.hpp"
#include "coldplasma/ode.hpp"

namespace coldplasma {

/// First corrector alpha1(b) of the phase-curve expansion in epsilon,
/// alpha1(b) = (1-b)^2/a0(b) * integral_b^b0 a0(beta) f(1-beta)/(1-beta)^3 dbeta,
/// evaluated on the lower branch a0 < 0. Strictly positive for b < b0.
struct CorrectorCurve {
    std::vector<double> b_grid;
    std::vector<double> alpha1;
    double b0 = 0.0;
    double C = 0.0;
};

[[nodiscard]] CorrectorCurve corrector_alpha1(double C, double b0, const DampingSpec& spec,
                                              std::span<const double> b_grid);

/// Single-point convenience overload.
[[nodiscard]] double corrector_alpha1_at(double C, double b0, const DampingSpec& spec, double b);

struct PersistenceBound {
    /// sqrt(C) / integral, or 0 when the damping integral diverges.
    double epsilon_bound = 0.0;
    bool integral_divergent = false;
    /// Whether blow-up persists at the spec's epsilon (always false for a
    /// divergent integral).
    bool persists = false;
    /// Value of integral f/eta^2 over [eta0, inf) when convergent.
    double integral = 0.0;
};

/// Smallness bound on epsilon below which the hyperbolic (C > 0) datum
/// still blows up: epsilon < sqrt(C) / integral_eta0^inf f(eta)/eta^2.
/// Divergence is decided by the tail exponent, never by quadrature.
[[nodiscard]] PersistenceBound blowup_persistence_bound(double C, const DampingSpec& spec,
                                                        double eta0);

struct SigmaSample {
    double s = 0.0;
    double sigma0 = 0.0;
    double xi0 = 0.0;
};

/// Integrates the zeroth-order second-derivative pair along the
/// unperturbed branch q0(s):
///   d sigma0/ds = ((1-s) xi0 - sigma0 q0) / ((1-s) q0)
///   d xi0/ds    = -(2 q0 xi0 + sigma0) / ((1-s) q0)
/// q0 must not vanish on the range (branch turning throws).
[[nodiscard]] std::vector<SigmaSample> sigma0_system(double s_start, double s_end,
                                                     double sigma0_init, double xi0_init,
                                                     double C, int branch,
                                                     double tol = 1e-10,
                                                     std::size_t n_samples = 64);

struct SigmaZeroFit {
    double C1 = 0.0;
    double C2 = 0.0;
    /// Max deviation from the closed form at the non-anchor samples,
    /// relative to the largest |sigma0| sampled.
    double residual = 0.0;
};

/// Fits sigma0(s) = (s-1)(C1 s + C2 q0(s)) through two well-separated
/// samples and reports the residual over the rest.
[[nodiscard]] SigmaZeroFit fit_sigma0(std::span<const SigmaSample> samples, double C,
                                      int branch);

}  // namespace coldplasma
