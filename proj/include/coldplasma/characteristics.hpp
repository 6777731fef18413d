#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "coldplasma/affine.hpp"
#include "coldplasma/damping.hpp"
#include "coldplasma/ode.hpp"

namespace coldplasma {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class DomainMode { Periodic, Clamped };

/// Raised when adjacent characteristics come closer than the crossing
/// guard and the finite-difference closure stops being meaningful.
class ImminentCrossingError : public IntegrationError {
public:
    using IntegrationError::IntegrationError;
};

/// Cauchy data (V0, E0) with derivatives on a period [0, L).
/// The initial density 1 - E0'(x) must be positive everywhere.
struct InitialData {
    std::function<double(double)> V0;
    std::function<double(double)> E0;
    std::function<double(double)> V0_prime;
    std::function<double(double)> E0_prime;
    double L = kTwoPi;
    DomainMode mode = DomainMode::Periodic;

    /// V0 = 0, E0 = e_offset + d*(L/2pi)*sin(2pi x/L); d is the slope
    /// amplitude max|E0'| and must stay below 1.
    static InitialData sine(double d, double e_offset = 0.0, double L = kTwoPi);
    /// Adds V0 = dv*(L/2pi)*sin(2pi x/L) on top of the sine field seed.
    static InitialData velocity_sine(double dv, double d, double e_offset = 0.0,
                                     double L = kTwoPi);
    /// Affine data V0 = a0 x + A0, E0 = b0 x + B0 on a clamped interval.
    static InitialData affine(double a0, double b0, double A0 = 0.0, double B0 = 0.0,
                              double L = kTwoPi);
    /// Tabulated data; derivative columns optional (nonuniform finite
    /// differences on the table otherwise). x must be strictly increasing
    /// in [0, L).
    static InitialData from_table(std::vector<double> x, std::vector<double> V,
                                  std::vector<double> E, std::vector<double> Vx,
                                  std::vector<double> Ex, double L, DomainMode mode);
};

/// N Lagrangian particles carrying (x, V, E, q = V_x, s = E_x) plus the
/// per-characteristic time-integrated dissipation. Positions are stored
/// unwrapped and strictly increasing; the periodic neighbor of the last
/// particle is the first one shifted by L.
struct CharacteristicEnsemble {
    double t = 0.0;
    double L = kTwoPi;
    DomainMode mode = DomainMode::Periodic;
    std::vector<double> x, V, E, q, s;
    std::vector<double> dissipated;

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
    [[nodiscard]] double density(std::size_t i) const { return 1.0 - s[i]; }
    [[nodiscard]] double energy(std::size_t i) const { return V[i] * V[i] + E[i] * E[i]; }
};

/// Equispaced discretization of the Cauchy data; N >= 16.
[[nodiscard]] CharacteristicEnsemble seed_ensemble(const InitialData& data, std::size_t N);

/// sigma_i = ds/dx at particle i by 3-point nonuniform central
/// differences (one-sided at clamped ends), exact on data linear in x.
/// Throws ImminentCrossingError when a gap falls below delta_min_rel*L.
[[nodiscard]] std::vector<double> reconstruct_sigma(const CharacteristicEnsemble& ens,
                                                    double delta_min_rel = 1e-10);

enum class SystemKind {
    /// Full Euler-Poisson characteristic system.
    EulerPoisson,
    /// Same transport and friction but without the elliptic coupling
    /// (drops -E from the V equation and -s from the q equation); the
    /// density is carried as n = 1 - s.
    EulerAnalog,
};

enum class BlowupSignal { None, QThreshold, Crossing, StepCollapse };

struct FieldOptions {
    double tol = 1e-8;
    double theta_blow = 1e8;
    /// Crossing guard as a fraction of L.
    double crossing_delta_rel = 1e-10;
    double h_min = 1e-14;
    /// 0 = t_end / 400.
    double snapshot_dt = 0.0;
    /// Diagnostic mode: suppress the sigma coupling entirely (the affine
    /// consistency check).
    bool force_zero_sigma = false;
};

struct FieldSnapshot {
    double t = 0.0;
    std::vector<double> x, V, E, q, s, dissipated;
};

struct FieldDiagnostics {
    double min_q = 0.0;
    double min_density = 0.0;
    double min_spacing = 0.0;
    double max_energy_initial = 0.0;
    double max_energy_run = 0.0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    double min_step = 0.0;
    /// Particles whose q went negative at some accepted step.
    std::size_t went_negative = 0;
    /// Of those, how many later returned to q > 0.
    std::size_t reentered = 0;
    [[nodiscard]] bool all_reentered() const noexcept { return reentered == went_negative; }
};

struct FieldResult {
    SystemKind system = SystemKind::EulerPoisson;
    Verdict verdict;
    BlowupSignal signal = BlowupSignal::None;
    /// Particle index that triggered the blow-up classification.
    std::size_t blowup_index = 0;
    std::vector<FieldSnapshot> snapshots;
    CharacteristicEnsemble final_state;
    std::vector<double> initial_energy;
    FieldDiagnostics diagnostics;
};

/// Runs the coupled characteristic system to t_end or blow-up. The shared
/// adaptive step is error-controlled on the max norm over particles and
/// sigma is re-reconstructed at every stage. Blow-up signals: min q below
/// -theta_blow, adjacent spacing below the crossing guard, or step
/// collapse; the earliest trigger stamps t*.
[[nodiscard]] FieldResult run_field(const InitialData& data, const DampingSpec& spec,
                                    double t_end, const FieldOptions& opt, std::size_t N);

/// Control experiment: the Euler system without the Poisson coupling.
/// Damping cannot suppress the gradient catastrophe here.
[[nodiscard]] FieldResult run_euler_analog(const InitialData& data, const DampingSpec& spec,
                                           double t_end, const FieldOptions& opt,
                                           std::size_t N);

/// One accepted adaptive step on an existing ensemble. `h_next` carries
/// the controller state between calls (0 = choose automatically).
struct StepResult {
    bool accepted = false;
    BlowupSignal signal = BlowupSignal::None;
    double h_used = 0.0;
};
StepResult step_field(CharacteristicEnsemble& ens, const DampingSpec& spec, SystemKind kind,
                      const FieldOptions& opt, double& h_next);

struct EnergyAuditEntry {
    double initial = 0.0;
    double final_energy = 0.0;
    /// Largest positive jump of V^2+E^2 between consecutive snapshots.
    double max_increase = 0.0;
    /// |E_T + D_T - E_0| / (1 + E_0): closure of the dissipation budget.
    double budget_residual = 0.0;
};

struct EnergyAuditReport {
    std::vector<EnergyAuditEntry> per_characteristic;
    double max_increase = 0.0;         // worst jump, normalized by 1 + initial
    double max_budget_residual = 0.0;  // worst budget closure
    /// Monotonicity tolerance actually applied: 10 * tol * (1 + E_0).
    double tol_used = 0.0;
    bool monotone = false;
};

/// Checks d/dt (V^2 + E^2) = -2 eps f(1-s) V^2 <= 0 along every
/// characteristic over the recorded snapshots, and that the integrated
/// dissipation closes the energy budget.
[[nodiscard]] EnergyAuditReport energy_audit(const FieldResult& run, double tol);

struct VTrendPoint {
    double s = 0.0;
    double t = 0.0;
    double V = 0.0;
    double E = 0.0;
    double q = 0.0;
};

struct VAtBlowupReport {
    /// V on the blow-up characteristic at the deepest resolved point.
    double v_last = 0.0;
    /// |V| at the geometric midpoint of the refined (1-s) range.
    double v_abs_mid = 0.0;
    /// Log-spaced checkpoints in (1-s), shallow to deep.
    std::vector<VTrendPoint> checkpoints;

    /// |V| strictly decreasing across the checkpoints of the last e-fold
    /// (factor e) of (1-s).
    [[nodiscard]] bool v_abs_decreasing_last_efold() const;
    /// Same over the last decade.
    [[nodiscard]] bool v_abs_decreasing_last_decade() const;
};

/// Near-blow-up refinement: re-integrates the blow-up characteristic
/// with s as the independent variable (the sigma coupling is
/// asymptotically subordinate there) for `decades` further decades of
/// (1 - s), sampling V along the way. Requires a BlowUp verdict on an
/// Euler-Poisson run.
[[nodiscard]] VAtBlowupReport v_at_blowup(const FieldResult& run, const DampingSpec& spec,
                                          double decades = 2.0, int points_per_decade = 8,
                                          double tol = 1e-12);

}  // namespace coldplasma
