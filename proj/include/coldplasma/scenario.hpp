#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "coldplasma/affine.hpp"
#include "coldplasma/characteristics.hpp"
#include "coldplasma/damping.hpp"
#include "coldplasma/perturbation.hpp"

namespace coldplasma {

/// Manifest rejection with the offending field in the message.
class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScenarioKind {
    AffineRun,
    Phase,
    Corrector,
    Sigma0,
    FieldRun,
    EulerAnalog,
    Sweep,
    ConditionCheck,
    Figures,
};

[[nodiscard]] std::string to_string(ScenarioKind kind);

struct DampingConfig {
    std::string kind = "power-law";
    double nu0 = 1.0;
    double gamma = 2.0;
    double epsilon = 0.0;

    [[nodiscard]] DampingSpec build() const;
};

struct AffineConfig {
    double a0 = 2.0;
    double b0 = 0.5;
    double A0 = 0.0;
    double B0 = 0.0;
    double t_end = 100.0;
    double tol = 1e-8;
    bool paper_sign = false;
};

struct DataConfig {
    /// zero-velocity-sine | velocity-sine | affine | custom-table
    std::string kind = "zero-velocity-sine";
    double d = 0.9;
    double dv = 0.0;
    double e_offset = 0.0;
    double L = kTwoPi;
    /// periodic | clamped (custom-table only; the other kinds imply it)
    std::string mode = "periodic";
    std::string table_path;
    double a0 = 0.0, b0 = 0.0, A0 = 0.0, B0 = 0.0;  // affine kind

    [[nodiscard]] InitialData build() const;
};

struct FieldConfig {
    DataConfig data;
    std::size_t N = 256;
    double t_end = 100.0;
    double tol = 1e-8;
    double snapshot_dt = 0.0;
    double theta_blow = 1e8;
    double crossing_delta_rel = 1e-10;
    double h_min = 1e-14;
    bool force_zero_sigma = false;

    [[nodiscard]] FieldOptions options() const;
};

struct CorrectorConfig {
    double C = 1.0;
    double b0 = 0.0;
    double b_min = -5.0;
    std::size_t points = 64;
};

struct Sigma0Config {
    double C = 1.0;
    double sigma0 = 1.0;
    double xi0 = 0.0;
    double s_start = -0.5;
    double s_end = -5.0;
    int branch = -1;
    std::size_t samples = 64;
    double tol = 1e-10;
};

struct SweepConfig {
    std::vector<double> gamma_list;
    std::vector<double> epsilon_list;
    std::vector<double> d_list;
    std::size_t N = 256;
    double t_end = 200.0;
    double tol = 1e-8;
    /// Tighter crossing guard: threshold-gamma suppressed runs pass
    /// through legitimate ~1e-10 L compressions before re-expanding.
    double crossing_delta_rel = 1e-13;
    std::size_t workers = 0;  // 0 = hardware concurrency
};

struct FiguresConfig {
    double epsilon = 0.8;
    double a0 = 2.0;
    double b0 = 0.5;
};

struct Manifest {
    ScenarioKind kind = ScenarioKind::AffineRun;
    std::string name = "run";
    std::string output_dir = "out";
    DampingConfig damping;
    AffineConfig affine;
    FieldConfig field;
    CorrectorConfig corrector;
    Sigma0Config sigma0;
    SweepConfig sweep;
    FiguresConfig figures;

    static Manifest from_json_text(const std::string& text);
    static Manifest from_json_file(const std::filesystem::path& path);
    [[nodiscard]] std::string canonical_json() const;
    /// FNV-1a 64 over the canonical JSON, hex; stamped into every CSV.
    [[nodiscard]] std::string hash() const;
    /// Throws ManifestError naming the offending field.
    void validate() const;

private:
    [[nodiscard]] bool m_kind_needs_damping() const;
};

struct ConditionReport {
    bool suppression = false;   // integral f/eta^2 divergent (gamma >= 1)
    bool parabolic = false;     // milder C = 0 criterion (gamma > 1/2)
    bool tail_regular = false;  // eta f'/f settles to a constant
    double tail_limit = 0.0;
    std::string behavior_class;

    [[nodiscard]] std::string to_text() const;
};

/// Evaluates the three analytic criteria and the predicted behavior
/// class for the damping law.
[[nodiscard]] ConditionReport condition_report(const DampingSpec& spec);

struct SweepCell {
    double gamma = 0.0;
    double epsilon = 0.0;
    double d = 0.0;
    std::size_t N = 0;
    double tol = 0.0;
    std::string verdict;  // smooth | blow-up | error
    double t_star = 0.0;  // blow-up time, 0 for smooth
    double t_end = 0.0;
    double min_q = 0.0;
    double min_spacing = 0.0;
    bool reentered = false;
    std::string error;
};

struct SweepSummaryRow {
    double epsilon = 0.0;
    double d = 0.0;
    /// Largest gamma that blew up and smallest that stayed smooth.
    double max_blowup_gamma = 0.0;
    double min_smooth_gamma = 0.0;
    bool monotone = true;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<SweepSummaryRow> summary;
};

/// Runs run_field on every (gamma, epsilon, d) cell. The smooth verdict
/// requires survival to t_end plus the re-entry diagnostic (every
/// characteristic that dipped to q < 0 came back), not mere survival.
/// Per-cell failures are recorded and the sweep continues.
[[nodiscard]] SweepResult gamma_threshold_sweep(const SweepConfig& cfg,
                                                const DampingConfig& damping_base);

struct Fig1Data {
    /// (b, a, db/dt, da/dt) samples of the perturbed direction field.
    std::vector<std::array<double, 4>> direction_field;
    std::vector<std::array<double, 2>> curve_unperturbed;
    std::vector<std::array<double, 2>> curve_perturbed;
};

/// Direction field of the damped phase system (f = n^2) plus the two
/// phase curves from one start: undamped (escaping for C > 0) and damped.
[[nodiscard]] Fig1Data reproduce_fig1(double epsilon, double a0 = 2.0, double b0 = 0.5);

struct Fig2Data {
    std::vector<std::array<double, 2>> b_undamped;  // (t, b), terminates at t*
    std::vector<std::array<double, 2>> b_damped;    // (t, b) to t_end
    std::vector<std::array<double, 2>> b_tail;      // late-time damped tail
};

/// b(t) for f = n^2 at epsilon = 0 (finite-time escape) and epsilon = 1
/// (decaying oscillation), from one hyperbolic start.
[[nodiscard]] Fig2Data reproduce_fig2(double a0 = 2.0, double b0 = 0.5, double t_end = 100.0);

/// Runs the manifest's scenario and writes its outputs (CSV files, a
/// manifest echo and plot scripts where applicable) under
/// out_root/manifest.output_dir. Returns the paths written.
std::vector<std::filesystem::path> run_scenario(const Manifest& manifest,
                                                const std::filesystem::path& out_root);

}  // namespace coldplasma
