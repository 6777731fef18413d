// coldplasma: scenario runner for the damped cold-plasma (Euler-Poisson)
// simulator. Every subcommand reads an optional JSON manifest; command
// line flags override individual manifest fields.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "coldplasma/scenario.hpp"

namespace {

using coldplasma::Manifest;
using coldplasma::ScenarioKind;

std::filesystem::path output_root(const std::string& cli_root) {
    if (!cli_root.empty()) return cli_root;
    if (const char* env = std::getenv("COLDPLASMA_OUT")) return env;
    return ".";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cold plasma oscillations with density-dependent damping"};
    app.require_subcommand(1);

    std::string manifest_path;
    std::string out_dir;
    std::string out_root;
    app.add_option("--manifest", manifest_path, "JSON manifest file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (overrides manifest)");
    app.add_option("--out-root", out_root,
                   "root for output directories (default $COLDPLASMA_OUT or .)");

    // damping flags shared by most subcommands
    double gamma = 2.0, nu0 = 1.0, epsilon = 0.0;
    auto add_damping = [&](CLI::App* cmd) {
        cmd->add_option("--gamma", gamma, "power-law exponent of f(n) = nu0 n^gamma");
        cmd->add_option("--nu0", nu0, "power-law prefactor");
        cmd->add_option("--epsilon", epsilon, "damping amplitude");
    };

    double a0 = 2.0, b0 = 0.5, A0 = 0.0, B0 = 0.0, tend = 100.0, tol = 1e-8;
    bool paper_sign = false;
    auto add_affine = [&](CLI::App* cmd) {
        cmd->add_option("--a0", a0, "initial velocity slope");
        cmd->add_option("--b0", b0, "initial field slope (< 1)");
        cmd->add_option("--A0", A0, "initial velocity offset");
        cmd->add_option("--B0", B0, "initial field offset");
        cmd->add_option("--tend", tend, "integration horizon");
        cmd->add_option("--tol", tol, "adaptive tolerance");
        cmd->add_flag("--paper-sign", paper_sign,
                      "use the printed sign variant of the A equation");
    };

    auto* affine_cmd = app.add_subcommand("affine-run", "integrate the affine ODE system");
    add_affine(affine_cmd);
    add_damping(affine_cmd);

    auto* phase_cmd = app.add_subcommand("phase", "phase curve a(b) of the affine system");
    add_affine(phase_cmd);
    add_damping(phase_cmd);

    double corr_C = 1.0, corr_b0 = 0.0, corr_bmin = -5.0;
    std::size_t corr_points = 64;
    auto* corr_cmd = app.add_subcommand("corrector", "first corrector alpha1(b)");
    corr_cmd->add_option("--C", corr_C, "conic constant (>= 0)");
    corr_cmd->add_option("--b0", corr_b0, "expansion base point");
    corr_cmd->add_option("--b-min", corr_bmin, "deepest grid point");
    corr_cmd->add_option("--points", corr_points, "grid size");
    add_damping(corr_cmd);

    double sig_C = 1.0, sig_sstart = -0.5, sig_send = -5.0;
    std::vector<double> sig_init{1.0, 0.0};
    int sig_branch = -1;
    std::size_t sig_samples = 64;
    auto* sig_cmd =
        app.add_subcommand("sigma0", "zeroth-order (sigma0, xi0) system and closed-form fit");
    sig_cmd->add_option("--C", sig_C, "conic constant");
    sig_cmd->add_option("--init", sig_init, "initial (sigma0, xi0)")->expected(2);
    sig_cmd->add_option("--s-start", sig_sstart, "start of the s range");
    sig_cmd->add_option("--s-end", sig_send, "end of the s range");
    sig_cmd->add_option("--branch", sig_branch, "q0 branch (+1/-1)");
    sig_cmd->add_option("--samples", sig_samples, "number of samples");

    std::string data_kind = "zero-velocity-sine", data_mode = "periodic", table_path;
    double field_d = 0.9, field_dv = 0.0, field_eoff = 0.0, field_L = coldplasma::kTwoPi;
    std::size_t field_N = 256;
    double field_tend = 100.0, field_tol = 1e-8, snapshot_dt = 0.0;
    auto add_field = [&](CLI::App* cmd) {
        cmd->add_option("--data-kind", data_kind,
                        "zero-velocity-sine|velocity-sine|affine|custom-table");
        cmd->add_option("--d", field_d, "field slope amplitude (|d| < 1)");
        cmd->add_option("--dv", field_dv, "velocity slope amplitude (velocity-sine)");
        cmd->add_option("--e-offset", field_eoff, "constant offset of E0");
        cmd->add_option("--L", field_L, "spatial period");
        cmd->add_option("--mode", data_mode, "periodic|clamped (custom-table)");
        cmd->add_option("--table", table_path, "CSV table for custom-table data");
        cmd->add_option("--N", field_N, "number of characteristics");
        cmd->add_option("--tend", field_tend, "integration horizon");
        cmd->add_option("--tol", field_tol, "adaptive tolerance");
        cmd->add_option("--snapshot-dt", snapshot_dt, "snapshot cadence (0 = auto)");
        cmd->add_option("--a0", a0, "affine data: velocity slope");
        cmd->add_option("--b0", b0, "affine data: field slope");
        add_damping(cmd);
    };
    auto* field_cmd = app.add_subcommand("field-run", "full-field characteristic ensemble run");
    add_field(field_cmd);
    auto* analog_cmd =
        app.add_subcommand("euler-analog", "control run without the elliptic coupling");
    add_field(analog_cmd);

    std::vector<double> sweep_gammas, sweep_epsilons, sweep_ds;
    std::size_t sweep_N = 256, sweep_workers = 0;
    double sweep_tend = 200.0, sweep_tol = 1e-8;
    auto* sweep_cmd = app.add_subcommand("sweep", "gamma/epsilon/d verdict sweep");
    sweep_cmd->add_option("--gamma-list", sweep_gammas, "gamma values")->delimiter(',');
    sweep_cmd->add_option("--epsilon-list", sweep_epsilons, "epsilon values")->delimiter(',');
    sweep_cmd->add_option("--d-list", sweep_ds, "seed amplitudes")->delimiter(',');
    sweep_cmd->add_option("--N", sweep_N, "characteristics per cell");
    sweep_cmd->add_option("--tend", sweep_tend, "horizon per cell");
    sweep_cmd->add_option("--tol", sweep_tol, "tolerance per cell");
    sweep_cmd->add_option("--workers", sweep_workers, "parallel cells (0 = hardware)");
    sweep_cmd->add_option("--nu0", nu0, "power-law prefactor");

    auto* cond_cmd =
        app.add_subcommand("check-condition", "evaluate the analytic damping criteria");
    add_damping(cond_cmd);

    double fig_eps = 0.8;
    auto* fig_cmd = app.add_subcommand("figures", "reproduce the phase/decay figure datasets");
    fig_cmd->add_option("--epsilon", fig_eps, "damping amplitude for the comparison");
    fig_cmd->add_option("--a0", a0, "starting velocity slope");
    fig_cmd->add_option("--b0", b0, "starting field slope");

    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        Manifest m;
        if (!manifest_path.empty()) m = Manifest::from_json_file(manifest_path);

        auto touched = [](CLI::App* cmd, const char* flag) {
            return cmd->count(flag) > 0;
        };
        auto apply_damping = [&](CLI::App* cmd) {
            if (touched(cmd, "--gamma")) m.damping.gamma = gamma;
            if (touched(cmd, "--nu0")) m.damping.nu0 = nu0;
            if (touched(cmd, "--epsilon")) m.damping.epsilon = epsilon;
        };
        auto apply_affine = [&](CLI::App* cmd) {
            if (touched(cmd, "--a0")) m.affine.a0 = a0;
            if (touched(cmd, "--b0")) m.affine.b0 = b0;
            if (touched(cmd, "--A0")) m.affine.A0 = A0;
            if (touched(cmd, "--B0")) m.affine.B0 = B0;
            if (touched(cmd, "--tend")) m.affine.t_end = tend;
            if (touched(cmd, "--tol")) m.affine.tol = tol;
            if (touched(cmd, "--paper-sign")) m.affine.paper_sign = paper_sign;
        };
        auto apply_field = [&](CLI::App* cmd) {
            if (touched(cmd, "--data-kind")) m.field.data.kind = data_kind;
            if (touched(cmd, "--d")) m.field.data.d = field_d;
            if (touched(cmd, "--dv")) m.field.data.dv = field_dv;
            if (touched(cmd, "--e-offset")) m.field.data.e_offset = field_eoff;
            if (touched(cmd, "--L")) m.field.data.L = field_L;
            if (touched(cmd, "--mode")) m.field.data.mode = data_mode;
            if (touched(cmd, "--table")) m.field.data.table_path = table_path;
            if (touched(cmd, "--a0")) m.field.data.a0 = a0;
            if (touched(cmd, "--b0")) m.field.data.b0 = b0;
            if (touched(cmd, "--N")) m.field.N = field_N;
            if (touched(cmd, "--tend")) m.field.t_end = field_tend;
            if (touched(cmd, "--tol")) m.field.tol = field_tol;
            if (touched(cmd, "--snapshot-dt")) m.field.snapshot_dt = snapshot_dt;
            apply_damping(cmd);
        };

        if (affine_cmd->parsed()) {
            m.kind = ScenarioKind::AffineRun;
            apply_affine(affine_cmd);
            apply_damping(affine_cmd);
        } else if (phase_cmd->parsed()) {
            m.kind = ScenarioKind::Phase;
            apply_affine(phase_cmd);
            apply_damping(phase_cmd);
        } else if (corr_cmd->parsed()) {
            m.kind = ScenarioKind::Corrector;
            if (touched(corr_cmd, "--C")) m.corrector.C = corr_C;
            if (touched(corr_cmd, "--b0")) m.corrector.b0 = corr_b0;
            if (touched(corr_cmd, "--b-min")) m.corrector.b_min = corr_bmin;
            if (touched(corr_cmd, "--points")) m.corrector.points = corr_points;
            apply_damping(corr_cmd);
        } else if (sig_cmd->parsed()) {
            m.kind = ScenarioKind::Sigma0;
            if (touched(sig_cmd, "--C")) m.sigma0.C = sig_C;
            if (touched(sig_cmd, "--init")) {
                m.sigma0.sigma0 = sig_init[0];
                m.sigma0.xi0 = sig_init[1];
            }
            if (touched(sig_cmd, "--s-start")) m.sigma0.s_start = sig_sstart;
            if (touched(sig_cmd, "--s-end")) m.sigma0.s_end = sig_send;
            if (touched(sig_cmd, "--branch")) m.sigma0.branch = sig_branch;
            if (touched(sig_cmd, "--samples")) m.sigma0.samples = sig_samples;
        } else if (field_cmd->parsed()) {
            m.kind = ScenarioKind::FieldRun;
            apply_field(field_cmd);
        } else if (analog_cmd->parsed()) {
            m.kind = ScenarioKind::EulerAnalog;
            apply_field(analog_cmd);
        } else if (sweep_cmd->parsed()) {
            m.kind = ScenarioKind::Sweep;
            if (touched(sweep_cmd, "--gamma-list")) m.sweep.gamma_list = sweep_gammas;
            if (touched(sweep_cmd, "--epsilon-list")) m.sweep.epsilon_list = sweep_epsilons;
            if (touched(sweep_cmd, "--d-list")) m.sweep.d_list = sweep_ds;
            if (touched(sweep_cmd, "--N")) m.sweep.N = sweep_N;
            if (touched(sweep_cmd, "--tend")) m.sweep.t_end = sweep_tend;
            if (touched(sweep_cmd, "--tol")) m.sweep.tol = sweep_tol;
            if (touched(sweep_cmd, "--workers")) m.sweep.workers = sweep_workers;
            if (touched(sweep_cmd, "--nu0")) m.damping.nu0 = nu0;
        } else if (cond_cmd->parsed()) {
            m.kind = ScenarioKind::ConditionCheck;
            apply_damping(cond_cmd);
        } else if (fig_cmd->parsed()) {
            m.kind = ScenarioKind::Figures;
            if (touched(fig_cmd, "--epsilon")) m.figures.epsilon = fig_eps;
            if (touched(fig_cmd, "--a0")) m.figures.a0 = a0;
            if (touched(fig_cmd, "--b0")) m.figures.b0 = b0;
        }

        if (!out_dir.empty()) m.output_dir = out_dir;

        if (m.kind == ScenarioKind::ConditionCheck) {
            std::cout << coldplasma::condition_report(m.damping.build()).to_text();
        }
        const auto written = coldplasma::run_scenario(m, output_root(out_root));
        for (const auto& p : written) std::cout << "wrote " << p.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
