#include "coldplasma/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace coldplasma {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

/// 3-point nonuniform first derivative of f on nodes x (strictly
/// increasing). Periodic mode wraps the end stencils across the period,
/// clamped mode uses one-sided second-order stencils. Returns false when
/// some gap is nonpositive (crossed or degenerate nodes); min_gap always
/// reports the smallest gap encountered.
bool derivative_on_nodes(std::span<const double> x, std::span<const double> f, double L,
                         DomainMode mode, std::span<double> out, double& min_gap) {
    const std::size_t n = x.size();
    min_gap = std::numeric_limits<double>::infinity();
    bool ok = true;

    auto central = [&](double hm, double hp, double fm, double f0, double fp) {
        return (fp * hm * hm - fm * hp * hp + f0 * (hp * hp - hm * hm)) /
               (hp * hm * (hp + hm));
    };

    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double g = x[i + 1] - x[i];
        min_gap = std::min(min_gap, g);
        if (!(g > 0.0)) ok = false;
    }
    if (mode == DomainMode::Periodic) {
        const double g = x[0] + L - x[n - 1];
        min_gap = std::min(min_gap, g);
        if (!(g > 0.0)) ok = false;
    }
    if (!ok) {
        std::fill(out.begin(), out.end(), kNan);
        return false;
    }

    if (mode == DomainMode::Periodic) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t im = (i == 0) ? n - 1 : i - 1;
            const std::size_t ip = (i + 1 == n) ? 0 : i + 1;
            const double xm = (i == 0) ? x[im] - L : x[im];
            const double xp = (i + 1 == n) ? x[ip] + L : x[ip];
            out[i] = central(x[i] - xm, xp - x[i], f[im], f[i], f[ip]);
        }
    } else {
        // interior
        for (std::size_t i = 1; i + 1 < n; ++i) {
            out[i] = central(x[i] - x[i - 1], x[i + 1] - x[i], f[i - 1], f[i], f[i + 1]);
        }
        // one-sided ends, second order
        {
            const double h1 = x[1] - x[0], h2 = x[2] - x[1];
            out[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] -
                     h1 / (h2 * (h1 + h2)) * f[2];
        }
        {
            const double g1 = x[n - 1] - x[n - 2], g2 = x[n - 2] - x[n - 3];
            out[n - 1] = (2 * g1 + g2) / (g1 * (g1 + g2)) * f[n - 1] -
                         (g1 + g2) / (g1 * g2) * f[n - 2] + g1 / (g2 * (g1 + g2)) * f[n - 3];
        }
    }
    return true;
}

// flat state layout: x | V | E | q | s | D
struct Layout {
    std::size_t n;
    [[nodiscard]] std::size_t size() const { return 6 * n; }
    [[nodiscard]] std::span<const double> x(std::span<const double> y) const { return y.subspan(0, n); }
    [[nodiscard]] std::span<const double> V(std::span<const double> y) const { return y.subspan(n, n); }
    [[nodiscard]] std::span<const double> E(std::span<const double> y) const { return y.subspan(2 * n, n); }
    [[nodiscard]] std::span<const double> q(std::span<const double> y) const { return y.subspan(3 * n, n); }
    [[nodiscard]] std::span<const double> s(std::span<const double> y) const { return y.subspan(4 * n, n); }
    [[nodiscard]] std::span<const double> D(std::span<const double> y) const { return y.subspan(5 * n, n); }
    [[nodiscard]] std::span<double> x(std::span<double> y) const { return y.subspan(0, n); }
    [[nodiscard]] std::span<double> V(std::span<double> y) const { return y.subspan(n, n); }
    [[nodiscard]] std::span<double> E(std::span<double> y) const { return y.subspan(2 * n, n); }
    [[nodiscard]] std::span<double> q(std::span<double> y) const { return y.subspan(3 * n, n); }
    [[nodiscard]] std::span<double> s(std::span<double> y) const { return y.subspan(4 * n, n); }
    [[nodiscard]] std::span<double> D(std::span<double> y) const { return y.subspan(5 * n, n); }
};

std::vector<double> flatten(const CharacteristicEnsemble& ens) {
    const Layout lay{ens.size()};
    std::vector<double> y(lay.size());
    std::span<double> ys(y);
    std::copy(ens.x.begin(), ens.x.end(), lay.x(ys).begin());
    std::copy(ens.V.begin(), ens.V.end(), lay.V(ys).begin());
    std::copy(ens.E.begin(), ens.E.end(), lay.E(ys).begin());
    std::copy(ens.q.begin(), ens.q.end(), lay.q(ys).begin());
    std::copy(ens.s.begin(), ens.s.end(), lay.s(ys).begin());
    std::copy(ens.dissipated.begin(), ens.dissipated.end(), lay.D(ys).begin());
    return y;
}

void unflatten(std::span<const double> y, double t, CharacteristicEnsemble& ens) {
    const Layout lay{ens.size()};
    ens.t = t;
    auto cp = [](std::span<const double> from, std::vector<double>& to) {
        to.assign(from.begin(), from.end());
    };
    cp(lay.x(y), ens.x);
    cp(lay.V(y), ens.V);
    cp(lay.E(y), ens.E);
    cp(lay.q(y), ens.q);
    cp(lay.s(y), ens.s);
    cp(lay.D(y), ens.dissipated);
}

struct FieldRhs {
    Layout lay;
    const DampingSpec& spec;
    SystemKind kind;
    double L;
    DomainMode mode;
    bool force_zero_sigma;
    std::vector<double> sigma;

    void operator()(double /*t*/, std::span<const double> y, std::span<double> dy) {
        const std::size_t n = lay.n;
        const auto x = lay.x(y), V = lay.V(y), E = lay.E(y), q = lay.q(y), s = lay.s(y);
        auto dx = lay.x(dy), dV = lay.V(dy), dE = lay.E(dy), dq = lay.q(dy), ds = lay.s(dy),
             dD = lay.D(dy);

        if (force_zero_sigma) {
            std::fill(sigma.begin(), sigma.end(), 0.0);
        } else {
            double min_gap = 0.0;
            if (!derivative_on_nodes(x, s, L, mode, sigma, min_gap)) {
                // crossed trial state: poison so the step is rejected
                std::fill(dy.begin(), dy.end(), kNan);
                return;
            }
        }

        const double eps = spec.epsilon();
        const bool elliptic = (kind == SystemKind::EulerPoisson);
        for (std::size_t i = 0; i < n; ++i) {
            const double density = 1.0 - s[i];
            if (!(density > 0.0)) {
                std::fill(dy.begin(), dy.end(), kNan);
                return;
            }
            const double fv = spec.f(density);
            const double nu = eps * fv;
            dx[i] = V[i];
            dV[i] = (elliptic ? -E[i] : 0.0) - nu * V[i];
            dE[i] = elliptic ? V[i] : 0.0;
            dq[i] = -q[i] * q[i] - (elliptic ? s[i] : 0.0) -
                    eps * (fv * q[i] - V[i] * spec.fprime(density) * sigma[i]);
            ds[i] = density * q[i];
            dD[i] = 2.0 * nu * V[i] * V[i];
        }
    }
};

struct AcceptScan {
    double min_q = std::numeric_limits<double>::infinity();
    double min_gap = std::numeric_limits<double>::infinity();
    double min_density = std::numeric_limits<double>::infinity();
    double max_energy = 0.0;
    std::size_t argmin_q = 0;
};

AcceptScan scan_state(const Layout& lay, std::span<const double> y, double L, DomainMode mode) {
    AcceptScan sc;
    const auto x = lay.x(y), V = lay.V(y), E = lay.E(y), q = lay.q(y), s = lay.s(y);
    const std::size_t n = lay.n;
    for (std::size_t i = 0; i < n; ++i) {
        if (q[i] < sc.min_q) {
            sc.min_q = q[i];
            sc.argmin_q = i;
        }
        sc.min_density = std::min(sc.min_density, 1.0 - s[i]);
        sc.max_energy = std::max(sc.max_energy, V[i] * V[i] + E[i] * E[i]);
        if (i + 1 < n) sc.min_gap = std::min(sc.min_gap, x[i + 1] - x[i]);
    }
    if (mode == DomainMode::Periodic) {
        sc.min_gap = std::min(sc.min_gap, x[0] + L - x[n - 1]);
    }
    return sc;
}

FieldSnapshot make_snapshot(const Layout& lay, double t, std::span<const double> y) {
    FieldSnapshot snap;
    snap.t = t;
    auto grab = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
    snap.x = grab(lay.x(y));
    snap.V = grab(lay.V(y));
    snap.E = grab(lay.E(y));
    snap.q = grab(lay.q(y));
    snap.s = grab(lay.s(y));
    snap.dissipated = grab(lay.D(y));
    return snap;
}

FieldResult run_core(CharacteristicEnsemble ens, const DampingSpec& spec, SystemKind kind,
                     double t_end, const FieldOptions& opt) {
    if (!(opt.tol > 0.0 && opt.tol <= 1e-3)) {
        throw std::invalid_argument("run_field: tol must lie in (0, 1e-3]");
    }
    const Layout lay{ens.size()};
    const double delta_min = opt.crossing_delta_rel * ens.L;
    const double snap_dt = opt.snapshot_dt > 0.0 ? opt.snapshot_dt : t_end / 400.0;

    FieldResult out;
    out.system = kind;
    out.initial_energy.resize(ens.size());
    for (std::size_t i = 0; i < ens.size(); ++i) out.initial_energy[i] = ens.energy(i);

    std::vector<double> y = flatten(ens);
    FieldRhs rhs{lay, spec, kind, ens.L, ens.mode, opt.force_zero_sigma,
                 std::vector<double>(ens.size(), 0.0)};

    FieldDiagnostics diag;
    {
        const auto sc0 = scan_state(lay, y, ens.L, ens.mode);
        diag.min_q = sc0.min_q;
        diag.min_density = sc0.min_density;
        diag.min_spacing = sc0.min_gap;
        diag.max_energy_initial = sc0.max_energy;
        diag.max_energy_run = sc0.max_energy;
    }
    diag.min_step = std::numeric_limits<double>::infinity();

    std::vector<unsigned char> went_neg(ens.size(), 0), reentered(ens.size(), 0);

    out.snapshots.push_back(make_snapshot(lay, ens.t, y));
    double next_snap = ens.t + snap_dt;

    BlowupSignal signal = BlowupSignal::None;
    bool density_failure = false;
    std::size_t blow_idx = 0;
    double t_last = ens.t;

    auto observer = [&](double t, std::span<const double> yy, std::span<const double>, double h) {
        t_last = t;
        diag.min_step = std::min(diag.min_step, h);
        const auto q = lay.q(yy);
        for (std::size_t i = 0; i < lay.n; ++i) {
            if (q[i] < 0.0) {
                went_neg[i] = 1;
            } else if (q[i] > 0.0 && went_neg[i]) {
                reentered[i] = 1;
            }
        }
        if (t >= next_snap) {
            out.snapshots.push_back(make_snapshot(lay, t, yy));
            while (next_snap <= t) next_snap += snap_dt;
        }
    };

    auto halt = [&](double /*t*/, std::span<const double> yy) {
        const auto sc = scan_state(lay, yy, ens.L, ens.mode);
        diag.min_q = std::min(diag.min_q, sc.min_q);
        diag.min_density = std::min(diag.min_density, sc.min_density);
        diag.min_spacing = std::min(diag.min_spacing, sc.min_gap);
        diag.max_energy_run = std::max(diag.max_energy_run, sc.max_energy);
        if (!(sc.min_density > 0.0)) {
            density_failure = true;
            return true;
        }
        if (sc.min_q < -opt.theta_blow) {
            signal = BlowupSignal::QThreshold;
            blow_idx = sc.argmin_q;
            return true;
        }
        if (sc.min_gap < delta_min) {
            signal = BlowupSignal::Crossing;
            blow_idx = sc.argmin_q;
            return true;
        }
        return false;
    };

    OdeOptions ode;
    ode.rel_tol = opt.tol;
    ode.abs_tol = opt.tol;
    ode.h_min = opt.h_min;

    const double t0 = ens.t;
    const auto stats = integrate_adaptive(rhs, y, t0, t0 + t_end, ode, observer, halt);

    diag.accepted_steps = stats.accepted;
    diag.rejected_steps = stats.rejected;
    for (std::size_t i = 0; i < lay.n; ++i) {
        diag.went_negative += went_neg[i];
        diag.reentered += reentered[i];
    }
    out.diagnostics = diag;

    unflatten(y, t_last, ens);
    out.final_state = std::move(ens);

    // final state as trailing snapshot (skip if the cadence just recorded it)
    if (out.snapshots.back().t != t_last) {
        out.snapshots.push_back(make_snapshot(lay, t_last, y));
    }

    switch (stats.reason) {
        case StopReason::ReachedEnd:
            out.verdict = {VerdictKind::GloballySmooth, t_last};
            break;
        case StopReason::Halted: {
            if (density_failure) {
                throw IntegrationError("run_field: density 1-s became nonpositive at t = " +
                                       std::to_string(t_last));
            }
            out.verdict = {VerdictKind::BlowUp, t_last};
            out.signal = signal;
            out.blowup_index = blow_idx;
            break;
        }
        case StopReason::MinStep: {
            const auto sc = scan_state(lay, y, out.final_state.L, out.final_state.mode);
            if (sc.min_q < -1e3 || sc.min_gap < 10.0 * delta_min) {
                out.verdict = {VerdictKind::BlowUp, t_last};
                out.signal = BlowupSignal::StepCollapse;
                out.blowup_index = sc.argmin_q;
            } else {
                throw IntegrationError("run_field: step collapse with bounded state at t = " +
                                       std::to_string(t_last));
            }
            break;
        }
    }
    return out;
}

}  // namespace

InitialData InitialData::sine(double d, double e_offset, double L) {
    if (!(std::abs(d) < 1.0)) {
        throw std::domain_error("sine seed: |d| must be < 1 to keep the density positive");
    }
    if (!(L > 0.0)) throw std::domain_error("sine seed: L must be positive");
    const double k = kTwoPi / L;
    const double amp = d / k;
    InitialData data;
    data.V0 = [](double) { return 0.0; };
    data.V0_prime = [](double) { return 0.0; };
    data.E0 = [amp, k, e_offset](double x) { return e_offset + amp * std::sin(k * x); };
    data.E0_prime = [d, k](double x) { return d * std::cos(k * x); };
    data.L = L;
    data.mode = DomainMode::Periodic;
    return data;
}

InitialData InitialData::velocity_sine(double dv, double d, double e_offset, double L) {
    InitialData data = sine(d, e_offset, L);
    const double k = kTwoPi / L;
    const double amp = dv / k;
    data.V0 = [amp, k](double x) { return amp * std::sin(k * x); };
    data.V0_prime = [dv, k](double x) { return dv * std::cos(k * x); };
    return data;
}

InitialData InitialData::affine(double a0, double b0, double A0, double B0, double L) {
    if (!(b0 < 1.0)) throw std::domain_error("affine seed: b0 must be < 1");
    InitialData data;
    data.V0 = [a0, A0](double x) { return a0 * x + A0; };
    data.V0_prime = [a0](double) { return a0; };
    data.E0 = [b0, B0](double x) { return b0 * x + B0; };
    data.E0_prime = [b0](double) { return b0; };
    data.L = L;
    data.mode = DomainMode::Clamped;
    return data;
}

InitialData InitialData::from_table(std::vector<double> x, std::vector<double> V,
                                    std::vector<double> E, std::vector<double> Vx,
                                    std::vector<double> Ex, double L, DomainMode mode) {
    const std::size_t m = x.size();
    if (m < 4 || V.size() != m || E.size() != m) {
        throw std::invalid_argument("table seed: need >= 4 rows with matching x/V/E columns");
    }
    for (std::size_t i = 1; i < m; ++i) {
        if (!(x[i] > x[i - 1])) {
            throw std::invalid_argument("table seed: x column must be strictly increasing");
        }
    }
    if (!(x.back() - x.front() < L)) {
        throw std::invalid_argument("table seed: x column must span less than one period L");
    }
    if (Vx.empty()) {
        Vx.resize(m);
        double mg = 0.0;
        if (!derivative_on_nodes(x, V, L, mode, Vx, mg)) {
            throw std::invalid_argument("table seed: degenerate x column");
        }
    }
    if (Ex.empty()) {
        Ex.resize(m);
        double mg = 0.0;
        derivative_on_nodes(x, E, L, mode, Ex, mg);
    }
    if (Vx.size() != m || Ex.size() != m) {
        throw std::invalid_argument("table seed: derivative columns must match x");
    }

    struct Table {
        std::vector<double> x, V, E, Vx, Ex;
        double L;
        DomainMode mode;
    };
    auto tab = std::make_shared<const Table>(Table{std::move(x), std::move(V), std::move(E),
                                                   std::move(Vx), std::move(Ex), L, mode});

    auto make_eval = [tab](const std::vector<double> Table::* col) {
        return [tab, col](double xq) {
            const auto& xs = tab->x;
            const auto& fs = (*tab).*col;
            double xp = xq;
            if (tab->mode == DomainMode::Periodic) {
                xp = std::fmod(xq - xs.front(), tab->L);
                if (xp < 0.0) xp += tab->L;
                xp += xs.front();
            }
            if (xp <= xs.front()) {
                if (tab->mode == DomainMode::Clamped) return fs.front();
                // wrap segment between last and first+L
                const double h = xs.front() + tab->L - xs.back();
                const double u = (xp + tab->L - xs.back()) / h;
                return fs.back() + u * (fs.front() - fs.back());
            }
            if (xp >= xs.back()) {
                if (tab->mode == DomainMode::Clamped) return fs.back();
                const double h = xs.front() + tab->L - xs.back();
                const double u = (xp - xs.back()) / h;
                return fs.back() + u * (fs.front() - fs.back());
            }
            const auto it = std::upper_bound(xs.begin(), xs.end(), xp);
            const std::size_t j = static_cast<std::size_t>(it - xs.begin());
            const double u = (xp - xs[j - 1]) / (xs[j] - xs[j - 1]);
            return fs[j - 1] + u * (fs[j] - fs[j - 1]);
        };
    };

    InitialData data;
    data.V0 = make_eval(&Table::V);
    data.E0 = make_eval(&Table::E);
    data.V0_prime = make_eval(&Table::Vx);
    data.E0_prime = make_eval(&Table::Ex);
    data.L = L;
    data.mode = mode;
    return data;
}

CharacteristicEnsemble seed_ensemble(const InitialData& data, std::size_t N) {
    if (N < 16) throw std::invalid_argument("seed_ensemble: N must be >= 16");
    if (!data.V0 || !data.E0 || !data.V0_prime || !data.E0_prime) {
        throw std::invalid_argument("seed_ensemble: initial data is incomplete");
    }
    if (data.mode == DomainMode::Periodic) {
        const double scaleV = 1.0 + std::abs(data.V0(0.0));
        const double scaleE = 1.0 + std::abs(data.E0(0.0));
        if (std::abs(data.V0(data.L) - data.V0(0.0)) > 1e-9 * scaleV ||
            std::abs(data.E0(data.L) - data.E0(0.0)) > 1e-9 * scaleE) {
            throw std::invalid_argument("seed_ensemble: data is not L-periodic");
        }
    }
    CharacteristicEnsemble ens;
    ens.t = 0.0;
    ens.L = data.L;
    ens.mode = data.mode;
    ens.x.resize(N);
    ens.V.resize(N);
    ens.E.resize(N);
    ens.q.resize(N);
    ens.s.resize(N);
    ens.dissipated.assign(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double x = data.L * static_cast<double>(i) / static_cast<double>(N);
        ens.x[i] = x;
        ens.V[i] = data.V0(x);
        ens.E[i] = data.E0(x);
        ens.q[i] = data.V0_prime(x);
        ens.s[i] = data.E0_prime(x);
        if (!(ens.s[i] < 1.0)) {
            throw std::domain_error("seed_ensemble: E0'(x) >= 1 at x = " + std::to_string(x) +
                                    " (nonpositive density)");
        }
    }
    return ens;
}

std::vector<double> reconstruct_sigma(const CharacteristicEnsemble& ens, double delta_min_rel) {
    if (ens.size() < 3) throw std::invalid_argument("reconstruct_sigma: need >= 3 particles");
    std::vector<double> sigma(ens.size());
    double min_gap = 0.0;
    const bool ok = derivative_on_nodes(ens.x, ens.s, ens.L, ens.mode, sigma, min_gap);
    if (!ok || min_gap < delta_min_rel * ens.L) {
        throw ImminentCrossingError(
            "reconstruct_sigma: adjacent characteristics closer than the crossing guard "
            "(min gap " +
            std::to_string(min_gap) + ")");
    }
    return sigma;
}

FieldResult run_field(const InitialData& data, const DampingSpec& spec, double t_end,
                      const FieldOptions& opt, std::size_t N) {
    return run_core(seed_ensemble(data, N), spec, SystemKind::EulerPoisson, t_end, opt);
}

FieldResult run_euler_analog(const InitialData& data, const DampingSpec& spec, double t_end,
                             const FieldOptions& opt, std::size_t N) {
    CharacteristicEnsemble ens = seed_ensemble(data, N);
    // no electric field in the analog; the density slope s = 1 - n is
    // seeded from E0' exactly as in the coupled system
    std::fill(ens.E.begin(), ens.E.end(), 0.0);
    return run_core(std::move(ens), spec, SystemKind::EulerAnalog, t_end, opt);
}

StepResult step_field(CharacteristicEnsemble& ens, const DampingSpec& spec, SystemKind kind,
                      const FieldOptions& opt, double& h_next) {
    const Layout lay{ens.size()};
    std::vector<double> y = flatten(ens);
    FieldRhs rhs{lay, spec, kind, ens.L, ens.mode, opt.force_zero_sigma,
                 std::vector<double>(ens.size(), 0.0)};

    OdeOptions ode;
    ode.rel_tol = opt.tol;
    ode.abs_tol = opt.tol;
    ode.h_min = opt.h_min;
    ode.h_init = h_next;

    StepResult res;
    double t_acc = ens.t;
    auto observer = [&](double t, std::span<const double>, std::span<const double>, double h) {
        t_acc = t;
        res.h_used = h;
    };
    std::size_t accepted = 0;
    auto halt = [&](double, std::span<const double>) { return ++accepted >= 1; };

    const auto stats = integrate_adaptive(rhs, y, ens.t, ens.t + 1e30, ode, observer, halt);
    if (stats.reason == StopReason::MinStep) {
        res.accepted = false;
        res.signal = BlowupSignal::StepCollapse;
        return res;
    }
    res.accepted = true;
    unflatten(y, t_acc, ens);
    h_next = stats.last_step;

    const auto sc = scan_state(lay, y, ens.L, ens.mode);
    if (!(sc.min_density > 0.0)) {
        throw IntegrationError("step_field: density became nonpositive");
    }
    if (sc.min_q < -opt.theta_blow) {
        res.signal = BlowupSignal::QThreshold;
    } else if (sc.min_gap < opt.crossing_delta_rel * ens.L) {
        res.signal = BlowupSignal::Crossing;
    }
    return res;
}

EnergyAuditReport energy_audit(const FieldResult& run, double tol) {
    if (run.snapshots.empty()) {
        throw std::invalid_argument("energy_audit: run has no snapshots");
    }
    const std::size_t n = run.snapshots.front().x.size();
    EnergyAuditReport report;
    report.per_characteristic.resize(n);
    auto energy = [](const FieldSnapshot& s, std::size_t i) {
        return s.V[i] * s.V[i] + s.E[i] * s.E[i];
    };
    bool monotone = true;
    for (std::size_t i = 0; i < n; ++i) {
        EnergyAuditEntry& e = report.per_characteristic[i];
        e.initial = energy(run.snapshots.front(), i);
        double prev = e.initial;
        for (std::size_t k = 1; k < run.snapshots.size(); ++k) {
            const double cur = energy(run.snapshots[k], i);
            e.max_increase = std::max(e.max_increase, cur - prev);
            prev = cur;
        }
        e.final_energy = prev;
        const double d_final = run.snapshots.back().dissipated[i];
        e.budget_residual = std::abs(e.final_energy + d_final - e.initial) / (1.0 + e.initial);
        const double allow = 10.0 * tol * (1.0 + e.initial);
        if (e.max_increase > allow) monotone = false;
        report.max_increase = std::max(report.max_increase, e.max_increase / (1.0 + e.initial));
        report.max_budget_residual = std::max(report.max_budget_residual, e.budget_residual);
        report.tol_used = std::max(report.tol_used, allow);
    }
    report.monotone = monotone;
    return report;
}

bool VAtBlowupReport::v_abs_decreasing_last_efold() const {
    if (checkpoints.size() < 2) return false;
    const double deepest = 1.0 - checkpoints.back().s;
    bool any = false;
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
        const double depth_prev = 1.0 - checkpoints[i - 1].s;
        if (depth_prev < deepest / std::exp(1.0)) continue;
        any = true;
        if (!(std::abs(checkpoints[i].V) < std::abs(checkpoints[i - 1].V))) return false;
    }
    return any;
}

bool VAtBlowupReport::v_abs_decreasing_last_decade() const {
    if (checkpoints.size() < 2) return false;
    const double deepest = 1.0 - checkpoints.back().s;
    bool any = false;
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
        const double depth_prev = 1.0 - checkpoints[i - 1].s;
        if (depth_prev < deepest / 10.0) continue;
        any = true;
        if (!(std::abs(checkpoints[i].V) < std::abs(checkpoints[i - 1].V))) return false;
    }
    return any;
}

VAtBlowupReport v_at_blowup(const FieldResult& run, const DampingSpec& spec, double decades,
                            int points_per_decade, double tol) {
    if (run.verdict.kind != VerdictKind::BlowUp) {
        throw std::invalid_argument("v_at_blowup: run did not blow up");
    }
    if (run.system != SystemKind::EulerPoisson) {
        throw std::invalid_argument("v_at_blowup: refinement applies to the coupled system");
    }
    const std::size_t i = run.blowup_index;
    const auto& fs = run.final_state;
    const double s_h = fs.s[i];
    const double q_h = fs.q[i];
    if (!(q_h < 0.0) || !(1.0 - s_h > 0.0)) {
        throw std::domain_error("v_at_blowup: blow-up characteristic is not in the escaping "
                                "regime (q < 0, s < 1)");
    }

    const double eps = spec.epsilon();
    bool invalid = false;
    auto rhs = [&](double s, std::span<const double> y, std::span<double> dy) {
        const double V = y[0], E = y[1], q = y[2];
        const double density = 1.0 - s;
        if (!(q < 0.0) || !(density > 0.0)) {
            invalid = true;
            std::fill(dy.begin(), dy.end(), kNan);
            return;
        }
        const double den = density * q;
        const double nu = eps * spec.f(density);
        dy[0] = (-E - nu * V) / den;
        dy[1] = V / den;
        dy[2] = -(q * q + s) / den - nu / density;
        dy[3] = 1.0 / den;
    };

    const double depth0 = 1.0 - s_h;
    const double s_deep = 1.0 - depth0 * std::pow(10.0, decades);

    Trace trace;
    std::vector<double> y{fs.V[i], fs.E[i], q_h, fs.t};
    {
        std::vector<double> dy0(4);
        rhs(s_h, y, std::span<double>(dy0));
        trace.push(s_h, y, dy0, 0.0);
    }
    OdeOptions ode;
    ode.rel_tol = tol;
    ode.abs_tol = tol * 1e-2;
    auto observer = [&](double s, std::span<const double> yy, std::span<const double> dyy,
                        double h) { trace.push(s, yy, dyy, h); };
    auto halt = [&](double, std::span<const double>) { return invalid; };
    const auto stats = integrate_adaptive(rhs, y, s_h, s_deep, ode, observer, halt);
    if (invalid || stats.reason != StopReason::ReachedEnd) {
        throw IntegrationError("v_at_blowup: refinement left the escaping regime");
    }

    VAtBlowupReport report;
    const int total = static_cast<int>(std::round(decades * points_per_decade));
    for (int k = 0; k <= total; ++k) {
        const double depth = depth0 * std::pow(10.0, static_cast<double>(k) / points_per_decade);
        const double s = 1.0 - depth;
        VTrendPoint p;
        p.s = s;
        p.V = trace.value_at(s, 0);
        p.E = trace.value_at(s, 1);
        p.q = trace.value_at(s, 2);
        p.t = trace.value_at(s, 3);
        report.checkpoints.push_back(p);
    }
    report.v_last = y[0];
    const double mid_depth = depth0 * std::pow(10.0, decades / 2.0);
    report.v_abs_mid = std::abs(trace.value_at(1.0 - mid_depth, 0));
    return report;
}

}  // namespace coldplasma
