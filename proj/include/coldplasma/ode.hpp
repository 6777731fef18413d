#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace coldplasma {

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OdeOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-8;
    /// 0 = choose automatically.
    double h_init = 0.0;
    double h_min = 1e-14;
    double h_max = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 200'000'000;
};

enum class StopReason {
    ReachedEnd,    // integrated to t_end
    Halted,        // halt predicate fired after an accepted step
    MinStep,       // controller pushed the step below h_min
};

struct IntegrationStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double last_step = 0.0;
    StopReason reason = StopReason::ReachedEnd;
};

/// Explicit embedded Dormand-Prince 5(4) pair with PI step-size control
/// (FSAL). State is a flat vector; direction of integration follows the
/// sign of t_end - t0. The observer is called after every accepted step
/// as observer(t, y, dydt, h); the halt predicate halt(t, y) stops the
/// run cleanly (StopReason::Halted) after an accepted step.
///
/// The error norm is the max norm over components scaled by
/// abs_tol + rel_tol * max(|y_i|, |y_new_i|), matching a shared step for
/// ensembles controlled on the worst particle.
template <class Rhs, class Observer, class Halt>
IntegrationStats integrate_adaptive(Rhs&& rhs, std::vector<double>& y, double t0, double t_end,
                                    const OdeOptions& opt, Observer&& observer, Halt&& halt) {
    // Butcher tableau (Dormand & Prince 1980).
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // 5th-minus-4th order error weights.
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const std::size_t n = y.size();
    const double dir = (t_end >= t0) ? 1.0 : -1.0;
    const double span = std::abs(t_end - t0);
    if (span == 0.0) return {};
    if (!(opt.rel_tol > 0.0) || !(opt.abs_tol > 0.0)) {
        throw std::invalid_argument("ode: tolerances must be positive");
    }

    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    std::vector<double> ytmp(n), ynew(n);

    double t = t0;
    rhs(t, std::span<const double>(y), std::span<double>(k1));

    // Initial step: conservative curvature-free guess from the first
    // derivative, clipped to the span.
    double h;
    if (opt.h_init > 0.0) {
        h = std::min(opt.h_init, span);
    } else {
        double ynorm = 0.0, dnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ynorm = std::max(ynorm, std::abs(y[i]));
            dnorm = std::max(dnorm, std::abs(k1[i]));
        }
        const double scale = opt.abs_tol + opt.rel_tol * ynorm;
        h = (dnorm > 0.0) ? 0.01 * std::pow(scale / dnorm, 0.2) : 1e-6 * span;
        h = std::min({h, 1e-2 * span, opt.h_max});
        h = std::max(h, opt.h_min);
    }

    IntegrationStats stats;
    double err_prev = 1.0;
    constexpr double safety = 0.9, min_factor = 0.2, max_factor = 10.0;
    constexpr double pi_alpha = 0.7 / 5.0, pi_beta = 0.4 / 5.0;

    while (dir * (t_end - t) > 0.0) {
        if (stats.accepted + stats.rejected >= opt.max_steps) {
            throw IntegrationError("ode: step budget exhausted");
        }
        if (h < opt.h_min) {
            stats.last_step = h;
            stats.reason = StopReason::MinStep;
            return stats;
        }
        // Clamping to the remaining span must not look like step collapse.
        const double h_exec = std::min(h, std::abs(t_end - t));
        const double hs = dir * h_exec;

        auto stage = [&](std::vector<double>& k, double c, auto&&... terms) {
            for (std::size_t i = 0; i < n; ++i) {
                ytmp[i] = y[i] + hs * (... + (terms.first * terms.second[i]));
            }
            rhs(t + c * hs, std::span<const double>(ytmp), std::span<double>(k));
        };
        using P = std::pair<double, const std::vector<double>&>;
        stage(k2, c2, P{a21, k1});
        stage(k3, c3, P{a31, k1}, P{a32, k2});
        stage(k4, c4, P{a41, k1}, P{a42, k2}, P{a43, k3});
        stage(k5, c5, P{a51, k1}, P{a52, k2}, P{a53, k3}, P{a54, k4});
        stage(k6, 1.0, P{a61, k1}, P{a62, k2}, P{a63, k3}, P{a64, k4}, P{a65, k5});
        for (std::size_t i = 0; i < n; ++i) {
            ynew[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        }
        rhs(t + hs, std::span<const double>(ynew), std::span<double>(k7));

        double err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            const double ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                    e6 * k6[i] + e7 * k7[i]);
            const double scale =
                opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err = std::max(err, std::abs(ei) / scale);
            if (!std::isfinite(ynew[i])) finite = false;
        }
        if (!finite) err = std::max(err, 1e10);

        if (err <= 1.0) {
            t += hs;
            y.swap(ynew);
            k1.swap(k7);  // FSAL
            ++stats.accepted;
            stats.last_step = h_exec;
            observer(t, std::span<const double>(y), std::span<const double>(k1), h_exec);
            if (halt(t, std::span<const double>(y))) {
                stats.reason = StopReason::Halted;
                return stats;
            }
            const double e = std::max(err, 1e-10);
            double factor = safety * std::pow(e, -pi_alpha) * std::pow(err_prev, pi_beta);
            factor = std::clamp(factor, min_factor, max_factor);
            err_prev = e;
            h = std::min(h_exec * factor, opt.h_max);
        } else {
            ++stats.rejected;
            const double factor = std::max(safety * std::pow(err, -0.2), min_factor);
            h = h_exec * factor;
        }
    }
    stats.reason = StopReason::ReachedEnd;
    return stats;
}

/// Accepted-step record with the derivative, enough for cubic Hermite
/// interpolation between nodes.
struct TraceNode {
    double t;
    std::vector<double> y;
    std::vector<double> dy;
    double h;  // step that produced this node (0 at the initial node)
};

class Trace {
public:
    void reserve(std::size_t n) { nodes_.reserve(n); }
    void push(double t, std::span<const double> y, std::span<const double> dy, double h) {
        nodes_.push_back(TraceNode{t, {y.begin(), y.end()}, {dy.begin(), dy.end()}, h});
    }
    [[nodiscard]] bool empty() const noexcept { return nodes_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] const TraceNode& operator[](std::size_t i) const { return nodes_[i]; }
    [[nodiscard]] const TraceNode& front() const { return nodes_.front(); }
    [[nodiscard]] const TraceNode& back() const { return nodes_.back(); }
    [[nodiscard]] const std::vector<TraceNode>& nodes() const noexcept { return nodes_; }

    /// Cubic Hermite value of component k at time t (t within the trace
    /// span; monotone t assumed).
    [[nodiscard]] double value_at(double t, std::size_t k) const;

    /// Earliest time in [nodes[i].t, nodes[i+1].t] at which component k
    /// crosses `target`, searching the whole trace. Returns nan if no
    /// bracketing interval exists.
    [[nodiscard]] double first_crossing(std::size_t k, double target) const;

    [[nodiscard]] double median_step() const;

private:
    [[nodiscard]] std::size_t locate(double t) const;
    std::vector<TraceNode> nodes_;
};

}  // namespace coldplasma
