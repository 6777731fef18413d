#include "coldplasma/ode.hpp"

#include <algorithm>
#include <cmath>

namespace coldplasma {

namespace {

double hermite(double t, const TraceNode& a, const TraceNode& b, std::size_t k) {
    const double h = b.t - a.t;
    if (h == 0.0) return a.y[k];
    const double u = (t - a.t) / h;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1;
    const double h10 = u3 - 2 * u2 + u;
    const double h01 = -2 * u3 + 3 * u2;
    const double h11 = u3 - u2;
    return h00 * a.y[k] + h10 * h * a.dy[k] + h01 * b.y[k] + h11 * h * b.dy[k];
}

}  // namespace

std::size_t Trace::locate(double t) const {
    const bool fwd = nodes_.back().t >= nodes_.front().t;
    auto cmp = [fwd](const TraceNode& n, double v) { return fwd ? n.t < v : n.t > v; };
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t, cmp);
    if (it == nodes_.begin()) return 0;
    if (it == nodes_.end()) return nodes_.size() - 2;
    return static_cast<std::size_t>(it - nodes_.begin()) - 1;
}

double Trace::value_at(double t, std::size_t k) const {
    if (nodes_.size() == 1) return nodes_.front().y[k];
    const std::size_t i = locate(t);
    return hermite(t, nodes_[i], nodes_[i + 1], k);
}

double Trace::first_crossing(std::size_t k, double target) const {
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
        const double va = nodes_[i].y[k] - target;
        const double vb = nodes_[i + 1].y[k] - target;
        if (va == 0.0) return nodes_[i].t;
        if (va * vb > 0.0) continue;
        // bisect the Hermite cubic on [t_i, t_{i+1}]
        double lo = nodes_[i].t, hi = nodes_[i + 1].t;
        double flo = va;
        for (int iter = 0; iter < 200; ++iter) {
            const double mid = 0.5 * (lo + hi);
            const double fm = hermite(mid, nodes_[i], nodes_[i + 1], k) - target;
            if (fm == 0.0) return mid;
            if ((fm > 0.0) == (flo > 0.0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double Trace::median_step() const {
    // Time-weighted median of h(t): a per-step median would be dominated
    // by the shrinking steps piling up near a singularity.
    std::vector<double> hs;
    hs.reserve(nodes_.size());
    double total = 0.0;
    for (const auto& n : nodes_) {
        if (n.h > 0.0) {
            hs.push_back(n.h);
            total += n.h;
        }
    }
    if (hs.empty()) return 0.0;
    std::sort(hs.begin(), hs.end());
    double acc = 0.0;
    for (double h : hs) {
        acc += h;
        if (acc >= 0.5 * total) return h;
    }
    return hs.back();
}

}  // namespace coldplasma
