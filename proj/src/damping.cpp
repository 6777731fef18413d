#include "coldplasma/damping.hpp"

#include <cmath>
#include <limits>

namespace coldplasma {

namespace {

double pow_gamma(double eta, double gamma) {
    // Hot path for the common exponents.
    if (gamma == 0.0) return 1.0;
    if (gamma == 1.0) return eta;
    if (gamma == 2.0) return eta * eta;
    if (gamma == 0.5) return std::sqrt(eta);
    return std::pow(eta, gamma);
}

void check_nonnegative_sampled(const DampingSpec& spec) {
    // f must be nonnegative; sample on a log grid eta in [1e-3, 1e6].
    constexpr int points_per_decade = 4;
    constexpr double lo = 1e-3, hi = 1e6;
    const int n = static_cast<int>(points_per_decade * std::log10(hi / lo)) + 1;
    for (int i = 0; i <= n; ++i) {
        const double eta = lo * std::pow(hi / lo, static_cast<double>(i) / n);
        const double v = spec.f(eta);
        if (!(v >= 0.0)) {
            throw std::domain_error("damping: f(eta) must be nonnegative, got f(" +
                                    std::to_string(eta) + ") = " + std::to_string(v));
        }
    }
}

}  // namespace

DampingSpec DampingSpec::power_law(double epsilon, double nu0, double gamma) {
    if (!(epsilon >= 0.0)) throw std::domain_error("damping: epsilon must be nonnegative");
    if (!(nu0 > 0.0)) throw std::domain_error("damping: nu0 must be positive");
    DampingSpec s;
    s.kind_ = Kind::PowerLaw;
    s.epsilon_ = epsilon;
    s.nu0_ = nu0;
    s.gamma_ = gamma;
    s.tail_gamma_ = gamma;
    return s;
}

DampingSpec DampingSpec::custom(double epsilon,
                                std::function<double(double)> f,
                                std::function<double(double)> fprime,
                                std::optional<double> tail_gamma) {
    if (!(epsilon >= 0.0)) throw std::domain_error("damping: epsilon must be nonnegative");
    if (!f || !fprime) throw std::invalid_argument("damping: custom spec needs f and fprime");
    DampingSpec s;
    s.kind_ = Kind::Custom;
    s.epsilon_ = epsilon;
    s.f_ = std::move(f);
    s.fprime_ = std::move(fprime);
    s.tail_gamma_ = tail_gamma;
    check_nonnegative_sampled(s);
    return s;
}

DampingSpec DampingSpec::none() { return power_law(0.0, 1.0, 0.0); }

double DampingSpec::f(double n) const {
    return kind_ == Kind::PowerLaw ? nu0_ * pow_gamma(n, gamma_) : f_(n);
}

double DampingSpec::fprime(double n) const {
    return kind_ == Kind::PowerLaw ? nu0_ * gamma_ * pow_gamma(n, gamma_ - 1.0) : fprime_(n);
}

double DampingSpec::eval(double n) const {
    if (!(n > 0.0)) throw std::domain_error("damping: density must be positive, got n = " +
                                            std::to_string(n));
    return epsilon_ * f(n);
}

DampingSpec DampingSpec::with_epsilon(double epsilon) const {
    if (!(epsilon >= 0.0)) throw std::domain_error("damping: epsilon must be nonnegative");
    DampingSpec s = *this;
    s.epsilon_ = epsilon;
    return s;
}

namespace {

double require_tail_gamma(const DampingSpec& spec, const char* what) {
    if (!spec.tail_gamma()) {
        throw UnsupportedAnalysisError(std::string("damping: ") + what +
                                       " needs a declared power-law tail exponent");
    }
    return *spec.tail_gamma();
}

}  // namespace

bool check_suppression_condition(const DampingSpec& spec) {
    // integral of f(eta)/eta^2 diverges iff the tail exponent is >= 1.
    return require_tail_gamma(spec, "suppression condition") >= 1.0;
}

bool check_parabolic_condition(const DampingSpec& spec) {
    // Strict inequality; gamma = 1/2 is the unresolved boundary and maps
    // to false.
    return require_tail_gamma(spec, "parabolic condition") > 0.5;
}

TailRegularityReport check_tail_regularity(const DampingSpec& spec,
                                           std::span<const double> grid) {
    if (grid.size() < 2) throw std::invalid_argument("tail regularity: grid needs >= 2 points");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw std::invalid_argument("tail regularity: grid must be strictly increasing");
        }
    }
    if (!(grid.back() >= 1e4)) {
        throw std::invalid_argument("tail regularity: grid must extend to at least 1e4");
    }

    TailRegularityReport report;
    const double eta_max = grid.back();
    const double decade_lo = eta_max / 10.0;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::size_t count = 0;
    for (double eta : grid) {
        const double fv = spec.f(eta);
        if (fv == 0.0) {
            report.division_errors.push_back(eta);
            continue;
        }
        const double est = eta * spec.fprime(eta) / fv;
        report.estimates.emplace_back(eta, est);
        if (eta >= decade_lo) {
            lo = std::min(lo, est);
            hi = std::max(hi, est);
            sum += est;
            ++count;
        }
    }

    if (count == 0) {
        report.passes = false;
        return report;
    }
    const double mean = sum / static_cast<double>(count);
    report.limit_estimate = report.estimates.back().second;
    report.last_decade_spread = (hi - lo) / std::max(std::abs(mean), 1e-9);
    report.passes = report.division_errors.empty() && report.last_decade_spread < 1e-3;
    return report;
}

}  // namespace coldplasma
