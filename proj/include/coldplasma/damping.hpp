#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coldplasma {

/// Thrown when an analytic criterion needs tail information the spec
/// does not carry (custom damping law without a declared tail exponent).
class UnsupportedAnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Density-dependent damping law nu(n) = epsilon * f(n).
///
/// Two forms are supported: a power law f(n) = nu0 * n^gamma with exact
/// derivative, and a user-supplied f / f' pair with a declared power-law
/// tail exponent. The tail exponent is what the global-smoothness
/// criteria consume; automatic tail classification from samples is not
/// attempted (integral divergence is undecidable from finitely many
/// evaluations).
class DampingSpec {
public:
    enum class Kind { PowerLaw, Custom };

    static DampingSpec power_law(double epsilon, double nu0, double gamma);

    static DampingSpec custom(double epsilon,
                              std::function<double(double)> f,
                              std::function<double(double)> fprime,
                              std::optional<double> tail_gamma);

    /// epsilon = 0; f irrelevant (kept as the constant 1 power law).
    static DampingSpec none();

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
    [[nodiscard]] bool is_power_law() const noexcept { return kind_ == Kind::PowerLaw; }
    [[nodiscard]] double nu0() const noexcept { return nu0_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    [[nodiscard]] std::optional<double> tail_gamma() const noexcept { return tail_gamma_; }

    /// f(n) for n > 0.
    [[nodiscard]] double f(double n) const;
    /// f'(n) for n > 0. Exact for power laws.
    [[nodiscard]] double fprime(double n) const;
    /// nu(n) = epsilon * f(n). Throws std::domain_error for n <= 0
    /// (density must stay positive).
    [[nodiscard]] double eval(double n) const;

    /// Returns a copy with a different epsilon (same f).
    [[nodiscard]] DampingSpec with_epsilon(double epsilon) const;

private:
    DampingSpec() = default;

    Kind kind_ = Kind::PowerLaw;
    double epsilon_ = 0.0;
    double nu0_ = 1.0;
    double gamma_ = 0.0;
    std::function<double(double)> f_;
    std::function<double(double)> fprime_;
    std::optional<double> tail_gamma_;
};

/// True iff the improper integral of f(eta)/eta^2 over [eta0, infinity)
/// diverges. For a power-law tail exponent gamma this is gamma >= 1.
/// This is the sharp criterion for suppressing blow-up for every datum.
[[nodiscard]] bool check_suppression_condition(const DampingSpec& spec);

/// The milder criterion covering only the degenerate (parabolic, C = 0)
/// data: power-law tail gamma > 1/2. The boundary gamma = 1/2 returns
/// false (the strict inequality is kept; see README notes).
[[nodiscard]] bool check_parabolic_condition(const DampingSpec& spec);

struct TailRegularityReport {
    /// Estimate of lim eta f'(eta)/f(eta) (value at the largest grid point).
    double limit_estimate = 0.0;
    /// Relative spread of the estimate over the last decade of the grid.
    double last_decade_spread = 0.0;
    bool passes = false;
    /// eta, estimate pairs actually used.
    std::vector<std::pair<double, double>> estimates;
    /// Grid points where f(eta) = 0 made the ratio undefined.
    std::vector<double> division_errors;
};

/// Estimates eta*f'(eta)/f(eta) on the tail of the grid and checks that
/// the last decade settles to a constant within 1e-3 relative spread.
/// Grid must be strictly increasing with max >= 1e4.
[[nodiscard]] TailRegularityReport check_tail_regularity(const DampingSpec& spec,
                                                         std::span<const double> grid);

}  // namespace coldplasma
