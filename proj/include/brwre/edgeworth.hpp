// edgeworth.hpp
//
// Edgeworth expansion of the distribution function of a normalized sum of
// independent, non-identically distributed steps: windowed cumulant
// coefficients, the correction polynomials Q_nu (generic partition sum and
// the closed forms used by the branching expansions), and independent
// oracles for the true distribution function.

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "brwre/environment.hpp"
#include "brwre/special_functions.hpp"

namespace brwre {

struct DegenerateWindow : std::domain_error {
    using std::domain_error::domain_error;
};

struct InsufficientCoefficients : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct OracleBudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Steps [begin, end) of a realized environment viewed as independent
/// centered summands.
class CumulantWindow {
public:
    CumulantWindow(const RealizedEnvironment& env, std::size_t begin, std::size_t end);

    /// The whole prefix [0, n).
    static CumulantWindow prefix(const RealizedEnvironment& env, std::size_t n) { return {env, 0, n}; }

    const RealizedEnvironment& env() const noexcept { return *env_; }
    std::size_t begin() const noexcept { return begin_; }
    std::size_t end() const noexcept { return end_; }
    std::size_t length() const noexcept { return end_ - begin_; }

    /// B^2 = sum of step variances over the window.
    double variance() const noexcept { return cumulant_sums_[2]; }
    double scale() const noexcept { return scale_; }
    /// sum over the window of gamma_nu, nu = 2..6.
    double cumulant_sum(int nu) const;
    /// sum over the window of the step means.
    double mean_shift() const noexcept { return mean_shift_; }

private:
    const RealizedEnvironment* env_;
    std::size_t begin_;
    std::size_t end_;
    MomentArray cumulant_sums_{};
    double scale_ = 0.0;
    double mean_shift_ = 0.0;
};

/// lambda_nu for nu = 3..max_order.
struct EdgeworthCoefficients {
    int max_order = 2;
    MomentArray lambda{};

    double at(int nu) const;
};

/// lambda_nu = L^((nu-2)/2) B^(-nu) sum_j gamma_{nu j},  L = window length.
EdgeworthCoefficients lambda_coeffs(const CumulantWindow& window, int max_order);

/// Nonnegative integer solutions (k_1..k_nu) of k_1 + 2 k_2 + ... + nu k_nu = nu.
std::vector<std::vector<int>> edgeworth_partitions(int nu);

/// Q_nu as a Hermite-phi series from the generic partition sum, nu = 1..4.
HermitePhiSeries q_series_generic(int nu, const EdgeworthCoefficients& coeffs);
double q_poly_generic(int nu, const EdgeworthCoefficients& coeffs, double x);

/// Q_{nu,n}(t) / n^(nu/2) from the closed-form sums over the first n steps.
HermitePhiSeries q_closed_series(int nu, const RealizedEnvironment& env, std::size_t n);
double q1_closed(const RealizedEnvironment& env, std::size_t n, double t);
double q2_closed(const RealizedEnvironment& env, std::size_t n, double t);
double q3_closed(const RealizedEnvironment& env, std::size_t n, double t);

/// Phi(x) + sum_{nu=1}^{order-2} Q_nu(x) L^(-nu/2), order in 3..6. Not clamped.
double edgeworth_cdf(const CumulantWindow& window, int order, double x);

/// The correction part of edgeworth_cdf as a series in x.
HermitePhiSeries edgeworth_correction(const CumulantWindow& window, int order);

/// Clamp to [0, 1] for display only.
double clamp_probability(double p) noexcept;

struct MonteCarloOracle {
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
};

struct GridConvolutionOracle {
    /// Grid step as a fraction of B.
    double step_fraction = 1.0 / 400.0;
    /// Grid covers +-half_width * B.
    double half_width = 12.0;
    /// Combine step h and h/2 to cancel the O(h^2) discretization error.
    bool richardson = true;
};

using OracleMethod = std::variant<MonteCarloOracle, GridConvolutionOracle>;

struct OracleValue {
    double value = 0.0;
    /// Monte Carlo: 3 sigma binomial half-width. Grid: internal consistency estimate.
    double uncertainty = 0.0;
};

/// Distribution function of (sum_{j in window} (L_j - l_j)) / B, precomputed
/// once and queried many times.
class WindowSumCdf {
public:
    WindowSumCdf(const CumulantWindow& window, const OracleMethod& method);

    OracleValue operator()(double x) const;

private:
    struct Lattice {
        double step = 0.0;
        long first_index = 0;
        std::vector<double> mass;
        double below = 0.0;
    };

    static Lattice convolve(const CumulantWindow& window, double step, double half_width);
    double lattice_cdf(const Lattice& lattice, double y) const;

    const RealizedEnvironment* env_;
    std::size_t last_step_ = 0;
    double scale_ = 1.0;
    bool monte_carlo_ = false;
    bool richardson_ = false;
    std::vector<double> sorted_samples_;
    Lattice coarse_;
    Lattice fine_;
};

OracleValue oracle_cdf(const CumulantWindow& window, double x, const OracleMethod& method);

}  // namespace brwre
