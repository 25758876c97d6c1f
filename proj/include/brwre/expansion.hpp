// expansion.hpp
//
// Right-hand sides of the order 0..3 expansions of Pi_n^{-1} Z_n(ell_n + s_n t),
// residuals against simulated trajectories, and the A + B split of the
// normalized counting measure at an intermediate generation k.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "brwre/edgeworth.hpp"
#include "brwre/martingales.hpp"
#include "brwre/simulator.hpp"

namespace brwre {

inline constexpr int kMaxExpansionOrder = 3;

/// Correction series of one generation n, ready to assemble right-hand sides.
class ExpansionTerms {
public:
    ExpansionTerms(const RealizedEnvironment& env, std::size_t n);

    std::size_t n() const noexcept { return n_; }
    double s() const noexcept { return s_; }

    /// Q_{nu,n}/n^{nu/2} differentiated `derivative` times, nu = 1..3.
    const HermitePhiSeries& q(int nu, int derivative = 0) const;

    /// Terms added when going from order-1 to order (order >= 1); order 0 is Phi(t) W.
    double increment(int order, double t, const LimitEstimates& limits) const;

    double rhs(int order, double t, const LimitEstimates& limits) const;
    std::array<double, kMaxExpansionOrder + 1> rhs_all(double t, const LimitEstimates& limits) const;

private:
    std::size_t n_;
    double s_;
    // q_[nu-1][d]
    std::array<std::array<HermitePhiSeries, 3>, 3> q_;
    std::array<HermitePhiSeries, 3> phi_;  // phi, phi', phi''
};

double rhs(int order, double t, std::size_t n, const RealizedEnvironment& env, const LimitEstimates& limits);

/// k_n = floor(n^beta).
std::size_t split_generation(std::size_t n, double beta);

enum class CdfProviderKind { exact_gaussian, edgeworth, oracle };

struct CdfProvider {
    CdfProviderKind kind = CdfProviderKind::exact_gaussian;
    int edgeworth_order = 5;
    GridConvolutionOracle grid;
};

struct ABDecomposition {
    std::size_t n = 0;
    std::size_t k = 0;
    double t = 0.0;
    double a = 0.0;
    double b = 0.0;
    double lhs_check = 0.0;

    /// |A + B - lhs| / (1 + |lhs|).
    double identity_error() const;
};

/// A + B split at generation k of the generation-n counting measure.
/// Builds the provider state once; evaluate at as many t as needed.
class ABDecomposer {
public:
    ABDecomposer(const Trajectory& traj, std::size_t n, std::size_t k, const CdfProvider& provider);

    ABDecomposition operator()(double t) const;

private:
    double window_cdf(double x) const;

    const Trajectory* traj_;
    std::size_t n_;
    std::size_t k_;
    CdfProvider provider_;
    std::optional<CumulantWindow> window_;
    std::optional<WindowSumCdf> oracle_;
    HermitePhiSeries edgeworth_;
    /// Generation-n positions grouped by generation-k ancestor, sorted within groups.
    std::vector<double> grouped_positions_;
    std::vector<std::size_t> group_offsets_;
};

ABDecomposition ab_decompose(const Trajectory& traj, std::size_t n, std::size_t k, double t,
                             const CdfProvider& provider);

struct ResidualConfig {
    std::vector<std::size_t> n_list{8, 12, 16, 24, 32};
    std::vector<double> t_grid{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
    std::size_t replicas = 400;
    std::size_t first_replica = 0;
    std::uint64_t seed = 1;
    double beta = 0.12;
    std::size_t particle_cap = 2'000'000;
    bool compute_ab = true;
    CdfProvider ab_provider;
    unsigned workers = 1;
};

struct ResidualRecord {
    std::size_t replica = 0;
    std::size_t n = 0;
    double t = 0.0;
    double lhs = 0.0;
    std::array<double, kMaxExpansionOrder + 1> rhs{};
    std::array<double, kMaxExpansionOrder + 1> residual{};
    double a = 0.0;
    double b = 0.0;
    Termination termination;
    /// Completed without extinction or cap; only these enter fits.
    bool usable = false;
};

struct OrderFit {
    int order = 0;
    std::vector<double> n;
    std::vector<double> median_abs_residual;
    double slope = 0.0;
};

struct ResidualSuiteResult {
    std::vector<ResidualRecord> records;
    std::array<OrderFit, kMaxExpansionOrder + 1> fits;
    std::size_t usable_replicas = 0;
    std::size_t extinct_replicas = 0;
    std::size_t capped_replicas = 0;
    double max_ab_identity_error = 0.0;

    double median_abs_residual(int order, std::size_t n) const;
};

ResidualSuiteResult residual_suite(const EnvironmentModel& model, const ResidualConfig& config);

}  // namespace brwre
