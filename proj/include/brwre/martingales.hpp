// martingales.hpp
//
// The additive martingale W_n and the correction martingales N_{1,n},
// N_{2,n}, N_{3,n} along a trajectory, their truncations, limit proxies and
// an ensemble convergence diagnostic.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "brwre/simulator.hpp"

namespace brwre {

struct MartingaleValues {
    double w = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    double n3 = 0.0;

    double component(int i) const;
};

struct MartingaleSeries {
    /// Entry n holds generation n, n = 0..last recorded generation.
    std::vector<MartingaleValues> values;
    /// Running maximum of W_n.
    std::vector<double> w_star;
    /// True when the trajectory stopped on the particle cap before n_max.
    bool truncated_by_cap = false;

    std::size_t last_generation() const { return values.size() - 1; }
};

/// Martingale values of one generation snapshot.
MartingaleValues compute_generation(const RealizedEnvironment& env, const GenerationSnapshot& snap);

MartingaleSeries compute_series(const Trajectory& traj);

struct TruncatedValues {
    std::size_t generation = 0;
    double radius = 0.0;
    double w = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    double n3 = 0.0;
};

/// Sums restricted to |S_u - ell_k| <= radius (default radius = k).
///
/// The polynomial corrections use s_c^2 and s_c^(3) with c = centering_generation
/// (default k). With c = k the truncated values equal the full martingales once
/// the radius covers every particle; c = n reproduces the bridging quantities
/// that pair generation k_n with the time-n expansion.
TruncatedValues compute_truncated(const Trajectory& traj, std::size_t k, std::optional<double> radius = std::nullopt,
                                  std::optional<std::size_t> centering_generation = std::nullopt);

struct InsufficientData : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct LimitEstimates {
    double w = 0.0;
    double v1 = 0.0;
    double v2 = 0.0;
    double v3 = 0.0;
    std::size_t estimated_at = 0;
    /// Max absolute increment over the final quarter of generations.
    MartingaleValues stderr_proxy;
};

/// Minimum generation count for a limit estimate.
inline constexpr std::size_t kMinLimitGeneration = 8;

LimitEstimates estimate_limits(const MartingaleSeries& series);

struct ConvergenceReport {
    int component = 1;
    std::vector<double> generations;
    /// Median over replicas of |N_{i,n+1} - N_{i,n}|.
    std::vector<double> median_increment;
    double slope = 0.0;
    double decay_threshold = -0.5;
    bool decays = false;
};

/// Fits the log-log slope of the median one-step increment of N_i over
/// generations [first_generation, n_max). Replicas shorter than n_max are skipped.
ConvergenceReport convergence_diagnostic(std::span<const MartingaleSeries> ensemble, int component,
                                         std::size_t first_generation = 8, double decay_threshold = -0.5);

}  // namespace brwre
