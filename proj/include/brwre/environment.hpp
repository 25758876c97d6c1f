// environment.hpp
//
// The i.i.d. time-random environment: per-state offspring and moving laws
// with analytic moments, environment sampling, and the prefix aggregates
// (product of means, centering, summed central moments) that every other
// module reads.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brwre/rng.hpp"

namespace brwre {

struct InvalidModel : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EmptyEnvironment : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateLaw : std::domain_error {
    using std::domain_error::domain_error;
};

/// Highest moment order tracked per step.
inline constexpr int kMaxMomentOrder = 6;

/// Indexed by order nu; entries 0 and 1 are unused (kept zero).
using MomentArray = std::array<double, kMaxMomentOrder + 1>;

enum class MovingFamily { gaussian, uniform, shifted_exponential, two_point };

/// Displacement law G of one environment state.
class MovingLaw {
public:
    static MovingLaw gaussian(double mean, double sd);
    static MovingLaw uniform(double a, double b);
    /// shift + Exp(rate).
    static MovingLaw shifted_exponential(double rate, double shift);
    /// x1 with probability p, otherwise x2.
    static MovingLaw two_point(double x1, double p, double x2);

    MovingFamily family() const noexcept { return family_; }
    const std::array<double, 3>& params() const noexcept { return params_; }

    double mean() const;
    /// E (X - mean)^nu for nu = 2..6.
    double central_moment(int nu) const;
    MomentArray central_moments() const;

    /// Lattice laws violate Cramer's condition.
    bool is_lattice() const noexcept { return family_ == MovingFamily::two_point; }

    double cdf(double x) const;
    /// Integral of the CDF from -infinity to y.
    double integrated_cdf(double y) const;

    /// Interval outside which the law has negligible (< 1e-17) mass.
    double lower_extent() const;
    double upper_extent() const;

    double sample(SplitMix64& rng) const;

    std::string describe() const;

private:
    MovingLaw(MovingFamily family, std::array<double, 3> params) : family_(family), params_(params) {}

    MovingFamily family_;
    std::array<double, 3> params_;
};

enum class OffspringFamily { explicit_pmf, poisson_truncated, geometric };

/// Offspring law p with finite support {0, ..., K}, K <= 1024.
class OffspringLaw {
public:
    static constexpr std::size_t kMaxSupport = 1024;

    static OffspringLaw explicit_pmf(std::vector<double> pmf);
    /// Poisson(rate) restricted to {0..cap} and renormalized.
    static OffspringLaw poisson_truncated(double rate, std::size_t cap);
    /// P(k) proportional to p (1-p)^k on {0..cap}.
    static OffspringLaw geometric(double p, std::size_t cap);

    OffspringFamily family() const noexcept { return family_; }
    const std::vector<double>& pmf() const noexcept { return pmf_; }
    double mean() const noexcept { return mean_; }
    /// Family parameters as given at construction (rate or p, cap).
    const std::array<double, 2>& params() const noexcept { return params_; }

    std::uint32_t sample(SplitMix64& rng) const;

    std::string describe() const;

private:
    OffspringLaw(OffspringFamily family, std::vector<double> pmf, std::array<double, 2> params);

    OffspringFamily family_;
    std::vector<double> pmf_;
    std::vector<double> cumulative_;
    std::array<double, 2> params_;
    double mean_ = 0.0;
};

struct EnvState {
    OffspringLaw offspring;
    MovingLaw moving;
};

struct StateMoments {
    double mean_offspring = 0.0;  // m
    double mean_step = 0.0;       // l
    MomentArray central{};        // sigma^(nu), nu = 2..6
};

StateMoments state_moments(const EnvState& state);

/// gamma_2..gamma_6 of a centered variable from its central moments.
MomentArray cumulants_from_central_moments(const MomentArray& central);

struct WeightedState {
    double probability;
    EnvState state;
};

/// Finite mixture over environment states.
class EnvironmentModel {
public:
    explicit EnvironmentModel(std::vector<WeightedState> states);

    std::size_t size() const noexcept { return states_.size(); }
    const WeightedState& operator[](std::size_t i) const { return states_.at(i); }
    const std::vector<WeightedState>& states() const noexcept { return states_; }
    const StateMoments& moments(std::size_t i) const { return moments_.at(i); }
    const MomentArray& cumulants(std::size_t i) const { return cumulants_.at(i); }

    /// sum_i p_i ln m_i; -inf if some state has mean zero.
    double expected_log_mean() const;
    /// sum_i p_i sigma_i^(nu).
    double expected_central_moment(int nu) const;
    /// Variance over states of sigma^(nu).
    double central_moment_variance(int nu) const;

    std::size_t sample_state(SplitMix64& rng) const;

private:
    std::vector<WeightedState> states_;
    std::vector<StateMoments> moments_;
    std::vector<MomentArray> cumulants_;
    std::vector<double> cumulative_;
};

enum class FindingLevel { pass, warn, fail };

struct Finding {
    FindingLevel level;
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;
    double expected_log_mean = 0.0;
    MomentArray expected_central{};

    bool passed() const;
    bool has_warnings() const;
};

ValidationReport validate_model(const EnvironmentModel& model);

/// A realized environment xi_0..xi_{n-1} together with its prefix aggregates.
class RealizedEnvironment {
public:
    RealizedEnvironment(std::shared_ptr<const EnvironmentModel> model, std::vector<std::size_t> sequence);

    std::size_t length() const noexcept { return sequence_.size(); }
    const EnvironmentModel& model() const noexcept { return *model_; }
    const std::shared_ptr<const EnvironmentModel>& model_ptr() const noexcept { return model_; }
    const std::vector<std::size_t>& sequence() const noexcept { return sequence_; }

    const EnvState& step(std::size_t j) const { return (*model_)[sequence_.at(j)].state; }
    const StateMoments& step_moments(std::size_t j) const { return model_->moments(sequence_.at(j)); }
    const MomentArray& step_cumulants(std::size_t j) const { return model_->cumulants(sequence_.at(j)); }

    /// Prefix aggregates, k = 0..length().
    double pi(std::size_t k) const { return pi_.at(k); }
    double log_pi(std::size_t k) const { return log_pi_.at(k); }
    double ell(std::size_t k) const { return ell_.at(k); }
    double s_nu(int nu, std::size_t k) const;
    double s(std::size_t k) const;

    /// sum over j in [begin, end) of gamma_{nu j}.
    double cumulant_sum(int nu, std::size_t begin, std::size_t end) const;

private:
    std::shared_ptr<const EnvironmentModel> model_;
    std::vector<std::size_t> sequence_;
    std::vector<double> pi_;
    std::vector<double> log_pi_;
    std::vector<double> ell_;
    std::array<std::vector<double>, kMaxMomentOrder + 1> s_;
    std::array<std::vector<double>, kMaxMomentOrder + 1> cumulant_prefix_;
};

RealizedEnvironment sample_environment(std::shared_ptr<const EnvironmentModel> model, std::size_t n,
                                       std::uint64_t seed);
RealizedEnvironment sample_environment(const EnvironmentModel& model, std::size_t n, std::uint64_t seed);

}  // namespace brwre
