// simulator.hpp
//
// Quenched branching random walk: given a realized environment, grows the
// genealogical tree generation by generation and records particle positions.
//
// Random stream contract (SplitMix64 seeded with SimConfig::seed): within a
// generation particles are visited in stored order; for each particle the
// offspring count is drawn first, then that particle's child displacements in
// child order. Children are appended in the same order.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brwre/environment.hpp"

namespace brwre {

inline constexpr std::size_t kMaxGenerations = 64;

struct SimConfig {
    std::size_t n_max = 1;
    std::size_t particle_cap = 2'000'000;
    std::uint64_t seed = 0;
    std::optional<std::size_t> track_ancestors_at;

    void validate() const;
};

struct GenerationSnapshot {
    std::size_t generation = 0;
    std::vector<double> positions;
    /// Index of each particle's parent in the previous generation (empty at 0).
    std::vector<std::uint32_t> parent_ids;
    /// Index of each particle's generation-k ancestor when tracking at k <= generation.
    std::vector<std::uint32_t> ancestor_ids;
    std::vector<double> sorted_positions;

    std::size_t count() const noexcept { return positions.size(); }
};

enum class TerminationKind { completed, extinct, cap_exceeded };

struct Termination {
    TerminationKind kind = TerminationKind::completed;
    /// First empty generation (extinct) or the generation that overflowed (cap).
    std::size_t generation = 0;

    std::string describe() const;
};

struct GenerationUnavailable : std::out_of_range {
    GenerationUnavailable(std::size_t n, Termination why);
    Termination termination;
};

struct EnvironmentTooShort : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class Trajectory {
public:
    Trajectory(std::shared_ptr<const RealizedEnvironment> env, SimConfig config);

    const RealizedEnvironment& env() const noexcept { return *env_; }
    const std::shared_ptr<const RealizedEnvironment>& env_ptr() const noexcept { return env_; }
    const SimConfig& config() const noexcept { return config_; }
    const Termination& termination() const noexcept { return termination_; }

    /// Highest generation with a recorded snapshot.
    std::size_t last_generation() const noexcept { return snapshots_.size() - 1; }
    bool has_generation(std::size_t n) const noexcept { return n < snapshots_.size(); }
    /// Throws GenerationUnavailable past the recorded range.
    const GenerationSnapshot& snapshot(std::size_t n) const;

    /// Generation-k ancestor index of every particle of generation n.
    std::vector<std::uint32_t> ancestor_ids(std::size_t n, std::size_t k) const;

private:
    friend Trajectory simulate(std::shared_ptr<const RealizedEnvironment>, const SimConfig&);

    std::shared_ptr<const RealizedEnvironment> env_;
    SimConfig config_;
    std::vector<GenerationSnapshot> snapshots_;
    Termination termination_;
};

Trajectory simulate(std::shared_ptr<const RealizedEnvironment> env, const SimConfig& config);

/// #{u : S_u <= threshold} by binary search on the sorted positions.
std::size_t counting_measure(const GenerationSnapshot& snap, double threshold);

/// Pi_n^{-1} Z_n(ell_n + s_n t).
double normalized_lhs(const Trajectory& traj, std::size_t n, double t);

}  // namespace brwre
