// simulator.cpp

#include "brwre/simulator.hpp"

#include <algorithm>
#include <limits>

namespace brwre {

void SimConfig::validate() const {
    if (n_max < 1 || n_max > kMaxGenerations) throw std::invalid_argument("n_max must lie in [1, 64]");
    if (particle_cap < 1 || particle_cap > std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("particle_cap must lie in [1, 2^32 - 1]");
    }
    if (track_ancestors_at && *track_ancestors_at > n_max) {
        throw std::invalid_argument("ancestor tracking generation exceeds n_max");
    }
}

std::string Termination::describe() const {
    switch (kind) {
        case TerminationKind::completed: return "completed";
        case TerminationKind::extinct: return "extinct_at(" + std::to_string(generation) + ")";
        case TerminationKind::cap_exceeded: return "cap_exceeded_at(" + std::to_string(generation) + ")";
    }
    return "unknown";
}

GenerationUnavailable::GenerationUnavailable(std::size_t n, Termination why)
    : std::out_of_range("generation " + std::to_string(n) + " unavailable: " + why.describe()),
      termination(why) {}

Trajectory::Trajectory(std::shared_ptr<const RealizedEnvironment> env, SimConfig config)
    : env_(std::move(env)), config_(config) {}

const GenerationSnapshot& Trajectory::snapshot(std::size_t n) const {
    if (n >= snapshots_.size()) {
        Termination why = termination_;
        if (why.kind == TerminationKind::completed) why.generation = snapshots_.size();
        throw GenerationUnavailable(n, why);
    }
    return snapshots_[n];
}

std::vector<std::uint32_t> Trajectory::ancestor_ids(std::size_t n, std::size_t k) const {
    if (k > n) throw std::invalid_argument("ancestor generation must not exceed the generation");
    const auto& snap = snapshot(n);
    if (config_.track_ancestors_at == k) return snap.ancestor_ids;
    std::vector<std::uint32_t> ids(snap.count());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::uint32_t>(i);
    for (std::size_t g = n; g > k; --g) {
        const auto& parents = snapshots_[g].parent_ids;
        for (auto& id : ids) id = parents[id];
    }
    return ids;
}

Trajectory simulate(std::shared_ptr<const RealizedEnvironment> env, const SimConfig& config) {
    config.validate();
    if (!env) throw std::invalid_argument("simulate: missing environment");
    if (env->length() < config.n_max) {
        throw EnvironmentTooShort("environment length " + std::to_string(env->length()) + " < n_max " +
                                  std::to_string(config.n_max));
    }
    Trajectory traj(env, config);
    SplitMix64 rng(config.seed);
    const auto track = config.track_ancestors_at;

    GenerationSnapshot root;
    root.generation = 0;
    root.positions = {0.0};
    root.sorted_positions = {0.0};
    if (track == 0u) root.ancestor_ids = {0};
    traj.snapshots_.push_back(std::move(root));

    for (std::size_t n = 0; n < config.n_max; ++n) {
        const GenerationSnapshot& cur = traj.snapshots_.back();
        const auto& state = env->step(n);
        GenerationSnapshot next;
        next.generation = n + 1;
        const bool inherit = track && *track <= n;
        std::size_t drawn_total = 0;
        bool capped = false;
        for (std::size_t u = 0; u < cur.count(); ++u) {
            const std::uint32_t children = state.offspring.sample(rng);
            drawn_total += children;
            if (drawn_total > config.particle_cap) {
                capped = true;
                break;
            }
            for (std::uint32_t c = 0; c < children; ++c) {
                next.positions.push_back(cur.positions[u] + state.moving.sample(rng));
                next.parent_ids.push_back(static_cast<std::uint32_t>(u));
                if (inherit) next.ancestor_ids.push_back(cur.ancestor_ids[u]);
            }
        }
        if (capped) {
            traj.termination_ = {TerminationKind::cap_exceeded, n + 1};
            return traj;
        }
        if (next.count() != drawn_total) throw std::logic_error("branching consistency violated");
        if (track && *track == n + 1) {
            next.ancestor_ids.resize(next.count());
            for (std::size_t i = 0; i < next.count(); ++i) next.ancestor_ids[i] = static_cast<std::uint32_t>(i);
        }
        next.sorted_positions = next.positions;
        std::sort(next.sorted_positions.begin(), next.sorted_positions.end());
        if (next.count() == 0 && traj.termination_.kind == TerminationKind::completed) {
            traj.termination_ = {TerminationKind::extinct, n + 1};
        }
        traj.snapshots_.push_back(std::move(next));
    }
    return traj;
}

std::size_t counting_measure(const GenerationSnapshot& snap, double threshold) {
    const auto& s = snap.sorted_positions;
    return static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), threshold) - s.begin());
}

double normalized_lhs(const Trajectory& traj, std::size_t n, double t) {
    const auto& snap = traj.snapshot(n);
    if (snap.count() == 0) return 0.0;
    const auto& env = traj.env();
    const double threshold = env.ell(n) + env.s(n) * t;
    return static_cast<double>(counting_measure(snap, threshold)) / env.pi(n);
}

}  // namespace brwre
