#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "brwre/martingales.hpp"
#include "brwre/numerics.hpp"
#include "brwre/special_functions.hpp"

using namespace brwre;

namespace {

std::shared_ptr<const EnvironmentModel> single_state(std::vector<double> pmf, MovingLaw law) {
    return std::make_shared<const EnvironmentModel>(
        EnvironmentModel({{1.0, EnvState{OffspringLaw::explicit_pmf(std::move(pmf)), law}}}));
}

std::shared_ptr<const RealizedEnvironment> homogeneous(std::shared_ptr<const EnvironmentModel> model, std::size_t n) {
    return std::make_shared<const RealizedEnvironment>(model, std::vector<std::size_t>(n, 0));
}

SimConfig config(std::size_t n_max, std::uint64_t seed) {
    SimConfig c;
    c.n_max = n_max;
    c.seed = seed;
    return c;
}

std::shared_ptr<const EnvironmentModel> two_state_model() {
    return std::make_shared<const EnvironmentModel>(EnvironmentModel(
        {{0.4, EnvState{OffspringLaw::explicit_pmf({0.1, 0.3, 0.4, 0.2}), MovingLaw::uniform(-0.5, 1.5)}},
         {0.6, EnvState{OffspringLaw::geometric(0.4, 30), MovingLaw::shifted_exponential(1.5, -0.2)}}}));
}

}  // namespace

TEST_CASE("initial values and single lineage") {
    auto env = homogeneous(single_state({0, 1}, MovingLaw::shifted_exponential(1, 0.5)), 12);
    auto traj = simulate(env, config(12, 4));
    auto series = compute_series(traj);
    const auto& v0 = series.values[0];
    CHECK(v0.w == 1.0);
    CHECK(v0.n1 == 0.0);
    CHECK(v0.n2 == 0.0);
    CHECK(v0.n3 == 0.0);
    for (std::size_t n = 1; n <= 12; ++n) {
        CHECK(series.values[n].w == 1.0);
        CHECK(series.values[n].n1 == doctest::Approx(traj.snapshot(n).positions[0] - env->ell(n)).epsilon(1e-14));
        CHECK(series.w_star[n] == 1.0);
    }
}

TEST_CASE("one-step martingale property on fixed prefixes") {
    auto model = two_state_model();
    auto env = std::make_shared<const RealizedEnvironment>(sample_environment(model, 4, 21));
    for (std::uint64_t prefix_seed : {1u, 2u, 3u}) {
        auto traj = simulate(env, config(3, prefix_seed));
        const auto& prefix = traj.snapshot(3);
        if (prefix.count() == 0) continue;
        const auto base = compute_generation(*env, prefix);
        const auto& state = env->step(3);

        // Redraw generation 4 from the fixed generation-3 prefix.
        SplitMix64 rng(1000 + prefix_seed);
        std::vector<std::vector<double>> inc(4);
        for (int rep = 0; rep < 10000; ++rep) {
            GenerationSnapshot next;
            next.generation = 4;
            for (double x : prefix.positions) {
                const auto kids = state.offspring.sample(rng);
                for (std::uint32_t c = 0; c < kids; ++c) next.positions.push_back(x + state.moving.sample(rng));
            }
            const auto v = compute_generation(*env, next);
            for (int i = 0; i < 4; ++i) inc[i].push_back(v.component(i) - base.component(i));
        }
        for (int i = 0; i < 4; ++i) {
            CAPTURE(prefix_seed);
            CAPTURE(i);
            CHECK(std::abs(mean(inc[i])) <= 4 * standard_error(inc[i]));
        }
    }
}

TEST_CASE("annealed normalization and limit estimates") {
    auto env = homogeneous(single_state({0, 0, 1}, MovingLaw::gaussian(0, 1)), 10);
    std::vector<double> w;
    std::vector<double> v1;
    for (std::uint64_t r = 0; r < 1000; ++r) {
        auto est = estimate_limits(compute_series(simulate(env, config(10, r))));
        CHECK(est.estimated_at == 10);
        w.push_back(est.w);
        v1.push_back(est.v1);
    }
    CHECK(std::abs(mean(w) - 1.0) <= 3 * standard_error(w));
    CHECK(std::abs(mean(v1)) <= 3 * standard_error(v1));

    auto dead_env = homogeneous(single_state({0.7, 0.3}, MovingLaw::gaussian(0, 1)), 10);
    auto dead = compute_series(simulate(dead_env, config(10, 2)));
    auto est = estimate_limits(dead);
    CHECK(est.w == 0.0);
    CHECK(est.v1 == 0.0);
    CHECK(est.v2 == 0.0);
    CHECK(est.v3 == 0.0);

    CHECK_THROWS_AS(estimate_limits(compute_series(simulate(env, config(7, 1)))), InsufficientData);
}

TEST_CASE("truncations") {
    auto model = two_state_model();
    auto env = std::make_shared<const RealizedEnvironment>(sample_environment(model, 8, 5));
    auto traj = simulate(env, config(8, 9));
    const auto full = compute_generation(*env, traj.snapshot(6));
    const auto wide = compute_truncated(traj, 6, 1e9);
    CHECK(wide.w == full.w);
    CHECK(wide.n1 == full.n1);
    CHECK(wide.n2 == full.n2);
    CHECK(wide.n3 == full.n3);

    const auto narrow = compute_truncated(traj, 6, 0.0);
    CHECK(narrow.w == 0.0);
    CHECK(narrow.n1 == 0.0);

    const auto def = compute_truncated(traj, 6);
    CHECK(def.radius == 6.0);
    CHECK(def.w <= full.w);

    // Radius k with a unit Gaussian walk: P(|S_9| > 9) = 2(1 - Phi(3)).
    auto lineage = homogeneous(single_state({0, 1}, MovingLaw::gaussian(0, 1)), 9);
    int differs = 0;
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) {
        auto t = simulate(lineage, config(9, 50000 + r));
        if (compute_truncated(t, 9).w != 1.0) ++differs;
    }
    const double p = 2.0 * (1.0 - std_normal_cdf(3.0));
    const double frac = static_cast<double>(differs) / reps;
    CHECK(std::abs(frac - p) <= 4 * std::sqrt(p * (1 - p) / reps));
}

TEST_CASE("compensated sums match long double recomputation") {
    auto model = single_state({0, 0, 0.5, 0.5}, MovingLaw::shifted_exponential(0.5, 3.0));
    auto env = homogeneous(model, 12);
    auto traj = simulate(env, config(12, 17));
    const auto& snap = traj.snapshot(12);
    REQUIRE(snap.count() > 10000);
    const auto v = compute_generation(*env, snap);
    const long double ell = env->ell(12);
    const long double s2 = env->s_nu(2, 12);
    const long double s3 = env->s_nu(3, 12);
    long double acc = 0;
    for (double x : snap.sorted_positions) {
        const long double d = x - ell;
        acc += d * d * d - 3 * d * s2 - s3;
    }
    const double ref = static_cast<double>(acc / env->pi(12));
    CHECK(std::abs(v.n3 - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("convergence diagnostic") {
    std::vector<MartingaleSeries> walk;
    auto lineage = homogeneous(single_state({0, 1}, MovingLaw::gaussian(0, 1)), 32);
    for (std::uint64_t r = 0; r < 200; ++r) walk.push_back(compute_series(simulate(lineage, config(32, r))));
    auto rep = convergence_diagnostic(walk, 1);
    CHECK_FALSE(rep.decays);

    std::vector<MartingaleSeries> branching;
    auto env = homogeneous(single_state({0, 0.6, 0.4}, MovingLaw::gaussian(0, 1)), 24);
    for (std::uint64_t r = 0; r < 120; ++r) branching.push_back(compute_series(simulate(env, config(24, r))));
    for (int i : {1, 3}) {
        auto report = convergence_diagnostic(branching, i);
        CAPTURE(i);
        CAPTURE(report.slope);
        CHECK(report.decays);
    }

    CHECK_THROWS_AS(convergence_diagnostic(std::span(walk).first(50), 1), InsufficientData);
    CHECK_THROWS_AS(convergence_diagnostic(walk, 4), std::out_of_range);
}
