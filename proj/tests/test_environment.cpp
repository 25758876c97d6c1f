// Environment laws, moments, cumulants and realized prefix aggregates.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "brwre/environment.hpp"

using namespace brwre;

namespace {

EnvState state(OffspringLaw off, MovingLaw mov) { return EnvState{std::move(off), std::move(mov)}; }

EnvironmentModel single(OffspringLaw off, MovingLaw mov) {
    return EnvironmentModel({{1.0, state(std::move(off), std::move(mov))}});
}

// Inverse relations (cumulants -> central moments), kept independent of the library.
MomentArray moments_from_cumulants(const MomentArray& k) {
    MomentArray m{};
    m[2] = k[2];
    m[3] = k[3];
    m[4] = k[4] + 3 * k[2] * k[2];
    m[5] = k[5] + 10 * k[3] * k[2];
    m[6] = k[6] + 15 * k[4] * k[2] + 10 * k[3] * k[3] + 15 * k[2] * k[2] * k[2];
    return m;
}

}  // namespace

TEST_CASE("validate_model examples") {
    auto binary = single(OffspringLaw::explicit_pmf({0, 0, 1}), MovingLaw::gaussian(0, 1));
    auto rep = validate_model(binary);
    CHECK(rep.passed());
    CHECK(rep.expected_log_mean == doctest::Approx(std::log(2.0)));

    auto critical = single(OffspringLaw::explicit_pmf({0, 1}), MovingLaw::gaussian(0, 1));
    rep = validate_model(critical);
    CHECK_FALSE(rep.passed());
    CHECK(rep.expected_log_mean == 0.0);

    // Means 3 and 1/2 with probability 1/2 each.
    EnvironmentModel mix({{0.5, state(OffspringLaw::explicit_pmf({0, 0, 0, 1}), MovingLaw::uniform(-1, 1))},
                          {0.5, state(OffspringLaw::explicit_pmf({0.5, 0.5}), MovingLaw::gaussian(0, 1))}});
    rep = validate_model(mix);
    CHECK(rep.passed());
    CHECK(rep.expected_log_mean == doctest::Approx(0.5 * std::log(1.5)).epsilon(1e-14));

    auto lattice = single(OffspringLaw::explicit_pmf({0, 0, 1}), MovingLaw::two_point(0, 0.5, 2));
    rep = validate_model(lattice);
    CHECK(rep.passed());
    CHECK(rep.has_warnings());
}

TEST_CASE("structural errors") {
    CHECK_THROWS_AS(OffspringLaw::explicit_pmf({0.5, 0.4}), InvalidModel);
    CHECK_THROWS_AS(OffspringLaw::explicit_pmf({-0.1, 1.1}), InvalidModel);
    CHECK_THROWS_AS(MovingLaw::gaussian(0, 0), InvalidModel);
    CHECK_THROWS_AS(MovingLaw::uniform(1, 1), InvalidModel);
    CHECK_THROWS_AS(MovingLaw::two_point(1, 0.5, 1), InvalidModel);
    CHECK_THROWS_AS(OffspringLaw::poisson_truncated(2.0, 2000), InvalidModel);
    auto off = OffspringLaw::explicit_pmf({0, 0, 1});
    auto mov = MovingLaw::gaussian(0, 1);
    CHECK_THROWS_AS(EnvironmentModel({{0.6, state(off, mov)}, {0.3, state(off, mov)}}), InvalidModel);
    auto model = single(off, mov);
    CHECK_THROWS_AS(sample_environment(model, 0, 1), EmptyEnvironment);
}

TEST_CASE("state moments in closed form") {
    const auto off = OffspringLaw::explicit_pmf({0, 0, 1});
    auto g = state_moments(state(off, MovingLaw::gaussian(0, 1.5)));
    const double s2 = 2.25;
    CHECK(g.central[2] == doctest::Approx(s2));
    CHECK(g.central[3] == 0.0);
    CHECK(g.central[4] == doctest::Approx(3 * s2 * s2));
    CHECK(g.central[5] == 0.0);
    CHECK(g.central[6] == doctest::Approx(15 * s2 * s2 * s2));
    CHECK(g.mean_offspring == 2.0);

    auto u = state_moments(state(off, MovingLaw::uniform(-1, 1)));
    CHECK(u.mean_step == 0.0);
    CHECK(u.central[2] == doctest::Approx(1.0 / 3));
    CHECK(u.central[4] == doctest::Approx(1.0 / 5));
    CHECK(u.central[6] == doctest::Approx(1.0 / 7));
    CHECK(u.central[3] == 0.0);
    CHECK(u.central[5] == 0.0);

    auto tp = state_moments(state(off, MovingLaw::two_point(0, 0.5, 2)));
    CHECK(tp.mean_step == 1.0);
    CHECK(tp.central[2] == 1.0);
    CHECK(tp.central[3] == 0.0);
    CHECK(tp.central[4] == 1.0);
}

TEST_CASE("Cauchy-Schwarz on analytic moments") {
    for (const auto& law : {MovingLaw::gaussian(0.3, 0.7), MovingLaw::uniform(-2, 5),
                            MovingLaw::shifted_exponential(1.7, -0.4), MovingLaw::two_point(-1, 0.2, 3)}) {
        const auto c = law.central_moments();
        CHECK(c[2] > 0);
        CHECK(c[3] * c[3] <= c[2] * c[4] * (1 + 1e-12));
        CHECK(c[4] >= c[2] * c[2] * (1 - 1e-12));
    }
}

TEST_CASE("Monte Carlo central moments within 4 standard errors") {
    SplitMix64 rng(2024);
    const std::size_t n = 1'000'000;
    for (const auto& law : {MovingLaw::gaussian(0.3, 0.7), MovingLaw::uniform(-2, 5),
                            MovingLaw::shifted_exponential(1.7, -0.4), MovingLaw::two_point(-1, 0.2, 3)}) {
        CAPTURE(law.describe());
        const double mu = law.mean();
        std::vector<double> xs(n);
        for (auto& x : xs) x = law.sample(rng) - mu;
        for (int nu = 2; nu <= 4; ++nu) {
            double sum = 0, sum2 = 0;
            for (double x : xs) {
                const double p = std::pow(x, nu);
                sum += p;
                sum2 += p * p;
            }
            const double m = sum / n;
            const double se = std::sqrt((sum2 / n - m * m) / n);
            CAPTURE(nu);
            CHECK(std::abs(m - law.central_moment(nu)) <= 4 * se);
        }
    }
}

TEST_CASE("truncated offspring families") {
    auto p = OffspringLaw::poisson_truncated(1.4, 30);
    CHECK(std::accumulate(p.pmf().begin(), p.pmf().end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.mean() == doctest::Approx(1.4).epsilon(1e-12));
    auto g = OffspringLaw::geometric(0.5, 1024);
    CHECK(g.mean() == doctest::Approx(1.0).epsilon(1e-12));
    auto small = OffspringLaw::poisson_truncated(3.0, 2);
    CHECK(small.pmf().size() == 3);
    CHECK(std::accumulate(small.pmf().begin(), small.pmf().end(), 0.0) == doctest::Approx(1.0));

    SplitMix64 rng(5);
    double total = 0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) total += p.sample(rng);
    CHECK(std::abs(total / draws - 1.4) < 4 * std::sqrt(1.4 / draws));
}

TEST_CASE("cumulants from central moments") {
    const auto gauss = MovingLaw::gaussian(0, 1.3).central_moments();
    const auto g = cumulants_from_central_moments(gauss);
    for (int nu = 3; nu <= 6; ++nu) CHECK(std::abs(g[static_cast<std::size_t>(nu)]) <= 1e-12);

    const auto uc = cumulants_from_central_moments(MovingLaw::uniform(-1, 1).central_moments());
    CHECK(uc[4] == doctest::Approx(-2.0 / 15).epsilon(1e-14));
    CHECK(uc[3] == 0.0);
    CHECK(uc[5] == 0.0);

    MomentArray bad{};
    CHECK_THROWS_AS(cumulants_from_central_moments(bad), DegenerateLaw);

    // Round trip through the inverse relations on random inputs.
    SplitMix64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        MomentArray m{};
        m[2] = 0.1 + 3 * rng.uniform();
        m[3] = (rng.uniform() - 0.5) * m[2];
        m[4] = m[2] * m[2] * (1 + 5 * rng.uniform());
        m[5] = (rng.uniform() - 0.5) * m[4];
        m[6] = m[4] * m[2] * (1 + 5 * rng.uniform());
        const auto back = moments_from_cumulants(cumulants_from_central_moments(m));
        for (std::size_t nu = 2; nu <= 6; ++nu) {
            CHECK(std::abs(back[nu] - m[nu]) <= 1e-12 * std::max(1.0, std::abs(m[nu])) * 10);
        }
    }
}

TEST_CASE("sampled environments") {
    auto model = single(OffspringLaw::explicit_pmf({0, 0.4, 0.6}), MovingLaw::gaussian(0.5, 1));
    auto env = sample_environment(model, 20, 99);
    for (auto s : env.sequence()) CHECK(s == 0);
    for (std::size_t k = 0; k <= 20; ++k) {
        CHECK(env.pi(k) == doctest::Approx(std::pow(1.6, static_cast<double>(k))).epsilon(1e-13));
        CHECK(env.ell(k) == doctest::Approx(0.5 * static_cast<double>(k)));
    }
    CHECK(env.pi(0) == 1.0);
    CHECK(env.ell(0) == 0.0);
    CHECK(env.s_nu(3, 0) == 0.0);

    EnvironmentModel mix({{0.5, state(OffspringLaw::explicit_pmf({0, 0, 1}), MovingLaw::uniform(-1, 2))},
                          {0.5, state(OffspringLaw::explicit_pmf({0, 0.5, 0.5}), MovingLaw::shifted_exponential(2, -0.5))}});
    auto a = sample_environment(mix, 500, 7);
    auto b = sample_environment(mix, 500, 7);
    CHECK(a.sequence() == b.sequence());
    for (std::size_t k = 0; k <= 500; ++k) {
        CHECK(a.pi(k) == b.pi(k));
        CHECK(a.s_nu(5, k) == b.s_nu(5, k));
    }

    const std::size_t n = 10000;
    auto big = sample_environment(mix, n, 3);
    const auto zeros = std::count(big.sequence().begin(), big.sequence().end(), 0u);
    CHECK(std::abs(static_cast<double>(zeros) / n - 0.5) <= 3 * std::sqrt(0.25 / n));

    // Prefix property against independent recomputation.
    SplitMix64 pick(1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + static_cast<std::size_t>(pick.uniform() * 499);
        double log_pi = 0, ell = 0;
        MomentArray s{};
        for (std::size_t j = 0; j < k; ++j) {
            const auto& st = a.step(j);
            log_pi += std::log(st.offspring.mean());
            ell += st.moving.mean();
            for (int nu = 2; nu <= 6; ++nu) s[static_cast<std::size_t>(nu)] += st.moving.central_moment(nu);
        }
        CHECK(a.log_pi(k) == doctest::Approx(log_pi).epsilon(1e-12));
        CHECK(a.ell(k) == doctest::Approx(ell).epsilon(1e-12));
        for (int nu = 2; nu <= 6; ++nu) CHECK(a.s_nu(nu, k) == doctest::Approx(s[static_cast<std::size_t>(nu)]).epsilon(1e-12));
        CHECK(a.s(k) > 0);
    }
}

TEST_CASE("law of large numbers for s_n^(nu)") {
    EnvironmentModel mix({{0.3, state(OffspringLaw::explicit_pmf({0, 0, 1}), MovingLaw::uniform(-1, 2))},
                          {0.7, state(OffspringLaw::explicit_pmf({0, 0.5, 0.5}), MovingLaw::shifted_exponential(2, -0.5))}});
    const std::size_t n = 10000;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        auto env = sample_environment(mix, n, seed);
        for (int nu = 2; nu <= 6; ++nu) {
            const double sd = std::sqrt(mix.central_moment_variance(nu));
            CHECK(std::abs(env.s_nu(nu, n) / n - mix.expected_central_moment(nu)) <= 5 * sd / std::sqrt(double(n)));
        }
    }
}
