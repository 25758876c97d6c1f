// Cumulant windows, correction polynomials, Edgeworth main term and oracles.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "brwre/edgeworth.hpp"
#include "brwre/numerics.hpp"
#include "random_models.hpp"

using namespace brwre;
using namespace brwre::testing;

namespace {

const std::vector<double> kTGrid = {-2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.3, 0.5, 1.0, 2.0, 3.0};

double sup_error(const std::vector<double>& xs, auto&& approx, auto&& truth) {
    double e = 0.0;
    for (double x : xs) e = std::max(e, std::abs(approx(x) - truth(x)));
    return e;
}

}  // namespace

TEST_CASE("cumulant window bookkeeping") {
    SplitMix64 rng(3);
    auto model = random_two_state_model(rng);
    auto env = sample_environment(model, 80, 17);
    CumulantWindow w(env, 10, 80);
    CHECK(w.length() == 70);
    double direct = 0.0;
    for (std::size_t j = 10; j < 80; ++j) direct += env.step_moments(j).central[2];
    CHECK(w.variance() == doctest::Approx(direct).epsilon(1e-12));
    CHECK(w.variance() == doctest::Approx(env.s_nu(2, 80) - env.s_nu(2, 10)).epsilon(1e-12));
    CHECK(w.cumulant_sum(3) == doctest::Approx(env.s_nu(3, 80) - env.s_nu(3, 10)).epsilon(1e-10));
    CHECK_THROWS_AS(CumulantWindow(env, 5, 5), DegenerateWindow);
}

TEST_CASE("partition enumeration counts") {
    CHECK(edgeworth_partitions(1).size() == 1);
    CHECK(edgeworth_partitions(2).size() == 2);
    CHECK(edgeworth_partitions(3).size() == 3);
    CHECK(edgeworth_partitions(4).size() == 5);
    for (int nu = 1; nu <= 4; ++nu) {
        for (const auto& k : edgeworth_partitions(nu)) {
            int weighted = 0;
            for (int m = 1; m <= nu; ++m) weighted += m * k[static_cast<std::size_t>(m - 1)];
            CHECK(weighted == nu);
        }
    }
}

TEST_CASE("lambda coefficients") {
    auto gauss = homogeneous(MovingLaw::gaussian(0.2, 1.7), 30);
    auto c = lambda_coeffs(CumulantWindow::prefix(gauss, 30), 6);
    for (int nu = 3; nu <= 6; ++nu) CHECK(std::abs(c.at(nu)) <= 1e-14);
    CHECK_THROWS_AS(lambda_coeffs(CumulantWindow::prefix(gauss, 30), 4).at(5), InsufficientCoefficients);

    // Homogeneous windows: lambda_3 = gamma_3 / sigma^3 regardless of L.
    const auto law = MovingLaw::shifted_exponential(1.3, 0.0);
    const double expected = law.central_moment(3) / std::pow(law.central_moment(2), 1.5);
    for (std::size_t len : {10u, 100u}) {
        auto env = homogeneous(law, len);
        CHECK(lambda_coeffs(CumulantWindow::prefix(env, len), 3).at(3) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("window coefficients approach the full-window ones") {
    // Record: |lambda_3([k,n)) - lambda_3([0,n))| <= C k/n with C = 6 over these seeds.
    SplitMix64 rng(8);
    auto model = random_two_state_model(rng, false);
    const std::size_t n = 2000;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto env = sample_environment(model, n, seed);
        const double full = lambda_coeffs(CumulantWindow::prefix(env, n), 3).at(3);
        for (std::size_t k : {2u, 5u, 20u}) {
            const double win = lambda_coeffs(CumulantWindow(env, k, n), 3).at(3);
            CHECK(std::abs(win - full) <= 6.0 * static_cast<double>(k) / n);
        }
    }
}

TEST_CASE("generic Q against hand-expanded partition sums") {
    auto env = homogeneous(MovingLaw::shifted_exponential(0.8, -1.0), 25);
    const auto window = CumulantWindow::prefix(env, 25);
    const auto c = lambda_coeffs(window, 5);
    for (double x : kTGrid) {
        const double expected1 = -(c.at(3) / 6.0) * hermite_recurrence(2, x) * std_normal_pdf(x);
        CHECK(q_poly_generic(1, c, x) == doctest::Approx(expected1).epsilon(1e-13));
        // Q_1 / sqrt(n) of a homogeneous window equals the closed form.
        CHECK(q_poly_generic(1, c, x) / 5.0 == doctest::Approx(q1_closed(env, 25, x)).epsilon(1e-12));
    }

    EdgeworthCoefficients zero;
    zero.max_order = 4;
    for (double x : kTGrid) CHECK(q_poly_generic(2, zero, x) == 0.0);

    SplitMix64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        EdgeworthCoefficients r;
        r.max_order = 5;
        for (std::size_t nu = 3; nu <= 5; ++nu) r.lambda[nu] = 4 * rng.uniform() - 2;
        const double l3 = r.lambda[3], l4 = r.lambda[4], l5 = r.lambda[5];
        for (double x : kTGrid) {
            const double hand = -std_normal_pdf(x) * (hermite_explicit(8, x) * l3 * l3 * l3 / 1296 +
                                                      hermite_explicit(6, x) * l3 * l4 / 144 +
                                                      hermite_explicit(4, x) * l5 / 120);
            CHECK(std::abs(q_poly_generic(3, r, x) - hand) <= 1e-12 * (1 + std::abs(hand)));
        }
    }
    CHECK_THROWS_AS(q_poly_generic(3, lambda_coeffs(window, 4), 0.0), InsufficientCoefficients);
}

TEST_CASE("generic and closed-form Q agree") {
    SplitMix64 rng(7);
    auto model = random_two_state_model(rng);
    auto env = sample_environment(model, 50, 123);
    const auto c = lambda_coeffs(CumulantWindow::prefix(env, 50), 5);
    const double closed[] = {q1_closed(env, 50, 0.3), q2_closed(env, 50, 0.3), q3_closed(env, 50, 0.3)};
    for (int nu = 1; nu <= 3; ++nu) {
        const double generic = q_poly_generic(nu, c, 0.3) * std::pow(50.0, -0.5 * nu);
        CHECK(std::abs(generic - closed[nu - 1]) <= 1e-10 * std::abs(closed[nu - 1]));
    }

    auto gauss = homogeneous(MovingLaw::gaussian(1.0, 2.0), 40);
    for (double t : kTGrid) {
        CHECK(q1_closed(gauss, 40, t) == 0.0);
        CHECK(q2_closed(gauss, 40, t) == 0.0);
        CHECK(q3_closed(gauss, 40, t) == 0.0);
    }
    CHECK(q1_closed(env, 50, 1.0) == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(std::abs(q1_closed(env, 50, -1.0)) <= 1e-18);
}

TEST_CASE("edgeworth_cdf limits") {
    auto gauss = homogeneous(MovingLaw::gaussian(0.0, 1.0), 12);
    const auto gw = CumulantWindow::prefix(gauss, 12);
    for (double x : kTGrid) CHECK(edgeworth_cdf(gw, 5, x) == std_normal_cdf(x));

    SplitMix64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        auto model = random_two_state_model(rng);
        auto env = sample_environment(model, 16, trial);
        const auto w = CumulantWindow::prefix(env, 16);
        for (int k = 3; k <= 5; ++k) {
            CHECK(std::abs(edgeworth_cdf(w, k, 8.0) - 1.0) <= 1e-6);
            CHECK(std::abs(edgeworth_cdf(w, k, -8.0)) <= 1e-6);
        }
    }
    CHECK_THROWS(edgeworth_cdf(gw, 2, 0.0));
    CHECK(clamp_probability(-0.01) == 0.0);
    CHECK(clamp_probability(1.2) == 1.0);
}

TEST_CASE("oracles on exactly known laws") {
    auto gauss = homogeneous(MovingLaw::gaussian(0.5, 1.2), 6);
    const auto gw = CumulantWindow::prefix(gauss, 6);
    const WindowSumCdf grid(gw, GridConvolutionOracle{});
    const WindowSumCdf mc(gw, MonteCarloOracle{200000, 9});
    for (double x : kTGrid) {
        const auto g = grid(x);
        CHECK(std::abs(g.value - std_normal_cdf(x)) <= 1e-8);
        CHECK(g.uncertainty <= 1e-6);
        const auto m = mc(x);
        CHECK(std::abs(m.value - std_normal_cdf(x)) <= m.uncertainty + 1e-12);
    }

    // Single step: the law itself.
    const auto exp_law = MovingLaw::shifted_exponential(2.0, -0.2);
    auto one = homogeneous(exp_law, 1);
    const auto w1 = CumulantWindow::prefix(one, 1);
    const WindowSumCdf single(w1, GridConvolutionOracle{});
    const double sd = std::sqrt(exp_law.central_moment(2));
    for (double x : kTGrid) {
        CHECK(single(x).value == doctest::Approx(exp_law.cdf(exp_law.mean() + sd * x)).epsilon(1e-14));
    }

    // Two uniform(-1,1) steps: triangular law on [-2,2].
    auto two = homogeneous(MovingLaw::uniform(-1, 1), 2);
    const auto w2 = CumulantWindow::prefix(two, 2);
    const WindowSumCdf tri(w2, GridConvolutionOracle{});
    const WindowSumCdf tri_mc(w2, MonteCarloOracle{400000, 4});
    auto triangular = [](double y) {
        if (y <= -2) return 0.0;
        if (y >= 2) return 1.0;
        return y <= 0 ? (y + 2) * (y + 2) / 8 : 1 - (2 - y) * (2 - y) / 8;
    };
    const double b = std::sqrt(2.0 / 3.0);
    for (double x : kTGrid) {
        const auto v = tri(x);
        CHECK(std::abs(v.value - triangular(x * b)) <= 5e-8);
        CHECK(std::abs(tri_mc(x).value - triangular(x * b)) <= tri_mc(x).uncertainty + 1e-12);
    }
    CHECK_THROWS_AS(WindowSumCdf(w2, MonteCarloOracle{1000, 1}), std::invalid_argument);
    CHECK_THROWS_AS(WindowSumCdf(w2, GridConvolutionOracle{0.01, 12, true}), std::invalid_argument);
}

TEST_CASE("grid oracle matches characteristic-function inversion") {
    for (std::size_t len : {8u, 16u, 32u, 64u}) {
        auto env = homogeneous(MovingLaw::uniform(-1, 1), len);
        const WindowSumCdf grid(CumulantWindow::prefix(env, len), GridConvolutionOracle{});
        for (double x : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
            CAPTURE(len);
            CAPTURE(x);
            CHECK(std::abs(grid(x).value - uniform_sum_cdf_by_inversion(len, x)) <= 5e-8);
        }
    }
}

TEST_CASE("Edgeworth improves on the normal approximation") {
    const std::vector<double> xs = {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
    auto uni = homogeneous(MovingLaw::uniform(-1, 1), 16);
    const auto uw = CumulantWindow::prefix(uni, 16);
    const WindowSumCdf truth(uw, GridConvolutionOracle{});
    auto t = [&](double x) { return truth(x).value; };
    const double phi_err = sup_error(xs, std_normal_cdf, t);
    CHECK(sup_error(xs, [&](double x) { return edgeworth_cdf(uw, 5, x); }, t) < phi_err);
    CHECK(sup_error(xs, [&](double x) { return edgeworth_cdf(uw, 4, x); }, t) < phi_err);

    // Random continuous environments: order-3 main term beats Phi in >= 90% of cases.
    SplitMix64 rng(77);
    int wins = 0, trials = 0;
    for (std::size_t len : {8u, 16u, 32u, 64u}) {
        for (int rep = 0; rep < 10; ++rep) {
            auto model = random_two_state_model(rng, false);
            auto env = sample_environment(model, len, rep + 100);
            const auto w = CumulantWindow::prefix(env, len);
            if (std::abs(w.cumulant_sum(3)) < 1e-12) continue;
            const WindowSumCdf oracle(w, GridConvolutionOracle{1.0 / 200.0, 12.0, true});
            auto o = [&](double x) { return oracle(x).value; };
            ++trials;
            if (sup_error(xs, [&](double x) { return edgeworth_cdf(w, 3, x); }, o) <= sup_error(xs, std_normal_cdf, o)) ++wins;
        }
    }
    CHECK(wins >= 0.9 * trials);
}

TEST_CASE("order-5 error decays with window length") {
    const std::vector<double> xs = {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
    std::vector<double> lens, errs;
    for (std::size_t len : {8u, 16u, 32u, 64u}) {
        auto env = homogeneous(MovingLaw::uniform(-1, 1), len);
        const auto w = CumulantWindow::prefix(env, len);
        const WindowSumCdf oracle(w, GridConvolutionOracle{});
        lens.push_back(static_cast<double>(len));
        errs.push_back(sup_error(xs, [&](double x) { return edgeworth_cdf(w, 5, x); },
                                 [&](double x) { return oracle(x).value; }));
    }
    MESSAGE("order-5 sup errors: " << errs[0] << " " << errs[1] << " " << errs[2] << " " << errs[3]);
    CHECK(loglog_slope(lens, errs) <= -1.0);
}
