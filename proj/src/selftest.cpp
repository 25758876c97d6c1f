// selftest.cpp: reduced property battery behind `brwre selftest`.

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "brwre/fault_injection.hpp"
#include "brwre/harness.hpp"
#include "brwre/martingales.hpp"
#include "brwre/numerics.hpp"
#include "brwre/rng.hpp"

namespace brwre {

namespace {

struct Check {
    const char* name;
    std::function<std::string(bool&)> run;  // sets ok, returns detail
};

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::shared_ptr<const EnvironmentModel> random_model(SplitMix64& rng) {
    auto moving = [&]() {
        switch (static_cast<int>(rng.uniform() * 3)) {
            case 0: return MovingLaw::gaussian(rng.uniform() - 0.5, 0.3 + rng.uniform());
            case 1: {
                const double a = rng.uniform() * 2 - 1;
                return MovingLaw::uniform(a, a + 0.5 + 2 * rng.uniform());
            }
            default: return MovingLaw::shifted_exponential(0.5 + 2 * rng.uniform(), rng.uniform() - 0.5);
        }
    };
    auto offspring = [&]() {
        const double p1 = 0.2 + 0.5 * rng.uniform();
        return OffspringLaw::explicit_pmf({0.0, p1, 1.0 - p1});
    };
    const double p = 0.1 + 0.8 * rng.uniform();
    return std::make_shared<const EnvironmentModel>(
        EnvironmentModel({{p, EnvState{offspring(), moving()}}, {1.0 - p, EnvState{offspring(), moving()}}}));
}

std::string hermite_check(bool& ok) {
    double worst = 0.0;
    for (int m = 0; m <= 12; ++m) {
        for (int i = 0; i <= 120; ++i) {
            const double x = -6.0 + 0.1 * i;
            const double a = hermite_explicit(m, x);
            const double b = hermite_recurrence(m, x);
            worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
        }
    }
    // H_4 = x^4 - 6x^2 + 3 and H_6 = x^6 - 15x^4 + 45x^2 - 15.
    const auto c4 = hermite_coefficients(4);
    const auto c6 = hermite_coefficients(6);
    const bool table = c4 == std::vector<double>{3, 0, -6, 0, 1} && c6 == std::vector<double>{-15, 0, 45, 0, -15, 0, 1};
    const double at = hermite_recurrence(4, 2.0);  // 16 - 24 + 3
    ok = worst <= 1e-9 && table && at == -5.0;
    return "max relative explicit/recurrence gap " + fmt(worst) + ", H4(2) = " + fmt(at);
}

std::string cumulant_check(bool& ok) {
    double worst = 0.0;
    auto rel = [&](double got, double want) {
        worst = std::max(worst, std::abs(got - want) / std::max(1e-300, std::abs(want)));
    };
    const double rate = 1.7;
    const auto ge = cumulants_from_central_moments(MovingLaw::shifted_exponential(rate, -0.4).central_moments());
    double fact = 1.0;
    for (int nu = 2; nu <= 6; ++nu) {
        fact *= nu - 1;  // (nu - 1)!
        rel(ge[static_cast<std::size_t>(nu)], fact / std::pow(rate, nu));
    }
    const double w = 2.5;
    const auto gu = cumulants_from_central_moments(MovingLaw::uniform(-1.0, 1.5).central_moments());
    rel(gu[2], w * w / 12);
    rel(gu[4], -std::pow(w, 4) / 120);
    rel(gu[6], std::pow(w, 6) / 252);
    const auto gg = cumulants_from_central_moments(MovingLaw::gaussian(3.0, 0.7).central_moments());
    const double gauss_excess = std::abs(gg[3]) + std::abs(gg[4]) + std::abs(gg[5]) + std::abs(gg[6]);
    ok = worst <= 1e-12 && std::abs(gu[3]) + std::abs(gu[5]) <= 1e-15 && gauss_excess <= 1e-14;
    return "max relative cumulant error " + fmt(worst) + ", Gaussian higher cumulants " + fmt(gauss_excess);
}

std::string generic_closed_check(bool& ok) {
    SplitMix64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto model = random_model(rng);
        for (std::size_t n : {10u, 50u}) {
            const auto env = sample_environment(model, n, derive_seed(7, static_cast<std::uint64_t>(trial)));
            const auto c = lambda_coeffs(CumulantWindow::prefix(env, n), 5);
            for (int nu = 1; nu <= 3; ++nu) {
                const auto closed = q_closed_series(nu, env, n);
                double scale = 0.0, gap = 0.0;
                for (int i = 0; i <= 10; ++i) {
                    const double t = -3.0 + 0.6 * i;
                    const double generic = q_poly_generic(nu, c, t) * std::pow(static_cast<double>(n), -0.5 * nu);
                    scale = std::max(scale, std::abs(closed(t)));
                    gap = std::max(gap, std::abs(generic - closed(t)));
                }
                if (scale > 0.0) worst = std::max(worst, gap / scale);
            }
        }
    }
    ok = worst <= 1e-10;
    return "max relative generic/closed gap " + fmt(worst);
}

std::string martingale_check(bool& ok) {
    SplitMix64 pick(11);
    const auto model = random_model(pick);
    const auto env = std::make_shared<const RealizedEnvironment>(sample_environment(model, 5, 3));
    double worst = 0.0;  // largest |mean| / SE
    int prefixes = 0;
    for (std::uint64_t seed = 0; prefixes < 10 && seed < 200; ++seed) {
        SimConfig cfg;
        cfg.n_max = 4;
        cfg.seed = seed;
        const auto traj = simulate(env, cfg);
        const auto& prefix = traj.snapshot(4);
        if (prefix.count() == 0) continue;
        ++prefixes;
        const auto base = compute_generation(*env, prefix);
        const auto& state = env->step(4);
        SplitMix64 rng(derive_seed(99, seed));
        std::array<std::vector<double>, 4> inc;
        for (int rep = 0; rep < 10000; ++rep) {
            GenerationSnapshot next;
            next.generation = 5;
            for (double x : prefix.positions) {
                const auto kids = state.offspring.sample(rng);
                for (std::uint32_t k = 0; k < kids; ++k) next.positions.push_back(x + state.moving.sample(rng));
            }
            const auto v = compute_generation(*env, next);
            for (int i = 0; i < 4; ++i) inc[static_cast<std::size_t>(i)].push_back(v.component(i) - base.component(i));
        }
        for (const auto& d : inc) {
            const double se = standard_error(d);
            if (se > 0.0) worst = std::max(worst, std::abs(mean(d)) / se);
        }
    }
    ok = prefixes == 10 && worst <= 4.5;
    return "largest |mean increment| / SE " + fmt(worst) + " over " + std::to_string(prefixes) + " prefixes";
}

std::string expansion_check(bool& ok) {
    const auto gauss = std::make_shared<const EnvironmentModel>(EnvironmentModel(
        {{0.5, EnvState{OffspringLaw::explicit_pmf({0, 0.6, 0.4}), MovingLaw::gaussian(0.1, 0.8)}},
         {0.5, EnvState{OffspringLaw::explicit_pmf({0, 0.6, 0.4}), MovingLaw::gaussian(-0.2, 1.4)}}}));
    const auto genv = sample_environment(gauss, 20, 5);
    const ExpansionTerms gt(genv, 20);
    const double s = genv.s(20);
    LimitEstimates lim;
    lim.w = 1.3;
    lim.v1 = -0.4;
    lim.v2 = 2.2;
    lim.v3 = -3.1;
    double reduction = 0.0;
    for (int i = 0; i <= 10; ++i) {
        const double t = -2.5 + 0.5 * i;
        const double ph = std_normal_pdf(t);
        const double cor = std_normal_cdf(t) * lim.w - ph * lim.v1 / s - t * ph * lim.v2 / (2 * s * s) -
                           (t * t - 1) * ph * lim.v3 / (6 * s * s * s);
        reduction = std::max(reduction, std::abs(gt.rhs(3, t, lim) - cor) / std::abs(cor));
    }

    SplitMix64 rng(8);
    const auto env = sample_environment(random_model(rng), 24, 9);
    const ExpansionTerms terms(env, 24);
    double deriv = 0.0;
    for (int i = 0; i <= 10; ++i) {
        const double t = -2.5 + 0.5 * i;
        for (int nu = 1; nu <= 3; ++nu) {
            const auto& q = terms.q(nu);
            deriv = std::max(deriv, std::abs(terms.q(nu, 1)(t) - (q(t + 1e-4) - q(t - 1e-4)) / 2e-4));
        }
        const auto& q1 = terms.q(1);
        deriv = std::max(deriv, std::abs(terms.q(1, 2)(t) - (q1(t + 1e-3) - 2 * q1(t) + q1(t - 1e-3)) / 1e-6));
    }
    ok = reduction <= 1e-12 && deriv <= 1e-6;
    return "Gaussian reduction gap " + fmt(reduction) + ", derivative gap " + fmt(deriv);
}

std::string ab_check(bool& ok) {
    SplitMix64 rng(12);
    const auto model = random_model(rng);
    double worst = 0.0;
    CdfProvider edge;
    edge.kind = CdfProviderKind::edgeworth;
    for (std::uint64_t r = 0; r < 20; ++r) {
        const auto env = std::make_shared<const RealizedEnvironment>(sample_environment(model, 14, r));
        SimConfig cfg;
        cfg.n_max = 14;
        cfg.seed = derive_seed(5, r);
        const auto traj = simulate(env, cfg);
        for (const auto& provider : {CdfProvider{}, edge}) {
            const ABDecomposer ab(traj, 14, 1, provider);
            for (double t : {-1.0, 0.0, 0.5, 2.0}) worst = std::max(worst, ab(t).identity_error());
        }
    }
    ok = worst <= 1e-12;
    return "max A + B identity error " + fmt(worst);
}

}  // namespace

int cmd_selftest(const SelftestOptions& opts, std::ostream& out, std::ostream& err) {
    Fault fault = Fault::none;
    if (opts.inject_fault) {
        const auto f = parse_fault(*opts.inject_fault);
        if (!f) {
            err << "error: unknown fault '" << *opts.inject_fault << "'\n";
            return kExitUsage;
        }
        fault = *f;
    }
    const FaultGuard guard(fault);
    if (fault != Fault::none) out << "injected fault: " << fault_name(fault) << "\n";

    const Check checks[] = {
        {"hermite", hermite_check},
        {"cumulants", cumulant_check},
        {"generic_vs_closed_q", generic_closed_check},
        {"martingale_property", martingale_check},
        {"expansion_terms", expansion_check},
        {"ab_identity", ab_check},
    };
    int failures = 0;
    for (const auto& c : checks) {
        bool ok = false;
        std::string detail;
        try {
            detail = c.run(ok);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        if (!ok) ++failures;
        if (opts.verbose || !ok) out << (ok ? "PASS " : "FAIL ") << c.name << ": " << detail << "\n";
    }
    out << (failures == 0 ? "selftest passed" : "selftest FAILED (" + std::to_string(failures) + " checks)") << "\n";
    return failures == 0 ? kExitOk : kExitFailed;
}

}  // namespace brwre
