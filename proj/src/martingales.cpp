// martingales.cpp

#include "brwre/martingales.hpp"

#include <algorithm>
#include <cmath>

#include "brwre/numerics.hpp"

namespace brwre {

double MartingaleValues::component(int i) const {
    switch (i) {
        case 0: return w;
        case 1: return n1;
        case 2: return n2;
        case 3: return n3;
        default: throw std::out_of_range("martingale component must lie in [0, 3]");
    }
}

MartingaleValues compute_generation(const RealizedEnvironment& env, const GenerationSnapshot& snap) {
    MartingaleValues v;
    if (snap.count() == 0) return v;
    const std::size_t n = snap.generation;
    const double ell = env.ell(n);
    const double s2 = env.s_nu(2, n);
    const double s3 = env.s_nu(3, n);
    CompensatedSum c1;
    CompensatedSum c2;
    CompensatedSum c3;
    for (double pos : snap.positions) {
        const double d = pos - ell;
        c1 += d;
        c2 += d * d - s2;
        c3 += d * d * d - 3.0 * d * s2 - s3;
    }
    const double pi = env.pi(n);
    v.w = static_cast<double>(snap.count()) / pi;
    v.n1 = c1.value() / pi;
    v.n2 = c2.value() / pi;
    v.n3 = c3.value() / pi;
    return v;
}

MartingaleSeries compute_series(const Trajectory& traj) {
    MartingaleSeries series;
    double running = 0.0;
    for (std::size_t n = 0; n <= traj.last_generation(); ++n) {
        series.values.push_back(compute_generation(traj.env(), traj.snapshot(n)));
        running = std::max(running, series.values.back().w);
        series.w_star.push_back(running);
    }
    series.truncated_by_cap = traj.termination().kind == TerminationKind::cap_exceeded;
    return series;
}

TruncatedValues compute_truncated(const Trajectory& traj, std::size_t k, std::optional<double> radius,
                                  std::optional<std::size_t> centering_generation) {
    const auto& snap = traj.snapshot(k);
    const auto& env = traj.env();
    const std::size_t c = centering_generation.value_or(k);
    if (c > env.length()) throw std::out_of_range("centering generation beyond the environment");

    TruncatedValues out;
    out.generation = k;
    out.radius = radius.value_or(static_cast<double>(k));
    if (snap.count() == 0) return out;

    const double ell = env.ell(k);
    const double s2 = env.s_nu(2, c);
    const double s3 = env.s_nu(3, c);
    CompensatedSum c0;
    CompensatedSum c1;
    CompensatedSum c2;
    CompensatedSum c3;
    for (double pos : snap.positions) {
        const double d = pos - ell;
        if (!(std::abs(d) <= out.radius)) continue;
        c0 += 1.0;
        c1 += d;
        c2 += d * d - s2;
        c3 += d * d * d - 3.0 * d * s2 - s3;
    }
    const double pi = env.pi(k);
    out.w = c0.value() / pi;
    out.n1 = c1.value() / pi;
    out.n2 = c2.value() / pi;
    out.n3 = c3.value() / pi;
    return out;
}

LimitEstimates estimate_limits(const MartingaleSeries& series) {
    if (series.values.empty() || series.last_generation() < kMinLimitGeneration) {
        throw InsufficientData("limit estimate needs a series reaching generation " +
                               std::to_string(kMinLimitGeneration));
    }
    const std::size_t last = series.last_generation();
    const auto& v = series.values[last];
    LimitEstimates est;
    est.w = v.w;
    est.v1 = v.n1;
    est.v2 = v.n2;
    est.v3 = v.n3;
    est.estimated_at = last;

    const std::size_t first = last - std::max<std::size_t>(1, last / 4);
    for (std::size_t n = first; n < last; ++n) {
        const auto& a = series.values[n];
        const auto& b = series.values[n + 1];
        est.stderr_proxy.w = std::max(est.stderr_proxy.w, std::abs(b.w - a.w));
        est.stderr_proxy.n1 = std::max(est.stderr_proxy.n1, std::abs(b.n1 - a.n1));
        est.stderr_proxy.n2 = std::max(est.stderr_proxy.n2, std::abs(b.n2 - a.n2));
        est.stderr_proxy.n3 = std::max(est.stderr_proxy.n3, std::abs(b.n3 - a.n3));
    }
    return est;
}

ConvergenceReport convergence_diagnostic(std::span<const MartingaleSeries> ensemble, int component,
                                         std::size_t first_generation, double decay_threshold) {
    if (component < 1 || component > 3) throw std::out_of_range("diagnostic component must lie in [1, 3]");
    if (ensemble.size() < 100) throw InsufficientData("convergence diagnostic needs >= 100 replicas");
    std::size_t n_max = 0;
    for (const auto& s : ensemble) n_max = std::max(n_max, s.last_generation());
    if (n_max < 24) throw InsufficientData("convergence diagnostic needs n_max >= 24");
    if (first_generation + 2 > n_max) throw InsufficientData("diagnostic range too short");

    ConvergenceReport report;
    report.component = component;
    report.decay_threshold = decay_threshold;
    for (std::size_t n = first_generation; n < n_max; ++n) {
        std::vector<double> inc;
        for (const auto& s : ensemble) {
            if (s.last_generation() < n_max) continue;
            inc.push_back(std::abs(s.values[n + 1].component(component) - s.values[n].component(component)));
        }
        if (inc.empty()) throw InsufficientData("no replica reached n_max");
        report.generations.push_back(static_cast<double>(n));
        report.median_increment.push_back(median(std::move(inc)));
    }
    report.slope = loglog_slope(report.generations, report.median_increment);
    // Median increments that vanish (e.g. extinct majority) count as decay.
    const bool all_zero = std::all_of(report.median_increment.begin(), report.median_increment.end(),
                                      [](double x) { return x == 0.0; });
    report.decays = all_zero || (std::isfinite(report.slope) && report.slope < decay_threshold);
    return report;
}

}  // namespace brwre
