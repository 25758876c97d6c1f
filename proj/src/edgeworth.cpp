// edgeworth.cpp

#include "brwre/edgeworth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "brwre/fault_injection.hpp"
#include "brwre/numerics.hpp"
#include "brwre/rng.hpp"

namespace brwre {

namespace {

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

void enumerate_partitions(int nu, int m, int remaining, std::vector<int>& current,
                          std::vector<std::vector<int>>& out) {
    if (m == 0) {
        if (remaining == 0) out.push_back(current);
        return;
    }
    for (int k = remaining / m; k >= 0; --k) {
        current[static_cast<std::size_t>(m - 1)] = k;
        enumerate_partitions(nu, m - 1, remaining - k * m, current, out);
    }
    current[static_cast<std::size_t>(m - 1)] = 0;
}

constexpr double kMaxGridCells = 2e7;
constexpr double kMaxConvolutionWork = 5e10;
constexpr double kMaxMonteCarloDraws = 5e9;

}  // namespace

// ------------------------------------------------------------ CumulantWindow

CumulantWindow::CumulantWindow(const RealizedEnvironment& env, std::size_t begin, std::size_t end)
    : env_(&env), begin_(begin), end_(end) {
    if (begin >= end) throw DegenerateWindow("cumulant window [" + std::to_string(begin) + ", " +
                                             std::to_string(end) + ") is empty");
    if (end > env.length()) throw std::out_of_range("cumulant window extends past the environment");
    std::array<CompensatedSum, kMaxMomentOrder + 1> sums;
    CompensatedSum shift;
    for (std::size_t j = begin; j < end; ++j) {
        const auto& g = env.step_cumulants(j);
        for (std::size_t nu = 2; nu <= kMaxMomentOrder; ++nu) sums[nu] += g[nu];
        shift += env.step_moments(j).mean_step;
    }
    for (std::size_t nu = 2; nu <= kMaxMomentOrder; ++nu) cumulant_sums_[nu] = sums[nu].value();
    mean_shift_ = shift.value();
    if (!(cumulant_sums_[2] > 0.0)) throw DegenerateWindow("cumulant window has zero variance");
    scale_ = std::sqrt(cumulant_sums_[2]);
}

double CumulantWindow::cumulant_sum(int nu) const {
    if (nu < 2 || nu > kMaxMomentOrder) throw std::out_of_range("cumulant order outside [2, 6]");
    return cumulant_sums_[static_cast<std::size_t>(nu)];
}

// ------------------------------------------------------------- coefficients

double EdgeworthCoefficients::at(int nu) const {
    if (nu < 3 || nu > max_order) {
        throw InsufficientCoefficients("lambda_" + std::to_string(nu) + " not available (max order " +
                                       std::to_string(max_order) + ")");
    }
    return lambda[static_cast<std::size_t>(nu)];
}

EdgeworthCoefficients lambda_coeffs(const CumulantWindow& window, int max_order) {
    if (max_order < 3 || max_order > kMaxMomentOrder) {
        throw std::invalid_argument("lambda_coeffs: max order must lie in [3, 6]");
    }
    EdgeworthCoefficients c;
    c.max_order = max_order;
    const double len = static_cast<double>(window.length());
    const double b = window.scale();
    for (int nu = 3; nu <= max_order; ++nu) {
        c.lambda[static_cast<std::size_t>(nu)] =
            std::pow(len, 0.5 * (nu - 2)) * std::pow(b, -nu) * window.cumulant_sum(nu);
    }
    return c;
}

std::vector<std::vector<int>> edgeworth_partitions(int nu) {
    if (nu < 1) throw std::invalid_argument("partition order must be >= 1");
    std::vector<std::vector<int>> out;
    std::vector<int> current(static_cast<std::size_t>(nu), 0);
    enumerate_partitions(nu, nu, nu, current, out);
    return out;
}

HermitePhiSeries q_series_generic(int nu, const EdgeworthCoefficients& coeffs) {
    if (nu < 1 || nu > 4) throw std::invalid_argument("q_series_generic: order must lie in [1, 4]");
    HermitePhiSeries q;
    for (const auto& k : edgeworth_partitions(nu)) {
        int s = 0;
        double product = 1.0;
        for (int m = 1; m <= nu; ++m) {
            const int km = k[static_cast<std::size_t>(m - 1)];
            if (km == 0) continue;
            s += km;
            product *= std::pow(coeffs.at(m + 2) / factorial(m + 2), km) / factorial(km);
        }
        q.add(nu + 2 * s - 1, -product);
    }
    return q;
}

double q_poly_generic(int nu, const EdgeworthCoefficients& coeffs, double x) {
    return q_series_generic(nu, coeffs)(x);
}

HermitePhiSeries q_closed_series(int nu, const RealizedEnvironment& env, std::size_t n) {
    if (n == 0 || n > env.length()) throw std::out_of_range("q_closed: n outside [1, length]");
    const double s = env.s(n);
    if (!(s > 0.0)) throw DegenerateWindow("q_closed: s_n = 0");
    const double s3 = env.s_nu(3, n);

    // Sums of sigma^(4) - 3 (sigma^(2))^2 and sigma^(5) - 10 sigma^(3) sigma^(2).
    CompensatedSum excess4;
    CompensatedSum excess5;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& c = env.step_moments(j).central;
        excess4 += c[4] - 3.0 * c[2] * c[2];
        excess5 += c[5] - 10.0 * c[3] * c[2];
    }

    HermitePhiSeries q;
    switch (nu) {
        case 1:
            q.add(2, -s3 / (6.0 * std::pow(s, 3)));
            break;
        case 2:
            q.add(5, -s3 * s3 / (72.0 * std::pow(s, 6)) * (active_fault() == Fault::q2_coefficient ? 1.01 : 1.0));
            q.add(3, -excess4.value() / (24.0 * std::pow(s, 4)));
            break;
        case 3:
            q.add(8, -s3 * s3 * s3 / (1296.0 * std::pow(s, 9)));
            q.add(4, -excess5.value() / (120.0 * std::pow(s, 5)));
            q.add(6, -s3 * excess4.value() / (144.0 * std::pow(s, 7)));
            break;
        default:
            throw std::invalid_argument("q_closed_series: order must lie in [1, 3]");
    }
    return q;
}

double q1_closed(const RealizedEnvironment& env, std::size_t n, double t) { return q_closed_series(1, env, n)(t); }
double q2_closed(const RealizedEnvironment& env, std::size_t n, double t) { return q_closed_series(2, env, n)(t); }
double q3_closed(const RealizedEnvironment& env, std::size_t n, double t) { return q_closed_series(3, env, n)(t); }

HermitePhiSeries edgeworth_correction(const CumulantWindow& window, int order) {
    if (order < 3 || order > 6) throw std::invalid_argument("edgeworth order must lie in [3, 6]");
    const auto coeffs = lambda_coeffs(window, order);
    const double len = static_cast<double>(window.length());
    HermitePhiSeries total;
    for (int nu = 1; nu <= order - 2; ++nu) {
        total = total + q_series_generic(nu, coeffs).scaled(std::pow(len, -0.5 * nu));
    }
    return total;
}

double edgeworth_cdf(const CumulantWindow& window, int order, double x) {
    return std_normal_cdf(x) + edgeworth_correction(window, order)(x);
}

double clamp_probability(double p) noexcept { return std::clamp(p, 0.0, 1.0); }

// ------------------------------------------------------------------ oracles

WindowSumCdf::WindowSumCdf(const CumulantWindow& window, const OracleMethod& method)
    : env_(&window.env()), last_step_(window.end() - 1), scale_(window.scale()) {
    if (const auto* mc = std::get_if<MonteCarloOracle>(&method)) {
        if (mc->samples < 100000) throw std::invalid_argument("Monte Carlo oracle needs >= 1e5 samples");
        if (static_cast<double>(mc->samples) * static_cast<double>(window.length()) > kMaxMonteCarloDraws) {
            throw OracleBudgetExceeded("Monte Carlo oracle: samples x window length exceeds budget");
        }
        monte_carlo_ = true;
        SplitMix64 rng(mc->seed);
        sorted_samples_.resize(mc->samples);
        for (auto& v : sorted_samples_) {
            double sum = 0.0;
            for (std::size_t j = window.begin(); j < window.end(); ++j) {
                sum += window.env().step(j).moving.sample(rng) - window.env().step_moments(j).mean_step;
            }
            v = sum / scale_;
        }
        std::sort(sorted_samples_.begin(), sorted_samples_.end());
        return;
    }
    const auto& grid = std::get<GridConvolutionOracle>(method);
    if (!(grid.step_fraction > 0.0) || grid.step_fraction > 1.0 / 200.0) {
        throw std::invalid_argument("grid oracle step must be in (0, B/200]");
    }
    if (!(grid.half_width > 0.0)) throw std::invalid_argument("grid oracle half width must be > 0");
    richardson_ = grid.richardson;
    const double h = grid.step_fraction * scale_;
    coarse_ = convolve(window, h, grid.half_width);
    if (richardson_) fine_ = convolve(window, 0.5 * h, grid.half_width);
}

// Tent (linear-split) discretization: a point mass at x is shared between the
// two neighbouring grid nodes so that the conditional mean is preserved. The
// node weight is the second difference of the integrated CDF.
WindowSumCdf::Lattice WindowSumCdf::convolve(const CumulantWindow& window, double step, double half_width) {
    const auto& env = window.env();
    const long limit = static_cast<long>(std::ceil(half_width * window.scale() / step));
    if (2.0 * static_cast<double>(limit) + 1.0 > kMaxGridCells) {
        throw OracleBudgetExceeded("grid oracle: grid too fine for the window");
    }

    Lattice lat;
    lat.step = step;
    lat.first_index = 0;
    lat.mass = {1.0};

    struct Kernel {
        long first = 0;
        std::vector<double> weight;
    };
    std::map<std::size_t, Kernel> kernels;
    double work = 0.0;

    for (std::size_t j = window.begin(); j + 1 < window.end(); ++j) {
        const std::size_t state = env.sequence()[j];
        auto it = kernels.find(state);
        if (it == kernels.end()) {
            const auto& law = env.step(j).moving;
            const double l = env.step_moments(j).mean_step;
            Kernel k;
            const long lo = std::max(-limit, static_cast<long>(std::floor((law.lower_extent() - l) / step)) - 1);
            const long hi = std::min(limit, static_cast<long>(std::ceil((law.upper_extent() - l) / step)) + 1);
            k.first = lo;
            k.weight.resize(static_cast<std::size_t>(hi - lo + 1));
            for (long i = lo; i <= hi; ++i) {
                const double c = static_cast<double>(i) * step + l;
                const double w =
                    (law.integrated_cdf(c + step) - 2.0 * law.integrated_cdf(c) + law.integrated_cdf(c - step)) / step;
                k.weight[static_cast<std::size_t>(i - lo)] = std::max(0.0, w);
            }
            it = kernels.emplace(state, std::move(k)).first;
        }
        const Kernel& k = it->second;
        work += static_cast<double>(lat.mass.size()) * static_cast<double>(k.weight.size());
        if (work > kMaxConvolutionWork) throw OracleBudgetExceeded("grid oracle: convolution work exceeds budget");

        const long new_first = std::max(lat.first_index + k.first, -limit);
        const long new_last =
            std::min(lat.first_index + static_cast<long>(lat.mass.size()) - 1 + k.first +
                         static_cast<long>(k.weight.size()) - 1,
                     limit);
        std::vector<double> next(static_cast<std::size_t>(std::max(0L, new_last - new_first + 1)), 0.0);
        for (std::size_t a = 0; a < lat.mass.size(); ++a) {
            const double ma = lat.mass[a];
            if (ma == 0.0) continue;
            const long base = lat.first_index + static_cast<long>(a) + k.first;
            for (std::size_t b = 0; b < k.weight.size(); ++b) {
                const long idx = base + static_cast<long>(b);
                const double m = ma * k.weight[b];
                if (idx < new_first) {
                    lat.below += m;
                } else if (idx <= new_last) {
                    next[static_cast<std::size_t>(idx - new_first)] += m;
                }
            }
        }
        lat.first_index = new_first;
        lat.mass = std::move(next);
    }
    return lat;
}

double WindowSumCdf::lattice_cdf(const Lattice& lat, double y) const {
    const auto& law = env_->step(last_step_).moving;
    const double l = env_->step_moments(last_step_).mean_step;
    const double lower = law.lower_extent() - l;
    const double upper = law.upper_extent() - l;
    CompensatedSum f;
    f += lat.below;
    for (std::size_t a = 0; a < lat.mass.size(); ++a) {
        const double node = static_cast<double>(lat.first_index + static_cast<long>(a)) * lat.step;
        const double z = y - node;
        if (z < lower) break;
        f += lat.mass[a] * (z >= upper ? 1.0 : law.cdf(z + l));
    }
    return f.value();
}

OracleValue WindowSumCdf::operator()(double x) const {
    if (monte_carlo_) {
        const auto n = static_cast<double>(sorted_samples_.size());
        const auto count = std::upper_bound(sorted_samples_.begin(), sorted_samples_.end(), x) - sorted_samples_.begin();
        const double p = static_cast<double>(count) / n;
        return {p, 3.0 * std::sqrt(p * (1.0 - p) / n)};
    }
    const double y = x * scale_;
    const double coarse = lattice_cdf(coarse_, y);
    if (!richardson_) return {coarse, 0.0};
    const double fine = lattice_cdf(fine_, y);
    const double extrapolated = (4.0 * fine - coarse) / 3.0;
    return {extrapolated, std::abs(fine - coarse) / 3.0};
}

OracleValue oracle_cdf(const CumulantWindow& window, double x, const OracleMethod& method) {
    return WindowSumCdf(window, method)(x);
}

}  // namespace brwre
