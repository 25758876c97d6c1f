// special_functions.cpp

#include "brwre/special_functions.hpp"

#include "brwre/fault_injection.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace brwre {

namespace {

void check_degree(int m) {
    if (m < 0 || m > kMaxHermiteDegree) {
        throw DegreeOutOfRange("Hermite degree " + std::to_string(m) +
                               " outside [0, " + std::to_string(kMaxHermiteDegree) + "]");
    }
}

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

}  // namespace

double hermite_explicit(int m, double x) {
    check_degree(m);
    const double mfact = factorial(m);
    double sum = 0.0;
    for (int k = 0; k <= m / 2; ++k) {
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        const double denom = factorial(k) * factorial(m - 2 * k) * std::ldexp(1.0, k);
        sum += sign * mfact / denom * std::pow(x, m - 2 * k);
    }
    return sum;
}

double hermite_recurrence(int m, double x) {
    check_degree(m);
    if (m == 0) return 1.0;
    const double bias = active_fault() == Fault::hermite_recurrence ? 0.5 : 0.0;
    double prev = 1.0;
    double cur = x;
    for (int j = 1; j < m; ++j) {
        const double next = x * cur - (j == 3 ? j + bias : j) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

std::vector<double> hermite_coefficients(int m) {
    check_degree(m);
    std::vector<double> c(static_cast<std::size_t>(m) + 1, 0.0);
    const double mfact = factorial(m);
    for (int k = 0; k <= m / 2; ++k) {
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        c[static_cast<std::size_t>(m - 2 * k)] =
            sign * std::round(mfact / (factorial(k) * factorial(m - 2 * k) * std::ldexp(1.0, k)));
    }
    return c;
}

double std_normal_pdf(double t) {
    return std::numbers::inv_sqrtpi / std::numbers::sqrt2 * std::exp(-0.5 * t * t);
}

// erfc keeps full relative accuracy in the lower tail, so 1 - Phi never
// suffers cancellation here.
double std_normal_cdf(double t) {
    return 0.5 * std::erfc(-t / std::numbers::sqrt2);
}

void HermitePhiSeries::add(int degree, double coefficient) {
    check_degree(degree);
    for (auto& term : terms_) {
        if (term.degree == degree) {
            term.coefficient += coefficient;
            return;
        }
    }
    terms_.push_back({degree, coefficient});
}

double HermitePhiSeries::operator()(double x) const {
    if (terms_.empty()) return 0.0;
    double poly = 0.0;
    for (const auto& term : terms_) poly += term.coefficient * hermite_recurrence(term.degree, x);
    return poly * std_normal_pdf(x);
}

HermitePhiSeries HermitePhiSeries::derivative(int order) const {
    HermitePhiSeries out;
    const double sign = (order % 2 == 0) ? 1.0 : -1.0;
    for (const auto& term : terms_) out.add(term.degree + order, sign * term.coefficient);
    return out;
}

HermitePhiSeries HermitePhiSeries::scaled(double factor) const {
    HermitePhiSeries out = *this;
    for (auto& term : out.terms_) term.coefficient *= factor;
    return out;
}

HermitePhiSeries operator+(const HermitePhiSeries& a, const HermitePhiSeries& b) {
    HermitePhiSeries out = a;
    for (const auto& term : b.terms()) out.add(term.degree, term.coefficient);
    return out;
}

}  // namespace brwre
