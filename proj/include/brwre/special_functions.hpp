// special_functions.hpp
//
// Chebyshev-Hermite (probabilists') polynomials and the standard normal
// density / distribution function.

#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

namespace brwre {

/// Highest Hermite degree accepted by the evaluators.
inline constexpr int kMaxHermiteDegree = 32;

struct DegreeOutOfRange : std::domain_error {
    using std::domain_error::domain_error;
};

/// H_m(x) from the closed-form sum m! sum_k (-1)^k x^(m-2k) / (k! (m-2k)! 2^k).
double hermite_explicit(int m, double x);

/// H_m(x) by upward recurrence H_{m+1} = x H_m - m H_{m-1}.
double hermite_recurrence(int m, double x);

/// Monomial coefficients of H_m, index = power. Exact for m <= 20 in doubles.
std::vector<double> hermite_coefficients(int m);

double std_normal_pdf(double t);
double std_normal_cdf(double t);

/// A finite combination  sum_i c_i H_{m_i}(x) phi(x).
///
/// Every correction polynomial of the expansion has this form, and the family
/// is closed under differentiation: (H_m phi)' = -H_{m+1} phi.
class HermitePhiSeries {
public:
    struct Term {
        int degree;
        double coefficient;
    };

    HermitePhiSeries() = default;
    explicit HermitePhiSeries(std::vector<Term> terms) : terms_(std::move(terms)) {}

    void add(int degree, double coefficient);

    double operator()(double x) const;

    /// d-th derivative in x.
    HermitePhiSeries derivative(int order = 1) const;

    HermitePhiSeries scaled(double factor) const;

    const std::vector<Term>& terms() const noexcept { return terms_; }

private:
    std::vector<Term> terms_;
};

HermitePhiSeries operator+(const HermitePhiSeries& a, const HermitePhiSeries& b);

}  // namespace brwre
