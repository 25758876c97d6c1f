// numerics.cpp

#include "brwre/numerics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace brwre {

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double mean(std::span<const double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    CompensatedSum s;
    for (double v : values) s += v;
    return s.value() / static_cast<double>(values.size());
}

double standard_error(std::span<const double> values) {
    const auto n = values.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(values);
    CompensatedSum ss;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss.value() / static_cast<double>(n - 1) / static_cast<double>(n));
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("fit_line needs two or more paired points");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: abscissae are all equal");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return fit_line(lx, ly).slope;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace brwre
