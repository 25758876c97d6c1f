// numerics.hpp
//
// Small numerical helpers shared by the simulation and verification code.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace brwre {

/// Neumaier compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Median of a copy of the values; NaN for empty input.
double median(std::vector<double> values);

double mean(std::span<const double> values);

/// Sample standard error of the mean (n-1 denominator).
double standard_error(std::span<const double> values);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. Needs at least 2 points.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of log(y) against log(x); nonpositive y are skipped.
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Shortest round-trip decimal form with 17 significant digits.
std::string format_double(double v);

}  // namespace brwre

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace brwre {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work is handed
/// out by index, so any per-index output is independent of scheduling.
/// The first exception thrown by a task is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace brwre
