#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace sparsepin {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// log(e^a + e^b), exact for -inf operands.
inline double log_add(double a, double b) noexcept
{
    if (a < b) std::swap(a, b);
    if (b == neg_inf) return a;
    return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) noexcept
{
    double peak = neg_inf;
    for (double x : xs) peak = std::max(peak, x);
    if (peak == neg_inf || !std::isfinite(peak)) return peak;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - peak);
    return peak + std::log(acc);
}

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept
    {
        add(x);
        return *this;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Log-domain accumulator: keeps a running maximum and a compensated sum of
/// rescaled terms so that sums of e^{x} with x in the hundreds stay finite.
class LogSumAccumulator {
public:
    void add(double log_term) noexcept
    {
        if (log_term == neg_inf) return;
        if (log_term > peak_) {
            if (peak_ != neg_inf) {
                const double scale = std::exp(peak_ - log_term);
                CompensatedSum rescaled;
                rescaled.add(sum_.value() * scale);
                sum_ = rescaled;
            }
            peak_ = log_term;
        }
        sum_.add(std::exp(log_term - peak_));
    }
    [[nodiscard]] double log_value() const noexcept
    {
        return peak_ == neg_inf ? neg_inf : peak_ + std::log(sum_.value());
    }

private:
    double peak_ = neg_inf;
    CompensatedSum sum_;
};

struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
    double variance = 0.0;
    std::size_t count = 0;
};

// Two-pass sample statistics over an indexed vector; the reduction order is
// fixed by the index so the result does not depend on who produced the data.
template <class T>
MeanStderr sample_stats(std::span<const T> xs)
{
    MeanStderr out;
    out.count = xs.size();
    if (xs.empty()) return out;
    CompensatedSum s;
    for (const auto& x : xs) s.add(static_cast<double>(x));
    out.mean = s.value() / static_cast<double>(xs.size());
    if (xs.size() < 2) return out;
    CompensatedSum ss;
    for (const auto& x : xs) {
        const double d = static_cast<double>(x) - out.mean;
        ss.add(d * d);
    }
    out.variance = ss.value() / static_cast<double>(xs.size() - 1);
    out.std_error = std::sqrt(out.variance / static_cast<double>(xs.size()));
    return out;
}

template <class T>
MeanStderr sample_stats(const std::vector<T>& xs)
{
    return sample_stats(std::span<const T>(xs));
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares of y on x.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("least_squares: need at least two paired points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

}  // namespace sparsepin
