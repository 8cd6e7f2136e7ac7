#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace mhp {

namespace detail {

// P(a, x) by the power series; converges fast for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Lentz continued fraction; converges fast for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma function P(a, x) for a > 0, x >= 0.
[[nodiscard]] inline double regularized_gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_fraction(a, x);
}

/// Gamma(shape, scale) density.
[[nodiscard]] inline double gamma_pdf(double x, double shape, double scale) {
    if (x < 0.0) return 0.0;
    if (x == 0.0) {
        if (shape < 1.0) return std::numeric_limits<double>::infinity();
        return shape == 1.0 ? 1.0 / scale : 0.0;
    }
    return std::exp((shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) -
                    shape * std::log(scale));
}

/// log(n!) with a table for small n.
class LogFactorial {
public:
    explicit LogFactorial(std::size_t cached = 10000) : table_(cached + 1, 0.0) {
        for (std::size_t n = 2; n < table_.size(); ++n) {
            table_[n] = table_[n - 1] + std::log(static_cast<double>(n));
        }
    }

    [[nodiscard]] double operator()(std::size_t n) const {
        if (n < table_.size()) return table_[n];
        return std::lgamma(static_cast<double>(n) + 1.0);
    }

private:
    std::vector<double> table_;
};

[[nodiscard]] inline const LogFactorial& log_factorial() {
    static const LogFactorial instance;
    return instance;
}

/// log(sum(exp(values))) over a range; -inf when every value is -inf.
template <typename Range>
[[nodiscard]] double log_sum_exp(const Range& values) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : values) peak = std::max(peak, v);
    if (!std::isfinite(peak)) return peak;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - peak);
    return peak + std::log(sum);
}

}  // namespace mhp
