#include "hpr/special.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hpr {
namespace {

constexpr std::int64_t kTableSize = 10000;

const std::vector<double>& log_factorial_table() {
    static const std::vector<double> table = [] {
        std::vector<double> t(kTableSize + 1, 0.0);
        for (std::int64_t i = 1; i <= kTableSize; ++i) {
            t[i] = t[i - 1] + std::log(static_cast<double>(i));
        }
        return t;
    }();
    return table;
}

}  // namespace

double log_factorial(std::int64_t n) {
    if (n < 0) throw std::domain_error("log_factorial: negative argument");
    if (n <= kTableSize) return log_factorial_table()[static_cast<std::size_t>(n)];
    const double x = static_cast<double>(n);
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // log n! = n log n - n + 0.5 log(2 pi n) + 1/(12n) - 1/(360n^3) + 1/(1260n^5)
    return x * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi * x) +
           inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0));
}

double lambert_w_from_log(double log_z) {
    if (std::isnan(log_z)) throw std::domain_error("lambert_w_from_log: NaN");
    if (log_z < -40.0) {
        // W(z) = z - z^2 + O(z^3)
        const double z = std::exp(log_z);
        return z - z * z;
    }
    double w;
    if (log_z < 1.0) {
        // Halley iteration on w e^w = z starting from log1p(z).
        const double z = std::exp(log_z);
        w = std::log1p(z);
        for (int it = 0; it < 50; ++it) {
            const double ew = std::exp(w);
            const double f = w * ew - z;
            const double fp = ew * (w + 1.0);
            const double step = f / (fp - (w + 2.0) * f / (2.0 * w + 2.0));
            w -= step;
            if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
        }
        return w;
    }
    // Newton on w + log w = log z, which never overflows.
    w = log_z - std::log(log_z);
    if (w <= 0.0) w = 0.5;
    for (int it = 0; it < 100; ++it) {
        const double f = w + std::log(w) - log_z;
        const double step = f / (1.0 + 1.0 / w);
        w -= step;
        if (w <= 0.0) w = 1e-300;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
    }
    return w;
}

}  // namespace hpr
