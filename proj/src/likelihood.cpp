#include "hpr/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hpr/special.hpp"

namespace hpr {
namespace {

// Terms this far below the running maximum contribute < 2e-22 relative.
constexpr double kNegligibleNats = 50.0;

struct SeriesTerms {
    double log_a;
    double b;
    double inv_two_var;  // 1 / (2 sigma^2)

    double log_term(std::int64_t n) const {
        const double d = b - static_cast<double>(n);
        return static_cast<double>(n) * log_a - log_factorial(n) - inv_two_var * d * d;
    }
    // log_term(n + 1) - log_term(n); strictly decreasing in n.
    double forward_difference(std::int64_t n) const {
        const double nf = static_cast<double>(n);
        return log_a - std::log(nf + 1.0) + inv_two_var * (2.0 * (b - nf) - 1.0);
    }
};

// Index of the largest summand (the sequence of log terms is concave in n).
std::int64_t series_mode(const SeriesTerms& terms, double peak_hint, std::int64_t hard_cap) {
    if (terms.forward_difference(0) <= 0.0) return 0;
    std::int64_t m = static_cast<std::int64_t>(std::floor(std::max(0.0, peak_hint)));
    m = std::min(m, hard_cap + 1);
    for (int step = 0; step < 16; ++step) {
        if (m > 0 && terms.forward_difference(m - 1) <= 0.0) {
            --m;
        } else if (terms.forward_difference(m) > 0.0) {
            ++m;
        } else {
            return m;
        }
    }
    // Hint was poor: bisect for the first n with forward_difference(n) <= 0.
    std::int64_t lo = 0;
    std::int64_t hi = std::max<std::int64_t>(1, m);
    while (terms.forward_difference(hi) > 0.0) {
        lo = hi;
        hi *= 2;
        if (hi > 4 * hard_cap) throw std::runtime_error("log_s: series mode beyond hard_cap");
    }
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (terms.forward_difference(mid) > 0.0) lo = mid; else hi = mid;
    }
    return hi;
}

void require_sigma(double sigma, const char* what) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::domain_error(std::string(what) + ": sigma must be positive");
    }
}

}  // namespace

void TruncationPolicy::validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("TruncationPolicy: delta must be positive");
    if (hard_cap < 1) throw std::invalid_argument("TruncationPolicy: hard_cap must be >= 1");
}

void PgNoiseModel::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("PgNoiseModel: sigma must be positive");
    for (double b : b_bar) {
        if (!(b >= 0.0)) throw std::invalid_argument("PgNoiseModel: b_bar must be nonnegative");
    }
    truncation.validate();
}

double lambert_peak(double a, double b, double sigma) {
    if (!(a > 0.0)) throw std::domain_error("lambert_peak: a must be positive");
    require_sigma(sigma, "lambert_peak");
    const double var = sigma * sigma;
    const double log_z = std::log(a / var) + b / var;
    return var * lambert_w_from_log(log_z);
}

std::int64_t truncation_limit(double a, double b, double sigma, const TruncationPolicy& policy) {
    if (a == 0.0) return 0;
    const double peak = lambert_peak(a, b, sigma);
    return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(peak + policy.delta * sigma)));
}

double log_s(double a, double b, double sigma, const TruncationPolicy& policy) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::domain_error("log_s: a must be >= 0");
    require_sigma(sigma, "log_s");
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    if (a == 0.0) return -inv_two_var * b * b;

    const SeriesTerms terms{std::log(a), b, inv_two_var};
    const double peak = lambert_peak(a, b, sigma);
    const std::int64_t n_plus =
        std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(peak + policy.delta * sigma)));
    if (n_plus > policy.hard_cap && !policy.tail_guard) {
        throw std::runtime_error("log_s: truncation limit exceeds hard_cap");
    }
    std::int64_t mode = series_mode(terms, peak, policy.hard_cap);
    if (!policy.tail_guard) mode = std::min(mode, n_plus);
    if (mode > policy.hard_cap) throw std::runtime_error("log_s: series mode exceeds hard_cap");

    const double log_max = terms.log_term(mode);
    double acc = 1.0;
    for (std::int64_t n = mode - 1; n >= 0; --n) {
        const double t = terms.log_term(n) - log_max;
        acc += std::exp(t);
        if (t < -kNegligibleNats) break;
    }
    for (std::int64_t n = mode + 1;; ++n) {
        if (!policy.tail_guard && n > n_plus) break;
        if (n > policy.hard_cap) {
            throw std::runtime_error("log_s: series tail still significant at hard_cap");
        }
        const double t = terms.log_term(n) - log_max;
        acc += std::exp(t);
        if (t < -kNegligibleNats) break;
    }
    return log_max + std::log(acc);
}

double phi(double u, double v, double sigma, const TruncationPolicy& policy) {
    return 1.0 - std::exp(log_s(u, v - 1.0, sigma, policy) - log_s(u, v, sigma, policy));
}

double phi_derivative(double u, double v, double sigma, const TruncationPolicy& policy) {
    const double l0 = log_s(u, v, sigma, policy);
    const double l1 = log_s(u, v - 1.0, sigma, policy);
    const double l2 = log_s(u, v - 2.0, sigma, policy);
    return std::exp(2.0 * (l1 - l0)) - std::exp(l2 - l0);
}

double nll_pg_term(double u, double y, double sigma, const TruncationPolicy& policy) {
    if (!(u >= 0.0)) throw std::domain_error("nll_pg: intensity must be nonnegative");
    return u + 0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma) - log_s(u, y, sigma, policy);
}

double nll_pg(std::span<const double> u, std::span<const double> y, const PgNoiseModel& model) {
    if (u.size() != y.size()) throw std::invalid_argument("nll_pg: length mismatch");
    std::vector<double> terms(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (model.poisson_switch && y[i] >= model.poisson_threshold) {
            terms[i] = nll_poisson_term(u[i], y[i]);
        } else {
            terms[i] = nll_pg_term(u[i], y[i], model.sigma, model.truncation);
        }
    }
    return pairwise_sum(terms);
}

double nll_gaussian(std::span<const double> u, std::span<const double> y) {
    if (u.size() != y.size()) throw std::invalid_argument("nll_gaussian: length mismatch");
    std::vector<double> terms(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] >= 0.0)) throw std::domain_error("nll_gaussian: intensity must be nonnegative");
        const double r = y[i] - u[i];
        terms[i] = r * r;
    }
    return pairwise_sum(terms);
}

double nll_poisson_term(double u, double y) {
    if (!(u >= 0.0)) throw std::domain_error("nll_poisson: intensity must be nonnegative");
    if (y == 0.0) return u;
    if (u <= 0.0) throw std::domain_error("nll_poisson: log of nonpositive intensity");
    return u - y * std::log(u);
}

double nll_poisson(std::span<const double> u, std::span<const double> y) {
    if (u.size() != y.size()) throw std::invalid_argument("nll_poisson: length mismatch");
    std::vector<double> terms(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) terms[i] = nll_poisson_term(u[i], y[i]);
    return pairwise_sum(terms);
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace hpr
