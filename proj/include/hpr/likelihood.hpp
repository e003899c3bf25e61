#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hpr {

/// Truncation of the photon-count series s(a, b).
///
/// The summation runs to n+ = ceil(n* + delta * sigma). With `tail_guard`
/// set it continues past n+ while terms are still within 50 nats of the
/// largest one; indices beyond `hard_cap` raise instead of truncating.
struct TruncationPolicy {
    double delta = 5.0;
    std::int64_t hard_cap = 100000;
    bool tail_guard = true;

    void validate() const;
};

struct PgNoiseModel {
    double sigma = 1.0;
    std::vector<double> b_bar;
    TruncationPolicy truncation;
    /// When enabled, measurements with y >= poisson_threshold use the Poisson
    /// term (value and gradient). Changes reconstructions; off by default.
    bool poisson_switch = false;
    double poisson_threshold = 100.0;

    void validate() const;
};

/// Peak location n* = sigma^2 W((a / sigma^2) exp(b / sigma^2)) of the
/// summand a^n/n! exp(-((b - n)/(sqrt(2) sigma))^2), treating n as continuous.
double lambert_peak(double a, double b, double sigma);

/// n+ = ceil(n* + delta * sigma), clamped at 0.
std::int64_t truncation_limit(double a, double b, double sigma, const TruncationPolicy& policy);

/// log s(a, b), evaluated by log-sum-exp over the truncated series.
double log_s(double a, double b, double sigma, const TruncationPolicy& policy = {});

/// phi(u; v) = 1 - s(u, v - 1) / s(u, v).
double phi(double u, double v, double sigma, const TruncationPolicy& policy = {});

/// d phi / du = (s(u,v-1)/s(u,v))^2 - s(u,v-2)/s(u,v).
double phi_derivative(double u, double v, double sigma, const TruncationPolicy& policy = {});

/// Per-measurement PG negative log-likelihood at total intensity u (b included):
/// u + log(2 pi sigma^2) / 2 - log s(u, y).
double nll_pg_term(double u, double y, double sigma, const TruncationPolicy& policy = {});

/// Sum of per-measurement PG terms. Entries selected by the Poisson switch use
/// u - y log u instead.
double nll_pg(std::span<const double> u, std::span<const double> y, const PgNoiseModel& model);

/// ||y - u||^2 (u includes the background).
double nll_gaussian(std::span<const double> u, std::span<const double> y);

/// 1'u - y' log u (u includes the background).
double nll_poisson(std::span<const double> u, std::span<const double> y);
double nll_poisson_term(double u, double y);

/// Pairwise (tree) summation; fixed association order independent of threads.
double pairwise_sum(std::span<const double> values);

}  // namespace hpr
