#include "hpr/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hpr/random.hpp"

namespace hpr {

double MeasurementSet::y_max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : y) m = std::max(m, v);
    return m;
}

void MeasurementSet::validate(std::size_t expected) const {
    if (y.size() != expected || b_bar.size() != expected) {
        throw std::invalid_argument("MeasurementSet: expected " + std::to_string(expected) +
                                    " entries, got y=" + std::to_string(y.size()) +
                                    " b_bar=" + std::to_string(b_bar.size()));
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("MeasurementSet: sigma must be positive");
    for (double b : b_bar) {
        if (!(b >= 0.0)) throw std::invalid_argument("MeasurementSet: b_bar must be nonnegative");
    }
}

MeasurementSet simulate_measurements(const HolographicOperator& op, const ImageGrid& x,
                                     std::vector<double> b_bar, double sigma, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw std::invalid_argument("simulate_measurements: sigma must be positive");
    if (b_bar.size() != op.measurement_count()) {
        throw std::invalid_argument("simulate_measurements: b_bar length mismatch");
    }
    for (double b : b_bar) {
        if (!(b >= 0.0)) throw std::invalid_argument("simulate_measurements: negative b_bar");
    }
    const std::vector<double> u = op.intensity(x);
    Rng rng(mix_seed(seed, 0x6d656173));
    MeasurementSet out;
    out.sigma = sigma;
    out.y.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double counts = static_cast<double>(rng.poisson(u[i] + b_bar[i]));
        out.y[i] = counts + sigma * rng.normal();
    }
    out.b_bar = std::move(b_bar);
    return out;
}

MeasurementSet simulate_measurements(const HolographicOperator& op, const ImageGrid& x,
                                     double b_bar, double sigma, std::uint64_t seed) {
    return simulate_measurements(op, x, std::vector<double>(op.measurement_count(), b_bar), sigma,
                                 seed);
}

double nominal_gain(double alpha, std::size_t n, std::size_t oversample) {
    const double plane = static_cast<double>(3 * oversample * oversample * n * n);
    return alpha * std::sqrt(kNominalPhotonPixels * plane) / static_cast<double>(n);
}

double mean_count(const HolographicOperator& op, const ImageGrid& x, double b_bar) {
    const std::vector<double> u = op.intensity(x);
    double acc = 0.0;
    for (double v : u) acc += v;
    return acc / static_cast<double>(u.size()) + b_bar;
}

}  // namespace hpr
