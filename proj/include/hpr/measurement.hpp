#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hpr/image.hpp"
#include "hpr/operator.hpp"

namespace hpr {

/// Noisy counts y together with the background mean and read-noise level.
struct MeasurementSet {
    std::vector<double> y;
    std::vector<double> b_bar;
    double sigma = 1.0;

    std::size_t size() const noexcept { return y.size(); }
    double y_max() const;
    /// Throws unless lengths equal `expected`, b_bar >= 0 and sigma > 0.
    void validate(std::size_t expected) const;
};

/// y_i = Poisson(|A(x)|_i^2 + b_i) + N(0, sigma^2), deterministic in `seed`.
MeasurementSet simulate_measurements(const HolographicOperator& op, const ImageGrid& x,
                                     std::vector<double> b_bar, double sigma, std::uint64_t seed);

/// Constant-background overload.
MeasurementSet simulate_measurements(const HolographicOperator& op, const ImageGrid& x,
                                     double b_bar, double sigma, std::uint64_t seed);

/// Reference photon budget behind the nominal scaling factor alpha.
inline constexpr double kNominalPhotonPixels = 2.0e4;

/// Operator gain for a nominal scaling factor alpha.
///
/// The operator uses the unitary DFT. With gain g its mean intensity is
/// g^2 ||[x,0,r]||^2 / P; this maps alpha so the mean count equals
/// alpha^2 * kNominalPhotonPixels * ||[x,0,r]||^2 / n^2 at every image size,
/// which puts alpha in [0.02, 0.035] at roughly 6-25 counts per measurement
/// for unit-amplitude images with a half-filled binary reference.
double nominal_gain(double alpha, std::size_t n, std::size_t oversample);

/// Mean of |A(x)|^2 + b over all measurements.
double mean_count(const HolographicOperator& op, const ImageGrid& x, double b_bar);

}  // namespace hpr
