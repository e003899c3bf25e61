#pragma once

#include <memory>

#include "hpr/measurement.hpp"
#include "hpr/operator.hpp"
#include "hpr/random.hpp"
#include "hpr/solvers.hpp"
#include "hpr/synthetic.hpp"

namespace testing_fixtures {

inline hpr::ImageGrid uniform_image(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    hpr::Rng rng(seed);
    hpr::ImageGrid x = hpr::ImageGrid::square(n);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = lo + (hi - lo) * rng.uniform();
    return x;
}

// Small simulated problem; pointers in `problem()` refer into this object.
struct Small {
    hpr::ImageGrid truth;
    std::unique_ptr<hpr::HolographicOperator> op;
    hpr::MeasurementSet meas;
    hpr::ImageGrid x0;

    Small(std::size_t n, double alpha, double sigma, std::uint64_t seed, double b_bar = 0.1)
        : truth(hpr::make_synthetic(hpr::SyntheticKind::gmm_texture, n, seed)),
          op(std::make_unique<hpr::HolographicOperator>(hpr::make_operator(
              n, hpr::nominal_gain(alpha, n, 2), 2, hpr::random_binary_reference(n, seed + 1000)))),
          meas(hpr::simulate_measurements(*op, truth, b_bar, sigma, seed + 2000)),
          x0(uniform_image(n, seed + 3000, 0.05, 0.95)) {}

    // the returned problem points into this object
    hpr::Problem problem() const { return hpr::Problem{op.get(), &meas, x0, &truth}; }
};

}  // namespace testing_fixtures
