#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "hpr/random.hpp"
#include "hpr/special.hpp"

using namespace hpr;

TEST_CASE("log_factorial agrees with lgamma") {
    CHECK(log_factorial(0) == 0.0);
    CHECK(log_factorial(1) == 0.0);
    CHECK(log_factorial(5) == doctest::Approx(std::log(120.0)).epsilon(1e-15));
    for (std::int64_t n : {2, 17, 170, 9999, 10000, 10001, 123456, 10000000}) {
        const double ref = std::lgamma(static_cast<double>(n) + 1.0);
        CHECK(std::abs(log_factorial(n) - ref) <= 1e-13 * ref);
    }
    CHECK_THROWS(log_factorial(-1));
}

TEST_CASE("Lambert W principal branch") {
    CHECK(lambert_w_from_log(0.0) == doctest::Approx(0.5671432904097838).epsilon(1e-15));
    CHECK(lambert_w_from_log(1.0) == doctest::Approx(1.0).epsilon(1e-15));  // W(e) = 1
    // defining identity w e^w = z, checked in log form for huge arguments
    for (double lz : {-30.0, -2.0, 0.3, 5.0, 50.0, 700.0, 1e4, 1e8, 1e200}) {
        const double w = lambert_w_from_log(lz);
        CHECK(std::abs(std::log(w) + w - lz) <= 1e-12 * std::max(1.0, std::abs(lz)));
    }
}

TEST_CASE("rng streams are deterministic and distinct") {
    Rng a(42), b(42), c(43);
    bool differ = false;
    for (int i = 0; i < 100; ++i) {
        const double va = a.uniform();
        CHECK(va == b.uniform());
        differ |= va != c.uniform();
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
    }
    CHECK(differ);
    std::set<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 50; ++s) seeds.insert(mix_seed(7, s));
    CHECK(seeds.size() == 50);
}

TEST_CASE("normal and Poisson moments") {
    Rng rng(1);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        s += v;
        s2 += v * v;
    }
    CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));

    // both branches of the sampler
    for (double mean : {0.0, 0.7, 12.0, 29.9, 30.0, 75.0, 2500.0}) {
        double m = 0.0, m2 = 0.0;
        int negative = 0;
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) {
            const auto k = static_cast<double>(rng.poisson(mean));
            negative += k < 0.0;
            m += k;
            m2 += k * k;
        }
        CHECK(negative == 0);
        m /= draws;
        const double var = m2 / draws - m * m;
        CHECK(std::abs(m - mean) <= 5.0 * std::sqrt((mean + 1e-12) / draws));
        if (mean > 0.0) CHECK(std::abs(var / mean - 1.0) < 0.03);
        else CHECK(var == 0.0);
    }
}
