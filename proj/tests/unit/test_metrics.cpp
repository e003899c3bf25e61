#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "hpr/metrics.hpp"

using namespace hpr;
using testing_fixtures::uniform_image;

namespace {

// Mean SSIM over every 8x8 window, written directly from the definition.
double ssim_oracle(const ImageGrid& a, const ImageGrid& b, double L) {
    const std::size_t w = 8;
    const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
    const double N = w * w;
    double total = 0.0;
    int count = 0;
    for (std::size_t r0 = 0; r0 + w <= a.rows(); ++r0) {
        for (std::size_t c0 = 0; c0 + w <= a.cols(); ++c0) {
            double ma = 0, mb = 0;
            for (std::size_t r = r0; r < r0 + w; ++r)
                for (std::size_t c = c0; c < c0 + w; ++c) ma += a(r, c) / N, mb += b(r, c) / N;
            double va = 0, vb = 0, cov = 0;
            for (std::size_t r = r0; r < r0 + w; ++r) {
                for (std::size_t c = c0; c < c0 + w; ++c) {
                    va += (a(r, c) - ma) * (a(r, c) - ma);
                    vb += (b(r, c) - mb) * (b(r, c) - mb);
                    cov += (a(r, c) - ma) * (b(r, c) - mb);
                }
            }
            va /= N - 1, vb /= N - 1, cov /= N - 1;
            total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / count;
}

}  // namespace

TEST_CASE("nrmse by hand") {
    const ImageGrid t(2, 2, std::vector<double>{1.0, 0.0, 0.0, 1.0});
    const ImageGrid h(2, 2, std::vector<double>{1.0, 0.5, 0.0, 0.5});
    // |h - t| = sqrt(0.5), |t| = sqrt(2)
    CHECK(nrmse_raw(h, t) == doctest::Approx(50.0).epsilon(1e-14));
    CHECK(nrmse(h, t) == doctest::Approx(50.0).epsilon(1e-14));
    CHECK(nrmse(ImageGrid(2, 2), t) == 100.0);
    CHECK(nrmse(t, t) == 0.0);
    CHECK_THROWS(nrmse(ImageGrid(3, 3), t));
    CHECK_THROWS(nrmse(t, ImageGrid(2, 2)));
}

TEST_CASE("phase correction") {
    const ImageGrid x = uniform_image(6, 4);
    CHECK(phase_correct(-1.0 * x, x) == x);
    CHECK(phase_correct(x, x) == x);
    const ImageGrid h = uniform_image(6, 5, -0.3, 1.0);
    CHECK(nrmse(h, x) == nrmse(-1.0 * h, x));
    CHECK(nrmse(-1.0 * x, x) == 0.0);
    CHECK(nrmse_raw(-1.0 * x, x) == doctest::Approx(200.0));
    const ImageGrid a(1, 2, std::vector<double>{1.0, 0.0});
    const ImageGrid b(1, 2, std::vector<double>{0.0, 1.0});
    CHECK(phase_correct(-1.0 * a, b) == -1.0 * a);  // zero inner product: unchanged
}

TEST_CASE("ssim against a direct implementation") {
    const ImageGrid t = uniform_image(16, 1);
    for (std::uint64_t seed : {2, 3, 4}) {
        const ImageGrid h = axpy(t, 0.3, uniform_image(16, seed, -0.5, 0.5));
        CHECK(std::abs(ssim(h, t) - ssim_oracle(h, t, 1.0)) < 1e-8);
        SsimParams p;
        p.data_range = 2.0;
        CHECK(std::abs(ssim(h, t, p) - ssim_oracle(h, t, 2.0)) < 1e-8);
    }
    CHECK(ssim(t, t) == doctest::Approx(1.0).epsilon(1e-14));
    const double shifted = ssim(axpy(t, 1.0, ImageGrid::square(16, 0.2)), t);
    CHECK(shifted < 1.0);
    CHECK(shifted > 0.5);
    CHECK_THROWS(ssim(ImageGrid::square(4), ImageGrid::square(4)));  // smaller than one window
}
