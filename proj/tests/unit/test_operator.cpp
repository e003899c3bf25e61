#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "hpr/measurement.hpp"
#include "hpr/operator.hpp"
#include "hpr/random.hpp"

using namespace hpr;

namespace {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Dense unitary DFT restricted to the strip layout [x | 0 | r] in the top-left
// corner of the (s n) x (3 s n) plane, built entry by entry.
struct DenseModel {
    Mat L;   // M x n^2, columns in row-major pixel order
    Vec c;   // reference field
};

DenseModel dense_model(std::size_t n, double gain, std::size_t os, const ImageGrid& ref) {
    const std::size_t R = os * n, Cc = 3 * os * n, P = R * Cc;
    const double scale = gain / std::sqrt(static_cast<double>(P));
    DenseModel m{Mat::Zero(P, n * n), Vec::Zero(P)};
    for (std::size_t kr = 0; kr < R; ++kr) {
        for (std::size_t kc = 0; kc < Cc; ++kc) {
            const std::size_t i = kr * Cc + kc;
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < n; ++c) {
                    const double ph = -2.0 * std::numbers::pi *
                                      (static_cast<double>(kr * r) / R + static_cast<double>(kc * c) / Cc);
                    m.L(i, r * n + c) = scale * std::polar(1.0, ph);
                    if (ref(r, c) != 0.0) {
                        const double phr = -2.0 * std::numbers::pi *
                                           (static_cast<double>(kr * r) / R +
                                            static_cast<double>(kc * (c + 2 * n)) / Cc);
                        m.c(i) += scale * ref(r, c) * std::polar(1.0, phr);
                    }
                }
            }
        }
    }
    return m;
}

ImageGrid random_image(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    ImageGrid x = ImageGrid::square(n);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = lo + (hi - lo) * rng.uniform();
    return x;
}

Eigen::VectorXd as_vec(const ImageGrid& x) {
    Eigen::VectorXd v(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) v(i) = x[i];
    return v;
}

}  // namespace

TEST_CASE("forward and intensity match the dense DFT") {
    const std::size_t n = 8;
    const ImageGrid ref = random_binary_reference(n, 11);
    const HolographicOperator op = make_operator(n, 1.7, 2, ref);
    const DenseModel m = dense_model(n, 1.7, 2, ref);
    const ImageGrid x = random_image(n, 3);

    const Vec expect = m.L * as_vec(x).cast<std::complex<double>>() + m.c;
    const Field got = op.apply_forward(x);
    const std::vector<double> I = op.intensity(x);
    REQUIRE(got.size() == static_cast<std::size_t>(expect.size()));
    double err = 0.0, err_i = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        err = std::max(err, std::abs(got[i] - expect(i)));
        err_i = std::max(err_i, std::abs(I[i] - std::norm(expect(i))));
    }
    CHECK(err < 1e-10);
    CHECK(err_i < 1e-10);

    const auto off = op.offset();
    double err_c = 0.0;
    for (std::size_t i = 0; i < off.size(); ++i) err_c = std::max(err_c, std::abs(off[i] - m.c(i)));
    CHECK(err_c < 1e-10);
}

TEST_CASE("single pixel gives uniform modulus 1/sqrt(P)") {
    const std::size_t n = 8;
    const HolographicOperator op = make_operator(n, 1.0, 2, ImageGrid::square(n));
    ImageGrid x = ImageGrid::square(n);
    x(3, 5) = 1.0;
    const Field f = op.apply_forward(x);
    const double expect = 1.0 / std::sqrt(static_cast<double>(op.plane_size()));
    double err = 0.0;
    for (const auto& v : f) err = std::max(err, std::abs(std::abs(v) - expect));
    CHECK(err < 1e-12);
}

TEST_CASE("zero reference gives a zero offset") {
    const HolographicOperator op = make_operator(8, 2.0, 2, ImageGrid::square(8));
    double m = 0.0;
    for (const auto& v : op.offset()) m = std::max(m, std::abs(v));
    CHECK(m == 0.0);
}

TEST_CASE("measurement count is 3 s^2 n^2") {
    const HolographicOperator op = make_operator(32, 1.0, 2, random_binary_reference(32, 1));
    CHECK(op.measurement_count() == 12288);
    CHECK(op.plane_rows() == 64);
    CHECK(op.plane_cols() == 192);
}

TEST_CASE("adjoint passes the dot-product test") {
    const std::size_t n = 8;
    const HolographicOperator op = make_operator(n, 1.3, 2, random_binary_reference(n, 5));
    Rng rng(99);
    for (int k = 0; k < 20; ++k) {
        const ImageGrid x = random_image(n, 100 + k, -1.0, 1.0);
        Field w(op.measurement_count());
        for (auto& v : w) v = Complex(rng.normal(), rng.normal());
        const Field Lx = op.apply_linear(x);
        double lhs = 0.0;  // Re <Lx, w>
        for (std::size_t i = 0; i < w.size(); ++i) lhs += (std::conj(Lx[i]) * w[i]).real();
        const double rhs = dot(x, op.apply_adjoint(w));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("linear part is linear") {
    const std::size_t n = 8;
    const HolographicOperator op = make_operator(n, 0.9, 2, random_binary_reference(n, 2));
    const ImageGrid a = random_image(n, 1), b = random_image(n, 2);
    const Field la = op.apply_linear(a), lb = op.apply_linear(b);
    const Field lab = op.apply_linear(axpy(2.0 * a, -3.0, b));
    double err = 0.0;
    for (std::size_t i = 0; i < lab.size(); ++i) err = std::max(err, std::abs(lab[i] - (2.0 * la[i] - 3.0 * lb[i])));
    CHECK(err < 1e-12);
}

TEST_CASE("operator norms against a dense SVD and row sums") {
    const std::size_t n = 8;
    const ImageGrid ref = random_binary_reference(n, 4);
    const double gain = 1.0;
    const HolographicOperator op = make_operator(n, gain, 2, ref);
    const DenseModel m = dense_model(n, gain, 2, ref);
    // x is real, so the relevant norm is that of [Re L; Im L].
    Eigen::MatrixXd stacked(2 * m.L.rows(), m.L.cols());
    stacked << m.L.real(), m.L.imag();
    const double sv = Eigen::JacobiSVD<Eigen::MatrixXd>(stacked).singularValues()(0);
    CHECK(std::abs(op.norms().spectral - sv) <= 1e-6 * sv);

    // every entry has modulus gain/sqrt(P): row sums are n^2 gain/sqrt(P)
    const double inf = 64.0 / std::sqrt(768.0);
    CHECK(op.norms().infinity == doctest::Approx(inf).epsilon(1e-12));

    const auto& rq = op.norms().rayleigh;
    REQUIRE(rq.size() > 1);
    for (std::size_t i = 1; i < rq.size(); ++i) CHECK(rq[i] >= rq[i - 1] * (1.0 - 1e-12));
}

TEST_CASE("intensity scales with the square of the gain") {
    const std::size_t n = 8;
    const ImageGrid ref = random_binary_reference(n, 8);
    const ImageGrid x = random_image(n, 8);
    const auto I1 = make_operator(n, 0.5, 2, ref).intensity(x);
    const auto I2 = make_operator(n, 1.0, 2, ref).intensity(x);
    double err = 0.0;
    for (std::size_t i = 0; i < I1.size(); ++i) err = std::max(err, std::abs(I2[i] - 4.0 * I1[i]));
    CHECK(err < 1e-12);
}

TEST_CASE("construction rejects bad arguments") {
    CHECK_THROWS(make_operator(1, 1.0, 2, ImageGrid::square(1)));
    CHECK_THROWS(make_operator(8, 0.0, 2, ImageGrid::square(8)));
    CHECK_THROWS(make_operator(8, 1.0, 0, ImageGrid::square(8)));
    CHECK_THROWS(make_operator(8, 1.0, 2, ImageGrid::square(4)));
    ImageGrid bad = ImageGrid::square(8);
    bad(0, 0) = 0.5;
    CHECK_THROWS(make_operator(8, 1.0, 2, bad));
    const HolographicOperator op = make_operator(8, 1.0, 2, ImageGrid::square(8));
    CHECK_THROWS(op.apply_forward(ImageGrid::square(4)));
}

TEST_CASE("random reference is binary with roughly the requested fill") {
    const ImageGrid r = random_binary_reference(64, 3, 0.3);
    double ones = 0.0;
    for (double v : r.values()) {
        CHECK((v == 0.0 || v == 1.0));
        ones += v;
    }
    CHECK(ones / r.size() == doctest::Approx(0.3).epsilon(0.05));
    CHECK(random_binary_reference(16, 3) == random_binary_reference(16, 3));
}

TEST_CASE("simulated counts have the model mean") {
    const std::size_t n = 8;
    const HolographicOperator op = make_operator(n, 2.0, 1, random_binary_reference(n, 6));
    const ImageGrid x = random_image(n, 6);
    const std::vector<double> I = op.intensity(x);
    const double b = 0.3, sigma = 1.0;
    // average of many independent draws per measurement
    const int draws = 2000;
    std::vector<double> mean(I.size(), 0.0);
    for (int d = 0; d < draws; ++d) {
        const MeasurementSet s = simulate_measurements(op, x, b, sigma, 1000 + d);
        for (std::size_t i = 0; i < I.size(); ++i) mean[i] += s.y[i] / draws;
    }
    double total_err = 0.0, total_var = 0.0;
    for (std::size_t i = 0; i < I.size(); ++i) {
        total_err += mean[i] - (I[i] + b);
        total_var += (I[i] + b + sigma * sigma) / draws;
    }
    // summed error over M measurements is within 5 standard deviations
    CHECK(std::abs(total_err) < 5.0 * std::sqrt(total_var));

    const MeasurementSet a = simulate_measurements(op, x, b, sigma, 7);
    const MeasurementSet a2 = simulate_measurements(op, x, b, sigma, 7);
    CHECK(a.y == a2.y);
    CHECK(a.b_bar == std::vector<double>(I.size(), b));
}

TEST_CASE("nominal gain sets the mean count") {
    const std::size_t n = 16;
    const ImageGrid ref = random_binary_reference(n, 1);
    const ImageGrid x = random_image(n, 1);
    const double alpha = 0.02;
    const HolographicOperator op = make_operator(n, nominal_gain(alpha, n, 2), 2, ref);
    const double energy = norm2(x) * norm2(x) + norm2(ref) * norm2(ref);
    const double expect = alpha * alpha * kNominalPhotonPixels * energy / (n * n);
    // Parseval: mean intensity = g^2 ||[x,0,r]||^2 / P
    CHECK(mean_count(op, x, 0.0) == doctest::Approx(expect).epsilon(1e-10));
    CHECK(mean_count(op, x, 0.5) == doctest::Approx(expect + 0.5).epsilon(1e-10));
}
