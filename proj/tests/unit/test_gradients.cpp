#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "hpr/gradients.hpp"

using namespace hpr;
using testing_fixtures::Small;
using testing_fixtures::uniform_image;

namespace {

double rel_err(const ImageGrid& a, const ImageGrid& b) { return norm2(a - b) / norm2(b); }

ImageGrid fd_of(const DataFidelity& g, const ImageGrid& x, double h) {
    return finite_diff_grad([&](const ImageGrid& v) { return g.value(v); }, x, h);
}

}  // namespace

TEST_CASE("zero field gives zero gradient") {
    const std::size_t n = 8;
    const HolographicOperator op = make_operator(n, 1.0, 2, ImageGrid::square(n));
    MeasurementSet m;
    m.y.assign(op.measurement_count(), 3.0);
    m.b_bar.assign(op.measurement_count(), 0.2);
    m.sigma = 1.0;
    for (auto kind : {Likelihood::pg, Likelihood::poisson, Likelihood::gaussian}) {
        CHECK(max_abs(DataFidelity(op, m, kind).gradient(ImageGrid::square(n))) == 0.0);
    }
}

TEST_CASE("analytic gradients match central differences") {
    Small s(8, 0.02, 1.0, 4);
    const ImageGrid x = uniform_image(8, 44, 0.1, 0.9);
    SUBCASE("pg") {
        const DataFidelity g(*s.op, s.meas, Likelihood::pg);
        CHECK(rel_err(g.gradient(x), fd_of(g, x, 1e-5)) < 1e-5);
    }
    SUBCASE("poisson") {
        const DataFidelity g(*s.op, s.meas, Likelihood::poisson);
        CHECK(rel_err(g.gradient(x), fd_of(g, x, 1e-5)) < 1e-6);
    }
    SUBCASE("gaussian") {
        const DataFidelity g(*s.op, s.meas, Likelihood::gaussian);
        CHECK(rel_err(g.gradient(x), fd_of(g, x, 1e-5)) < 1e-6);
    }
}

TEST_CASE("free functions agree with DataFidelity") {
    Small s(8, 0.02, 1.0, 5);
    const ImageGrid x = uniform_image(8, 55);
    PgNoiseModel model;
    model.sigma = s.meas.sigma;
    model.b_bar = s.meas.b_bar;
    CHECK(grad_pg(*s.op, x, s.meas.y, model) == DataFidelity(*s.op, s.meas, Likelihood::pg).gradient(x));
    CHECK(grad_poisson(*s.op, x, s.meas.y, s.meas.b_bar) ==
          DataFidelity(*s.op, s.meas, Likelihood::poisson).gradient(x));
    CHECK(grad_gaussian(*s.op, x, s.meas.y, s.meas.b_bar) ==
          DataFidelity(*s.op, s.meas, Likelihood::gaussian).gradient(x));
}

TEST_CASE("small read noise: pg gradient approaches the Poisson gradient") {
    Small s(8, 0.02, 1.0, 6);
    MeasurementSet m = s.meas;
    m.sigma = 0.05;
    for (auto& v : m.y) v = std::max(0.0, std::round(v));
    const ImageGrid x = uniform_image(8, 66, 0.1, 0.9);
    const ImageGrid gp = DataFidelity(*s.op, m, Likelihood::pg).gradient(x);
    const ImageGrid gq = DataFidelity(*s.op, m, Likelihood::poisson).gradient(x);
    CHECK(rel_err(gp, gq) < 1e-3);
}

TEST_CASE("consistent data is stationary for Gaussian and Poisson") {
    Small s(8, 0.02, 1.0, 7);
    const ImageGrid x = uniform_image(8, 77);
    MeasurementSet m = s.meas;
    const auto I = s.op->intensity(x);
    for (std::size_t i = 0; i < I.size(); ++i) m.y[i] = I[i] + m.b_bar[i];
    const double scale = norm2(DataFidelity(*s.op, s.meas, Likelihood::gaussian).gradient(x));
    CHECK(norm2(DataFidelity(*s.op, m, Likelihood::gaussian).gradient(x)) < 1e-12 * scale);
    CHECK(max_abs(DataFidelity(*s.op, m, Likelihood::poisson).gradient(x)) < 1e-12);
}

TEST_CASE("gaussian gradient is linear in the residual") {
    Small s(8, 0.02, 1.0, 8);
    const ImageGrid x = uniform_image(8, 88);
    const auto I = s.op->intensity(x);
    MeasurementSet m2 = s.meas;
    // residual r = |f|^2 + b - y; y2 doubles it with f fixed
    for (std::size_t i = 0; i < I.size(); ++i) {
        const double r = I[i] + s.meas.b_bar[i] - s.meas.y[i];
        m2.y[i] = I[i] + s.meas.b_bar[i] - 2.0 * r;
    }
    const ImageGrid g1 = DataFidelity(*s.op, s.meas, Likelihood::gaussian).gradient(x);
    const ImageGrid g2 = DataFidelity(*s.op, m2, Likelihood::gaussian).gradient(x);
    CHECK(rel_err(g2, 2.0 * g1) < 1e-12);
}

TEST_CASE("phi slope bound constant") {
    const long double e = std::exp(1.0L);
    CHECK(phi_slope_bound(1.0, 1.0) == doctest::Approx(static_cast<double>((1.0L - 1.0L / e) * e)).epsilon(1e-15));
    CHECK(phi_slope_bound(1.0, 1.0) == doctest::Approx(1.71828).epsilon(1e-5));
    double prev = phi_slope_bound(1.0, 5.0);
    for (double sigma : {2.0, 10.0, 100.0, 1e4}) {
        const double v = phi_slope_bound(sigma, 5.0);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(phi_slope_bound(1e4, 5.0) < 1e-7);
    CHECK(std::isinf(phi_slope_bound(1.0, 400.0)));
    CHECK_THROWS(phi_slope_bound(0.0, 1.0));
}

TEST_CASE("closed-form pg lipschitz constant") {
    const HolographicOperator op = make_operator(8, 0.7, 2, random_binary_reference(8, 2));
    const OperatorNorms& nm = op.norms();
    CHECK(pg_lipschitz_bound(nm, 0.0, 1.0, 3.0) == doctest::Approx(2.0 * nm.spectral * nm.spectral).epsilon(1e-15));

    for (double C : {0.5, 1.0}) {
        for (double y_max : {0.5, 2.0, 10.0}) {
            const long double s = 1.2L, A2 = nm.spectral, Ai = nm.infinity;
            const long double mu = (1.0L - std::exp(-1.0L / (s * s))) * std::exp((2.0L * y_max - 1.0L) / (s * s));
            const long double ref = 4.0L * C * C * A2 * A2 * Ai * Ai * mu +
                                    2.0L * A2 * A2 * std::fabs(1.0L - C * C * Ai * Ai * mu);
            CHECK(pg_lipschitz_bound(nm, C, 1.2, y_max) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-13));
        }
    }
    CHECK(std::isinf(pg_lipschitz_bound(nm, 1.0, 1.0, 2000.0)));
}

TEST_CASE("lipschitz report falls back to the curvature bound") {
    Small s(8, 0.02, 1.0, 9);
    PgNoiseModel model;
    model.sigma = 1.0;
    model.b_bar = s.meas.b_bar;
    const LipschitzReport r = lipschitz_report(*s.op, s.meas, model, 1.0);
    CHECK(r.y_max == s.meas.y_max());
    CHECK(r.overflow);
    CHECK(std::isinf(r.L_pg));
    CHECK(std::isfinite(r.curvature_bound));
    CHECK(r.best() == r.curvature_bound);

    Small low(8, 0.005, 1.0, 9);
    const LipschitzReport q = lipschitz_report(*low.op, low.meas, model, 1.0);
    CHECK_FALSE(q.overflow);
    CHECK(q.best() == q.L_pg);
    CHECK(q.L_pg == pg_lipschitz_bound(low.op->norms(), 1.0, 1.0, low.meas.y_max()));
}

TEST_CASE("curvature bounds hold on sampled pairs") {
    Small s(8, 0.02, 1.0, 10);
    for (auto kind : {Likelihood::pg, Likelihood::poisson, Likelihood::gaussian}) {
        const DataFidelity g(*s.op, s.meas, kind);
        const double L = curvature_lipschitz_bound(g, 1.0);
        REQUIRE(std::isfinite(L));
        double worst = 0.0;
        for (int k = 0; k < 30; ++k) {
            const ImageGrid a = uniform_image(8, 500 + k), b = uniform_image(8, 900 + k);
            worst = std::max(worst, norm2(g.gradient(a) - g.gradient(b)) / norm2(a - b));
        }
        CHECK(worst <= L);
    }
}

TEST_CASE("backtracking on a quadratic") {
    // f(x) = 0.5 sum d_i x_i^2
    ImageGrid dvec(1, 4, std::vector<double>{1.0, 2.0, 5.0, 10.0});
    const Objective f = [&](const ImageGrid& x) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) v += 0.5 * dvec[i] * x[i] * x[i];
        return v;
    };
    auto grad = [&](const ImageGrid& x) {
        ImageGrid g = x;
        for (std::size_t i = 0; i < x.size(); ++i) g[i] *= dvec[i];
        return g;
    };
    const ImageGrid x(1, 4, std::vector<double>{1.0, -1.0, 0.5, 0.3});
    const ImageGrid g = grad(x);
    const ImageGrid d = -1.0 * g;
    const double fx = f(x);
    const BacktrackingStep policy{0.3, 0.5, 1.0};
    const BacktrackingResult r = backtracking_step(f, x, fx, g, d, policy);

    auto armijo_ok = [&](double mu) { return f(axpy(x, mu, d)) <= fx + policy.armijo * mu * dot(g, d); };
    CHECK(armijo_ok(r.mu));
    CHECK_FALSE(armijo_ok(r.mu / policy.shrink));  // largest accepted on the grid
    CHECK(r.value == doctest::Approx(f(r.point)));
    // exact line optimum for comparison
    ImageGrid Dg = grad(g);
    const double mu_star = dot(g, g) / dot(g, Dg);
    CHECK(r.mu <= 2.0 * mu_star / (1.0 - policy.armijo));

    // mu_init <= 1/L: accepted immediately
    const BacktrackingResult r2 = backtracking_step(f, x, fx, g, d, BacktrackingStep{1e-4, 0.5, 0.1});
    CHECK(r2.shrinks == 0);
    CHECK(r2.mu == 0.1);

    CHECK_THROWS(backtracking_step(f, x, fx, g, g, policy));
}

TEST_CASE("projected backtracking stays in the box") {
    const Objective f = [](const ImageGrid& x) { return norm2(axpy(x, -1.0, ImageGrid(2, 2, 2.0))); };
    const ImageGrid x(2, 2, 0.5);
    const ImageGrid g = -1.0 * ImageGrid(2, 2, 1.0);
    const BacktrackingResult r = backtracking_step(f, x, f(x), g, -1.0 * g, {}, 1.0);
    CHECK(within_box(r.point, 1.0));
    CHECK(r.value < f(x));
}

TEST_CASE("finite differences") {
    const ImageGrid w(2, 3, std::vector<double>{1.0, -2.0, 0.5, 3.0, 0.0, -1.0});
    const Objective lin = [&](const ImageGrid& x) { return dot(w, x); };
    const ImageGrid x(2, 3, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    CHECK(max_abs(finite_diff_grad(lin, x, 1e-3) - w) < 1e-12);
    const Objective quad = [&](const ImageGrid& v) { return dot(v, v) + dot(w, v); };
    CHECK(max_abs(finite_diff_grad(quad, x, 1e-3) - (2.0 * x + w)) < 1e-10);
}

TEST_CASE("step policy validation") {
    CHECK_THROWS(validate(StepPolicy{FixedStep{0.0}}));
    CHECK_THROWS(validate(StepPolicy{LipschitzStep{1.5}}));
    CHECK_THROWS(validate(StepPolicy{BacktrackingStep{1.0, 0.5, 1.0}}));
    CHECK_THROWS(validate(StepPolicy{BacktrackingStep{1e-4, 1.0, 1.0}}));
    CHECK_NOTHROW(validate(StepPolicy{BacktrackingStep{}}));
    CHECK(parse_likelihood(to_string(Likelihood::pg)) == Likelihood::pg);
    CHECK_THROWS(parse_likelihood("laplace"));
}
