#include "hpr/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hpr {
namespace {

constexpr double kExpOverflow = 700.0;

void check_lengths(const HolographicOperator& op, std::span<const double> y,
                   std::span<const double> b, const char* what) {
    if (y.size() != op.measurement_count() || b.size() != op.measurement_count()) {
        throw std::invalid_argument(std::string(what) + ": measurement length mismatch");
    }
}

// 2 * scale * Re A'(weights . f)
ImageGrid weighted_adjoint(const HolographicOperator& op, Field f, std::span<const double> weights,
                           double scale) {
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= weights[i];
    ImageGrid g = op.apply_adjoint(f);
    g *= scale;
    return g;
}

}  // namespace

Likelihood parse_likelihood(const std::string& name) {
    if (name == "gaussian") return Likelihood::gaussian;
    if (name == "poisson") return Likelihood::poisson;
    if (name == "pg") return Likelihood::pg;
    throw std::invalid_argument("unknown likelihood '" + name + "' (gaussian|poisson|pg)");
}

std::string to_string(Likelihood kind) {
    switch (kind) {
        case Likelihood::gaussian: return "gaussian";
        case Likelihood::poisson: return "poisson";
        case Likelihood::pg: return "pg";
    }
    return "?";
}

ImageGrid grad_pg(const HolographicOperator& op, const ImageGrid& x, std::span<const double> y,
                  const PgNoiseModel& model) {
    check_lengths(op, y, model.b_bar, "grad_pg");
    Field f = op.apply_forward(x);
    std::vector<double> w(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double u = std::norm(f[i]) + model.b_bar[i];
        if (model.poisson_switch && y[i] >= model.poisson_threshold) {
            w[i] = 1.0 - y[i] / u;
        } else {
            w[i] = phi(u, y[i], model.sigma, model.truncation);
        }
    }
    return weighted_adjoint(op, std::move(f), w, 2.0);
}

ImageGrid grad_gaussian(const HolographicOperator& op, const ImageGrid& x,
                        std::span<const double> y, std::span<const double> b_bar) {
    check_lengths(op, y, b_bar, "grad_gaussian");
    Field f = op.apply_forward(x);
    std::vector<double> w(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) w[i] = std::norm(f[i]) - y[i] + b_bar[i];
    return weighted_adjoint(op, std::move(f), w, 4.0);
}

ImageGrid grad_poisson(const HolographicOperator& op, const ImageGrid& x,
                       std::span<const double> y, std::span<const double> b_bar) {
    check_lengths(op, y, b_bar, "grad_poisson");
    Field f = op.apply_forward(x);
    std::vector<double> w(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double u = std::norm(f[i]) + b_bar[i];
        if (u <= 0.0) {
            if (y[i] != 0.0) throw std::domain_error("grad_poisson: division by zero intensity");
            w[i] = 1.0;
        } else {
            w[i] = 1.0 - y[i] / u;
        }
    }
    return weighted_adjoint(op, std::move(f), w, 2.0);
}

DataFidelity::DataFidelity(const HolographicOperator& op, const MeasurementSet& meas,
                           Likelihood kind, TruncationPolicy truncation)
    : op_(&op), meas_(&meas), kind_(kind) {
    meas.validate(op.measurement_count());
    model_.sigma = meas.sigma;
    model_.b_bar = meas.b_bar;
    model_.truncation = truncation;
    model_.validate();
}

double DataFidelity::value_from_intensity(std::span<const double> u) const {
    switch (kind_) {
        case Likelihood::gaussian: return nll_gaussian(u, meas_->y);
        case Likelihood::poisson: return nll_poisson(u, meas_->y);
        case Likelihood::pg: return nll_pg(u, meas_->y, model_);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> DataFidelity::intensity_gradient(std::span<const double> u) const {
    const auto& y = meas_->y;
    if (u.size() != y.size()) throw std::invalid_argument("intensity_gradient: length mismatch");
    std::vector<double> g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] >= 0.0)) throw std::domain_error("intensity_gradient: intensity must be nonnegative");
        switch (kind_) {
            case Likelihood::gaussian: g[i] = 2.0 * (u[i] - y[i]); break;
            case Likelihood::poisson:
                if (u[i] <= 0.0 && y[i] != 0.0) throw std::domain_error("intensity_gradient: zero intensity");
                g[i] = u[i] <= 0.0 ? 1.0 : 1.0 - y[i] / u[i];
                break;
            case Likelihood::pg:
                if (model_.poisson_switch && y[i] >= model_.poisson_threshold) {
                    g[i] = 1.0 - y[i] / u[i];
                } else {
                    g[i] = phi(u[i], y[i], model_.sigma, model_.truncation);
                }
                break;
        }
    }
    return g;
}

double DataFidelity::value(const ImageGrid& x) const {
    std::vector<double> u = op_->intensity(x);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += model_.b_bar[i];
    return value_from_intensity(u);
}

ImageGrid DataFidelity::gradient(const ImageGrid& x) const {
    switch (kind_) {
        case Likelihood::gaussian: return grad_gaussian(*op_, x, meas_->y, model_.b_bar);
        case Likelihood::poisson: return grad_poisson(*op_, x, meas_->y, model_.b_bar);
        case Likelihood::pg: return grad_pg(*op_, x, meas_->y, model_);
    }
    throw std::logic_error("DataFidelity: unknown likelihood");
}

double phi_slope_bound(double sigma, double y_max) {
    if (!(sigma > 0.0)) throw std::domain_error("phi_slope_bound: sigma must be positive");
    const double var = sigma * sigma;
    const double exponent = (2.0 * y_max - 1.0) / var;
    if (exponent > kExpOverflow) return std::numeric_limits<double>::infinity();
    return -std::expm1(-1.0 / var) * std::exp(exponent);
}

double pg_lipschitz_bound(const OperatorNorms& norms, double C, double sigma, double y_max) {
    if (!(norms.spectral > 0.0) || !(norms.infinity > 0.0)) {
        throw std::domain_error("pg_lipschitz_bound: operator norms must be positive");
    }
    const double mu = phi_slope_bound(sigma, y_max);
    if (!std::isfinite(mu)) return std::numeric_limits<double>::infinity();
    const double a2 = norms.spectral * norms.spectral;
    const double ainf2 = norms.infinity * norms.infinity;
    const double first = 4.0 * C * C * a2 * ainf2 * mu;
    const double second = 2.0 * a2 * std::abs(1.0 - C * C * ainf2 * mu);
    const double total = first + second;
    return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

double LipschitzReport::best() const {
    if (std::isfinite(L_pg) && L_pg > 0.0) return L_pg;
    if (std::isfinite(curvature_bound) && curvature_bound > 0.0) return curvature_bound;
    return std::numeric_limits<double>::infinity();
}

namespace {

// Gradient factor w(u) and its slope for one measurement; the data gradient
// is 2 Re A'(w . f) for every likelihood.
struct FactorAndSlope {
    double value;
    double slope;
};

FactorAndSlope gradient_factor(Likelihood kind, double u, double y, const PgNoiseModel& model) {
    switch (kind) {
        case Likelihood::gaussian: return {2.0 * (u - y), 2.0};
        case Likelihood::poisson:
            if (u <= 0.0) {
                if (y == 0.0) return {1.0, 0.0};
                return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
            }
            return {1.0 - y / u, y / (u * u)};
        case Likelihood::pg:
            if (model.poisson_switch && y >= model.poisson_threshold) {
                return gradient_factor(Likelihood::poisson, u, y, model);
            }
            return {phi(u, y, model.sigma, model.truncation),
                    phi_derivative(u, y, model.sigma, model.truncation)};
    }
    return {0.0, 0.0};
}

double curvature_bound_impl(const HolographicOperator& op, std::span<const double> y,
                            const PgNoiseModel& model, Likelihood kind, double C, int grid) {
    if (grid < 2) throw std::invalid_argument("curvature_lipschitz_bound: grid must be >= 2");
    if (y.size() != op.measurement_count() || model.b_bar.size() != y.size()) {
        throw std::invalid_argument("curvature_lipschitz_bound: measurement length mismatch");
    }
    const auto c = op.offset();
    const double reach = C * op.norms().infinity;
    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double mag = std::abs(c[i]);
        const double lo = std::max(0.0, mag - reach);
        const double hi = mag + reach;
        for (int k = 0; k < grid; ++k) {
            const double t = lo + (hi - lo) * static_cast<double>(k) / (grid - 1);
            const double amp2 = t * t;
            const FactorAndSlope fs = gradient_factor(kind, amp2 + model.b_bar[i], y[i], model);
            worst = std::max(worst, 2.0 * std::abs(fs.value) + 4.0 * std::abs(fs.slope) * amp2);
        }
    }
    const double a = op.norms().spectral;
    const double bound = a * a * worst;
    return std::isfinite(bound) ? bound : std::numeric_limits<double>::infinity();
}

}  // namespace

double curvature_lipschitz_bound(const HolographicOperator& op, std::span<const double> y,
                                 const PgNoiseModel& model, double C, int grid) {
    return curvature_bound_impl(op, y, model, Likelihood::pg, C, grid);
}

double curvature_lipschitz_bound(const DataFidelity& g, double C, int grid) {
    return curvature_bound_impl(g.op(), g.measurements().y, g.model(), g.kind(), C, grid);
}

LipschitzReport lipschitz_report(const HolographicOperator& op, const MeasurementSet& meas,
                                 const PgNoiseModel& model, double C) {
    LipschitzReport r;
    r.C = C;
    r.y_max = meas.y_max();
    r.spectral_norm = op.norms().spectral;
    r.infinity_norm = op.norms().infinity;
    r.mu_phi = phi_slope_bound(model.sigma, r.y_max);
    r.L_pg = pg_lipschitz_bound(op.norms(), C, model.sigma, r.y_max);
    r.overflow = !std::isfinite(r.L_pg);
    r.curvature_bound = curvature_lipschitz_bound(op, meas.y, model, C);
    return r;
}

void validate(const StepPolicy& policy) {
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FixedStep>) {
                if (!(p.mu > 0.0)) throw std::invalid_argument("FixedStep: mu must be positive");
            } else if constexpr (std::is_same_v<T, LipschitzStep>) {
                if (!(p.safety > 0.0 && p.safety < 1.0)) {
                    throw std::invalid_argument("LipschitzStep: safety must lie in (0,1)");
                }
            } else {
                if (!(p.armijo > 0.0 && p.armijo < 1.0)) {
                    throw std::invalid_argument("BacktrackingStep: armijo must lie in (0,1)");
                }
                if (!(p.shrink > 0.0 && p.shrink < 1.0)) {
                    throw std::invalid_argument("BacktrackingStep: shrink must lie in (0,1)");
                }
                if (!(p.mu_init > 0.0)) {
                    throw std::invalid_argument("BacktrackingStep: mu_init must be positive");
                }
            }
        },
        policy);
}

std::string describe(const StepPolicy& policy) {
    std::ostringstream os;
    std::visit(
        [&os](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FixedStep>) {
                os << "fixed(" << p.mu << ")";
            } else if constexpr (std::is_same_v<T, LipschitzStep>) {
                os << "lipschitz(" << p.safety << ")";
            } else {
                os << "backtracking(" << p.armijo << "," << p.shrink << "," << p.mu_init << ")";
            }
        },
        policy);
    return os.str();
}

BacktrackingResult backtracking_step(const Objective& f, const ImageGrid& x, double fx,
                                     const ImageGrid& grad, const ImageGrid& d,
                                     const BacktrackingStep& policy,
                                     std::optional<double> box_upper) {
    const double slope = dot(grad, d);
    if (!(slope < 0.0)) throw std::runtime_error("backtracking_step: not a descent direction");
    BacktrackingResult out;
    double mu = policy.mu_init;
    for (int k = 0; k <= 60; ++k) {
        ImageGrid trial = axpy(x, mu, d);
        double decrease = mu * slope;
        if (box_upper) {
            trial = project_box(std::move(trial), *box_upper);
            decrease = dot(grad, trial - x);
        }
        const double ft = f(trial);
        if (std::isfinite(ft) && ft <= fx + policy.armijo * decrease) {
            out.mu = mu;
            out.value = ft;
            out.point = std::move(trial);
            out.shrinks = k;
            return out;
        }
        mu *= policy.shrink;
    }
    throw std::runtime_error("backtracking_step: no acceptable step after 60 shrinks");
}

ImageGrid finite_diff_grad(const Objective& f, const ImageGrid& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be positive");
    ImageGrid g(x.rows(), x.cols());
    ImageGrid probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace hpr
