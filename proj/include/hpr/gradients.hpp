#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hpr/image.hpp"
#include "hpr/likelihood.hpp"
#include "hpr/measurement.hpp"
#include "hpr/operator.hpp"

namespace hpr {

enum class Likelihood { gaussian, poisson, pg };

Likelihood parse_likelihood(const std::string& name);
std::string to_string(Likelihood kind);

// Wirtinger gradients with respect to real x. The reference field is part of
// f = L x + c; the adjoint acts on the x-block only.

/// 2 Re A'( phi(|f|^2 + b; y) . f )
ImageGrid grad_pg(const HolographicOperator& op, const ImageGrid& x, std::span<const double> y,
                  const PgNoiseModel& model);
/// 4 Re A'( (|f|^2 - y + b) . f )
ImageGrid grad_gaussian(const HolographicOperator& op, const ImageGrid& x,
                        std::span<const double> y, std::span<const double> b_bar);
/// 2 Re A'( (1 - y / (|f|^2 + b)) . f )
ImageGrid grad_poisson(const HolographicOperator& op, const ImageGrid& x,
                       std::span<const double> y, std::span<const double> b_bar);

/// The data-fidelity term g(x) for one likelihood, bound to an operator and
/// a measurement set. Holds references; both must outlive it.
class DataFidelity {
public:
    DataFidelity(const HolographicOperator& op, const MeasurementSet& meas, Likelihood kind,
                 TruncationPolicy truncation = {});

    Likelihood kind() const noexcept { return kind_; }
    const HolographicOperator& op() const noexcept { return *op_; }
    const MeasurementSet& measurements() const noexcept { return *meas_; }
    const PgNoiseModel& model() const noexcept { return model_; }
    PgNoiseModel& model() noexcept { return model_; }

    double value(const ImageGrid& x) const;
    ImageGrid gradient(const ImageGrid& x) const;
    /// Value from the intensity vector u = |f|^2 + b.
    double value_from_intensity(std::span<const double> u) const;
    /// d g / d u_i, per measurement.
    std::vector<double> intensity_gradient(std::span<const double> u) const;

private:
    const HolographicOperator* op_;
    const MeasurementSet* meas_;
    Likelihood kind_;
    PgNoiseModel model_;
};

/// (1 - e^{-1/sigma^2}) e^{(2 y_max - 1)/sigma^2}; +inf when the exponent exceeds 700.
double phi_slope_bound(double sigma, double y_max);

/// 4C^2 |A|_2^2 |A|_inf^2 mu + 2 |A|_2^2 |1 - C^2 |A|_inf^2 mu|, mu = phi_slope_bound.
double pg_lipschitz_bound(const OperatorNorms& norms, double C, double sigma, double y_max);

struct LipschitzReport {
    double mu_phi = 0.0;
    double L_pg = 0.0;            ///< closed-form constant (may be +inf)
    double curvature_bound = 0.0; ///< Hessian bound from a per-measurement scan
    double y_max = 0.0;
    double C = 1.0;
    double spectral_norm = 0.0;
    double infinity_norm = 0.0;
    bool overflow = false;        ///< closed form overflowed

    /// Closed-form constant when finite, else the curvature bound.
    double best() const;
};

/// Bound on the Hessian of g_PG over the box [0, C]^N:
/// |A|_2^2 max_i sup_u (2|phi_i(u)| + 4 |phi_i'(u)| (u - b_i)), where u ranges over
/// the intensities reachable by measurement i. The sup is taken on `grid` points.
double curvature_lipschitz_bound(const HolographicOperator& op, std::span<const double> y,
                                 const PgNoiseModel& model, double C, int grid = 32);
/// Same bound for the likelihood of `g` (gradient factor 2(u - y) for Gaussian,
/// 1 - y/u for Poisson).
double curvature_lipschitz_bound(const DataFidelity& g, double C, int grid = 32);

LipschitzReport lipschitz_report(const HolographicOperator& op, const MeasurementSet& meas,
                                 const PgNoiseModel& model, double C);

// Step-size policies.
struct FixedStep {
    double mu = 1e-3;
};
struct LipschitzStep {
    double safety = 0.9;  ///< mu = safety / L
};
struct BacktrackingStep {
    double armijo = 1e-4;
    double shrink = 0.5;
    double mu_init = 1.0;
};
using StepPolicy = std::variant<FixedStep, LipschitzStep, BacktrackingStep>;

void validate(const StepPolicy& policy);
std::string describe(const StepPolicy& policy);

using Objective = std::function<double(const ImageGrid&)>;

struct BacktrackingResult {
    double mu = 0.0;
    double value = 0.0;   ///< objective at the accepted point
    ImageGrid point;      ///< accepted point
    int shrinks = 0;
};

/// Armijo backtracking along d from x: largest mu = mu_init * shrink^k, k <= 60,
/// with f(x + mu d) <= f(x) + armijo * mu <grad, d>. With `box_upper` the trial
/// point is projected onto [0, C] and the test uses <grad, trial - x>.
/// Throws when d is not a descent direction or no k <= 60 is accepted.
BacktrackingResult backtracking_step(const Objective& f, const ImageGrid& x, double fx,
                                     const ImageGrid& grad, const ImageGrid& d,
                                     const BacktrackingStep& policy,
                                     std::optional<double> box_upper = std::nullopt);

/// Central differences, one coordinate at a time.
ImageGrid finite_diff_grad(const Objective& f, const ImageGrid& x, double h);

}  // namespace hpr
