#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hpr/gradients.hpp"
#include "hpr/image.hpp"
#include "hpr/measurement.hpp"
#include "hpr/metrics.hpp"
#include "hpr/operator.hpp"
#include "hpr/priors.hpp"

namespace hpr {

enum class GammaMode { posterior_select, fixed };

struct SolverConfig {
    Likelihood likelihood = Likelihood::pg;
    /// Step rule for wf, pnp_pgm, red_sd, pnp_admm (inner) and dolph. The
    /// scheduled solvers (wfsd, awfs) use it only when epsilon_steps is false.
    StepPolicy step = LipschitzStep{};
    bool epsilon_steps = true;  ///< wfsd/awfs: mu = epsilon * sigma_k^2
    double epsilon = 0.1;
    NoiseSchedule schedule = make_geometric_schedule(0.1, 0.005, 20, 10);
    /// Noise level handed to the provider by wf (fixed-level regularizer).
    double prior_sigma = 0.005;
    double C = 1.0;
    GammaMode gamma_mode = GammaMode::posterior_select;
    double gamma = 0.0;  ///< fixed-mode weight
    double rho = 1.0;
    double beta = 0.0;
    double denoise_strength = 1.0;
    int iterations = 100;    ///< wf, pnp_pgm, red_sd; outer K for the ADMM variants
    int inner_iterations = 5;
    bool pnp_literal = false;  ///< pnp_admm: x_{k+1} = D(x_k) instead of D(u_{k+1} - eta_k)
    int max_iters = 100000;    ///< hard budget on recorded iterations
    double max_wall_ms = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    TruncationPolicy truncation{};

    void validate() const;
};

struct TraceEntry {
    int iter = 0;
    int level = 0;
    double sigma = std::numeric_limits<double>::quiet_NaN();
    double objective = std::numeric_limits<double>::quiet_NaN();     ///< data term g(x)
    double prior_energy = std::numeric_limits<double>::quiet_NaN();  ///< h(x) when available
    double nrmse = std::numeric_limits<double>::quiet_NaN();
    double step = std::numeric_limits<double>::quiet_NaN();
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double eta = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    /// awfs: selection value F at the start and at the end of the step (same level).
    double posterior_before = std::numeric_limits<double>::quiet_NaN();
    double posterior_after = std::numeric_limits<double>::quiet_NaN();
};

struct SolverRun {
    std::string solver;
    ImageGrid image;
    std::vector<TraceEntry> trace;
    double wall_ms = 0.0;
    std::string status = "ok";
    /// Free-form notes: gamma rule, step fallback, literal mode.
    std::vector<std::string> notes;

    bool ok() const { return status == "ok"; }
};

/// Inputs shared by every solver. `truth` only feeds the NRMSE trace column.
struct Problem {
    const HolographicOperator* op = nullptr;
    const MeasurementSet* meas = nullptr;
    ImageGrid x0;
    const ImageGrid* truth = nullptr;

    void validate() const;
};

/// x_{k+1} = P_C(x_k - mu_k (grad g(x_k) + grad h(x_k))), h at config.prior_sigma.
SolverRun wf(const Problem& problem, const SolverConfig& config, ScoreProvider* reg = nullptr);

/// Score-prior WF over the noise schedule, mu = epsilon sigma_k^2.
SolverRun wfsd(const Problem& problem, const SolverConfig& config, ScoreProvider& provider);

/// Accelerated WF with score prior (z/v candidates, gamma selection).
SolverRun awfs(const Problem& problem, const SolverConfig& config, ScoreProvider& provider);

struct DdpmSchedule {
    int T = 100;
    std::vector<double> beta;       ///< beta_1..beta_T
    std::vector<double> alpha;      ///< 1 - beta_t
    std::vector<double> alpha_bar;  ///< prod_{s<=t} alpha_s
    bool stochastic = false;        ///< add sigma_t z_t with sigma_t^2 = beta_t

    void validate() const;
};

DdpmSchedule make_ddpm_schedule(int T = 100, double beta_1 = 1e-4, double beta_T = 0.3,
                                bool stochastic = false);

/// Noise prediction eps(x_t, t) from a smoothed-score provider. With
/// x_t = sqrt(abar) x + sqrt(1 - abar) eps the rescaled state x_t / sqrt(abar) is x
/// plus noise of std s = sqrt((1 - abar)/abar), and E[eps | x_t] = s * grad h_s.
ImageGrid predict_noise(ScoreProvider& provider, const ImageGrid& x_t, double alpha_bar);

/// Reverse diffusion with a data-consistency gradient step after every step.
/// The diffusion state is unconstrained; traces record P_C of it and the
/// returned image is projected.
SolverRun dolph(const Problem& problem, const SolverConfig& config, ScoreProvider& provider,
                const DdpmSchedule& schedule);

SolverRun pnp_admm(const Problem& problem, const SolverConfig& config, Denoiser& denoiser);
SolverRun pnp_pgm(const Problem& problem, const SolverConfig& config, Denoiser& denoiser);
SolverRun red_sd(const Problem& problem, const SolverConfig& config, Denoiser& denoiser);

/// ADMM on the split u = |Ax|^2 + b with backtracking on the u- and x-steps.
SolverRun admm_intensity_split(const Problem& problem, const SolverConfig& config,
                               ScoreProvider* reg = nullptr);

struct SpectralInit {
    ImageGrid image;
    std::vector<double> rayleigh;  ///< one Rayleigh quotient per power iteration
};

/// Leading eigenvector of x -> Re L'(diag(yhat) L x), yhat = max(y - b, 0) / mean,
/// scaled to the energy implied by the measurements, sign fixed so sum(x) >= 0,
/// projected to [0, C].
SpectralInit spectral_init(const HolographicOperator& op, const MeasurementSet& meas,
                           int iterations = 100, double C = 1.0, std::uint64_t seed = 0);

}  // namespace hpr
