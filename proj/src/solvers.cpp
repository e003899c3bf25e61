#include "hpr/solvers.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hpr/random.hpp"

namespace hpr {
namespace {

using Clock = std::chrono::steady_clock;

struct SolverAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BudgetExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Line search found no acceptable step: the iterate is numerically stationary.
struct Stalled : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Trace bookkeeping, the NaN tripwire and the iteration/time budget.
class Recorder {
public:
    Recorder(std::string solver, const Problem& problem, const SolverConfig& config)
        : problem_(problem), config_(config), start_(Clock::now()) {
        run_.solver = std::move(solver);
    }

    SolverRun& run() { return run_; }
    void note(std::string text) { run_.notes.push_back(std::move(text)); }

    // Validates and stores one iteration; `x` is the iterate the entry describes.
    void record(TraceEntry e, const ImageGrid& x) {
        const int k = e.iter;
        if (!all_finite(x)) fail(k, "non-finite iterate");
        if (!std::isfinite(e.objective)) fail(k, "non-finite objective");
        if (problem_.truth) e.nrmse = nrmse(project_box(x, config_.C), *problem_.truth);
        run_.trace.push_back(e);
        last_good_ = x;
        if (static_cast<int>(run_.trace.size()) >= config_.max_iters) {
            budget_hit_ = true;
            throw BudgetExhausted("iteration budget reached");
        }
        if (elapsed_ms() > config_.max_wall_ms) {
            budget_hit_ = true;
            throw BudgetExhausted("time budget reached");
        }
    }

    [[noreturn]] void fail(int iter, const std::string& what) {
        std::ostringstream os;
        os << "aborted at iteration " << iter << ": " << what;
        throw SolverAbort(os.str());
    }

    void set_start(const ImageGrid& x) { last_good_ = x; }
    const ImageGrid& last_good() const { return last_good_; }
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    }
    bool budget_hit() const { return budget_hit_; }

private:
    const Problem& problem_;
    const SolverConfig& config_;
    Clock::time_point start_;
    SolverRun run_;
    ImageGrid last_good_;
    bool budget_hit_ = false;
};

// Runs `body(recorder)`, which returns the final image. Aborts and budget
// exhaustion end the run with the last recorded iterate and a status.
template <class Body>
SolverRun guarded(const char* name, const Problem& problem, const SolverConfig& config, Body&& body) {
    problem.validate();
    config.validate();
    Recorder rec(name, problem, config);
    rec.set_start(project_box(problem.x0, config.C));
    ImageGrid final_image;
    try {
        final_image = body(rec);
    } catch (const SolverAbort& e) {
        rec.run().status = e.what();
        final_image = rec.last_good();
    } catch (const BudgetExhausted& e) {
        rec.run().status = "budget";
        rec.note(e.what());
        final_image = rec.last_good();
    } catch (const Stalled& e) {
        rec.note(e.what());
        final_image = rec.last_good();
    }
    rec.run().image = project_box(std::move(final_image), config.C);
    rec.run().wall_ms = rec.elapsed_ms();
    return std::move(rec.run());
}

double data_lipschitz(const DataFidelity& g, double C) {
    if (g.kind() == Likelihood::pg) {
        return lipschitz_report(g.op(), g.measurements(), g.model(), C).best();
    }
    return curvature_lipschitz_bound(g, C);
}

// Step rule after resolving the Lipschitz policy into a fixed step.
struct Step {
    bool backtracking = false;
    double mu = 0.0;
    BacktrackingStep bt{};
    double last_mu = 0.0;  // previous accepted backtracking step
};

template <class LipschitzFn>
Step resolve_step(const StepPolicy& policy, LipschitzFn&& lipschitz, Recorder& rec) {
    Step s;
    if (const auto* f = std::get_if<FixedStep>(&policy)) {
        s.mu = f->mu;
    } else if (const auto* l = std::get_if<LipschitzStep>(&policy)) {
        const double L = lipschitz();
        if (std::isfinite(L) && L > 0.0) {
            s.mu = l->safety / L;
        } else {
            s.backtracking = true;
            rec.note("lipschitz constant not finite; backtracking fallback");
        }
    } else {
        s.backtracking = true;
        s.bt = std::get<BacktrackingStep>(policy);
    }
    return s;
}

struct Moved {
    ImageGrid x;
    double mu = 0.0;
};

// One (optionally projected) descent step along -grad. With backtracking the
// Armijo test uses F, whose gradient should be `grad`.
// Backtracking starts from min(mu_init, last accepted step / shrink).
Moved descend(const ImageGrid& x, const ImageGrid& grad, Step& step, const Objective& F,
              std::optional<double> box, Recorder& rec, int iter) {
    if (!all_finite(grad)) rec.fail(iter, "non-finite gradient");
    if (!step.backtracking) {
        ImageGrid next = axpy(x, -step.mu, grad);
        if (box) next = project_box(std::move(next), *box);
        return {std::move(next), step.mu};
    }
    if (max_abs(grad) == 0.0) return {x, 0.0};
    const double fx = F(x);
    if (!std::isfinite(fx)) rec.fail(iter, "non-finite objective");
    BacktrackingStep bt = step.bt;
    if (step.last_mu > 0.0) bt.mu_init = std::min(bt.mu_init, step.last_mu / bt.shrink);
    try {
        auto r = backtracking_step(F, x, fx, grad, -1.0 * grad, bt, box);
        step.last_mu = r.mu;
        return {std::move(r.point), r.mu};
    } catch (const std::runtime_error&) {
        std::ostringstream os;
        os << "line search stalled at iteration " << iter << "; stopped";
        throw Stalled(os.str());
    }
}

double prior_energy_or_nan(ScoreProvider* reg, const ImageGrid& x, double sigma) {
    return reg && reg->has_energy() ? reg->energy(x, sigma) : kNaN;
}

// F = g + h_sigma when h is available, else g.
Objective posterior_objective(const DataFidelity& g, ScoreProvider* reg, double sigma) {
    if (reg && reg->has_energy()) {
        return [&g, reg, sigma](const ImageGrid& v) { return g.value(v) + reg->energy(v, sigma); };
    }
    return [&g](const ImageGrid& v) { return g.value(v); };
}

ImageGrid with_score(ImageGrid grad, ScoreProvider* reg, const ImageGrid& x, double sigma) {
    if (reg) grad += reg->score_grad(x, sigma);
    return grad;
}

double next_eta(double eta) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * eta * eta)); }

}  // namespace

void SolverConfig::validate() const {
    hpr::validate(step);
    if (!(epsilon > 0.0)) throw std::invalid_argument("SolverConfig: epsilon must be positive");
    if (!(rho > 0.0)) throw std::invalid_argument("SolverConfig: rho must be positive");
    if (!(beta >= 0.0)) throw std::invalid_argument("SolverConfig: beta must be >= 0");
    if (!(C > 0.0)) throw std::invalid_argument("SolverConfig: C must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("SolverConfig: gamma must lie in [0,1]");
    if (!(prior_sigma >= 0.0)) throw std::invalid_argument("SolverConfig: prior_sigma must be >= 0");
    if (!(denoise_strength >= 0.0)) throw std::invalid_argument("SolverConfig: denoise_strength must be >= 0");
    if (iterations < 0 || inner_iterations < 1) throw std::invalid_argument("SolverConfig: bad iteration counts");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
    schedule.validate();
    truncation.validate();
}

void Problem::validate() const {
    if (!op || !meas) throw std::invalid_argument("Problem: operator and measurements are required");
    meas->validate(op->measurement_count());
    if (x0.rows() != op->n() || x0.cols() != op->n()) throw std::invalid_argument("Problem: x0 shape mismatch");
    if (!all_finite(x0)) throw std::invalid_argument("Problem: x0 must be finite");
    if (truth && !truth->same_shape(x0)) throw std::invalid_argument("Problem: truth shape mismatch");
}

SolverRun wf(const Problem& problem, const SolverConfig& config, ScoreProvider* reg) {
    return guarded("wf", problem, config, [&](Recorder& rec) {
        DataFidelity g(*problem.op, *problem.meas, config.likelihood, config.truncation);
        const double sigma = config.prior_sigma;
        Step step = resolve_step(
            config.step,
            [&] { return data_lipschitz(g, config.C) + (reg ? reg->lipschitz_bound(sigma, config.C) : 0.0); },
            rec);
        if (step.backtracking && reg && !reg->has_energy()) rec.note("armijo test on g only");
        const Objective F = posterior_objective(g, reg, sigma);
        ImageGrid x = project_box(problem.x0, config.C);
        for (int k = 1; k <= config.iterations; ++k) {
            const ImageGrid grad = with_score(g.gradient(x), reg, x, sigma);
            Moved m = descend(x, grad, step, F, config.C, rec, k);
            x = std::move(m.x);
            TraceEntry e;
            e.iter = k;
            e.sigma = reg ? sigma : kNaN;
            e.objective = g.value(x);
            e.prior_energy = prior_energy_or_nan(reg, x, sigma);
            e.step = m.mu;
            rec.record(e, x);
        }
        return x;
    });
}

SolverRun wfsd(const Problem& problem, const SolverConfig& config, ScoreProvider& provider) {
    return guarded("wfsd", problem, config, [&](Recorder& rec) {
        DataFidelity g(*problem.op, *problem.meas, config.likelihood, config.truncation);
        ScoreProvider* reg = &provider;
        double L_data = -1.0;
        auto lipschitz_at = [&](double sigma) {
            if (L_data < 0.0) L_data = data_lipschitz(g, config.C);
            return L_data + provider.lipschitz_bound(sigma, config.C);
        };
        ImageGrid x = project_box(problem.x0, config.C);
        int iter = 0;
        for (std::size_t k = 0; k < config.schedule.levels.size(); ++k) {
            const double sigma = config.schedule.levels[k];
            Step step;
            if (config.epsilon_steps) {
                step.mu = config.epsilon * sigma * sigma;
            } else {
                step = resolve_step(config.step, [&] { return lipschitz_at(sigma); }, rec);
            }
            const Objective F = posterior_objective(g, reg, sigma);
            for (int t = 1; t <= config.schedule.passes_per_level; ++t) {
                ++iter;
                const ImageGrid grad = with_score(g.gradient(x), reg, x, sigma);
                Moved m = descend(x, grad, step, F, config.C, rec, iter);
                x = std::move(m.x);
                TraceEntry e;
                e.iter = iter;
                e.level = static_cast<int>(k) + 1;
                e.sigma = sigma;
                e.objective = g.value(x);
                e.prior_energy = prior_energy_or_nan(reg, x, sigma);
                e.step = m.mu;
                rec.record(e, x);
            }
        }
        return x;
    });
}

SolverRun awfs(const Problem& problem, const SolverConfig& config, ScoreProvider& provider) {
    return guarded("awfs", problem, config, [&](Recorder& rec) {
        DataFidelity g(*problem.op, *problem.meas, config.likelihood, config.truncation);
        const bool select = config.gamma_mode == GammaMode::posterior_select;
        const bool with_energy = provider.has_energy();
        if (select) {
            rec.note(with_energy ? "gamma: posterior_select on g + h" : "gamma: posterior_select on g only");
        } else {
            std::ostringstream os;
            os << "gamma: fixed " << config.gamma;
            rec.note(os.str());
        }
        double L_data = -1.0;
        auto lipschitz_at = [&](double sigma) {
            if (L_data < 0.0) L_data = data_lipschitz(g, config.C);
            return L_data + provider.lipschitz_bound(sigma, config.C);
        };
        const double C = config.C;
        ImageGrid x = project_box(problem.x0, C);
        int iter = 0;
        // Backtracking: one warm-started line search per candidate, kept across levels.
        std::optional<Step> step_v, step_z;
        for (std::size_t k = 0; k < config.schedule.levels.size(); ++k) {
            const double sigma = config.schedule.levels[k];
            double mu = kNaN;
            if (config.epsilon_steps) {
                mu = config.epsilon * sigma * sigma;
            } else if (!step_v) {
                Step step = resolve_step(config.step, [&] { return lipschitz_at(sigma); }, rec);
                if (step.backtracking) {
                    step_v = step;
                    step_z = step;
                    rec.note("backtracking on both candidates; z projected");
                } else {
                    mu = step.mu;
                }
            }
            auto energy = [&](const ImageGrid& v) { return with_energy ? provider.energy(v, sigma) : 0.0; };
            const Objective F = [&](const ImageGrid& v) { return g.value(v) + energy(v); };

            // Level entry: x_{0,k} = z_{1,k} = x so both momentum terms vanish at t = 1.
            ImageGrid z = x;
            ImageGrid x_prev = x;
            double eta_prev = 1.0;
            double eta = next_eta(eta_prev);
            double F_x = select ? g.value(x) + energy(x) : kNaN;

            for (int t = 1; t <= config.schedule.passes_per_level; ++t) {
                ++iter;
                const ImageGrid dz = (eta_prev / eta) * (z - x);
                const ImageGrid dx = ((eta_prev - 1.0) / eta) * (x - x_prev);
                const ImageGrid w = project_box(x + dz + dx, C);

                const ImageGrid s_x = provider.score_grad(x, sigma);
                const bool w_is_x = (w == x);
                const ImageGrid s_w = w_is_x ? s_x : provider.score_grad(w, sigma);
                const ImageGrid grad_x = g.gradient(x);
                const ImageGrid grad_w = w_is_x ? grad_x : g.gradient(w);
                const ImageGrid d_w = grad_w + s_w;
                const ImageGrid d_x = grad_x + s_x;
                if (!all_finite(d_w) || !all_finite(d_x)) rec.fail(iter, "non-finite gradient");

                ImageGrid z_next, v_next;
                double mu_t = mu;
                if (step_v) {
                    Moved mv = descend(x, d_x, *step_v, F, C, rec, iter);
                    v_next = std::move(mv.x);
                    mu_t = mv.mu;
                    try {
                        z_next = descend(w, d_w, *step_z, F, C, rec, iter).x;
                    } catch (const Stalled&) {
                        z_next = w;
                    }
                } else {
                    z_next = axpy(w, -mu, d_w);
                    v_next = axpy(x, -mu, d_x);
                }
                const double eta_next = next_eta(eta);

                TraceEntry e;
                e.iter = iter;
                e.level = static_cast<int>(k) + 1;
                e.sigma = sigma;
                e.step = mu_t;
                e.eta = eta;
                ImageGrid x_next;
                if (select) {
                    ImageGrid pz = project_box(z_next, C);
                    ImageGrid pv = project_box(v_next, C);
                    const double gz = g.value(pz), hz = energy(pz);
                    const double gv = g.value(pv), hv = energy(pv);
                    const double Fz = gz + hz;
                    const double Fv = gv + hv;
                    if (Fz < Fv) {
                        x_next = std::move(pz);
                        e.gamma = 1.0;
                        e.objective = gz;
                        e.prior_energy = with_energy ? hz : kNaN;
                        e.posterior_after = Fz;
                    } else {
                        x_next = std::move(pv);
                        e.gamma = 0.0;
                        e.objective = gv;
                        e.prior_energy = with_energy ? hv : kNaN;
                        e.posterior_after = Fv;
                    }
                    e.posterior_before = F_x;
                    F_x = e.posterior_after;
                } else {
                    const double gm = config.gamma;
                    if (gm == 0.0) {
                        x_next = project_box(v_next, C);
                    } else if (gm == 1.0) {
                        x_next = project_box(z_next, C);
                    } else {
                        x_next = project_box(gm * z_next + (1.0 - gm) * v_next, C);
                    }
                    e.gamma = gm;
                    e.objective = g.value(x_next);
                    e.prior_energy = with_energy ? energy(x_next) : kNaN;
                }
                x_prev = std::move(x);
                x = std::move(x_next);
                z = std::move(z_next);
                eta_prev = eta;
                eta = eta_next;
                rec.record(e, x);
            }
        }
        return x;
    });
}

void DdpmSchedule::validate() const {
    if (T < 1) throw std::invalid_argument("DdpmSchedule: T must be >= 1");
    const auto n = static_cast<std::size_t>(T);
    if (beta.size() != n || alpha.size() != n || alpha_bar.size() != n) {
        throw std::invalid_argument("DdpmSchedule: table sizes must equal T");
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (!(beta[t] > 0.0 && beta[t] < 1.0)) throw std::invalid_argument("DdpmSchedule: beta must lie in (0,1)");
        if (t > 0 && !(beta[t] >= beta[t - 1])) throw std::invalid_argument("DdpmSchedule: beta must ascend");
        if (t > 0 && !(alpha_bar[t] < alpha_bar[t - 1])) {
            throw std::invalid_argument("DdpmSchedule: alpha_bar must strictly decrease");
        }
    }
}

DdpmSchedule make_ddpm_schedule(int T, double beta_1, double beta_T, bool stochastic) {
    if (T < 1) throw std::invalid_argument("make_ddpm_schedule: T must be >= 1");
    if (!(beta_1 > 0.0 && beta_T < 1.0 && beta_1 <= beta_T)) {
        throw std::invalid_argument("make_ddpm_schedule: need 0 < beta_1 <= beta_T < 1");
    }
    DdpmSchedule s;
    s.T = T;
    s.stochastic = stochastic;
    double running = 1.0;
    for (int t = 0; t < T; ++t) {
        const double b = T == 1 ? beta_1 : beta_1 + (beta_T - beta_1) * t / (T - 1);
        s.beta.push_back(b);
        s.alpha.push_back(1.0 - b);
        running *= 1.0 - b;
        s.alpha_bar.push_back(running);
    }
    s.validate();
    return s;
}

ImageGrid predict_noise(ScoreProvider& provider, const ImageGrid& x_t, double alpha_bar) {
    if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) throw std::invalid_argument("predict_noise: alpha_bar in (0,1)");
    const double root = std::sqrt(alpha_bar);
    const double s = std::sqrt((1.0 - alpha_bar) / alpha_bar);
    ImageGrid eps = provider.score_grad((1.0 / root) * x_t, s);
    eps *= s;
    return eps;
}

SolverRun dolph(const Problem& problem, const SolverConfig& config, ScoreProvider& provider,
                const DdpmSchedule& schedule) {
    schedule.validate();
    return guarded("dolph", problem, config, [&](Recorder& rec) {
        DataFidelity g(*problem.op, *problem.meas, config.likelihood, config.truncation);
        // Lipschitz rule uses the closed-form constant here, so an overflowing
        // bound falls through to backtracking.
        Step step = resolve_step(
            config.step,
            [&] {
                if (g.kind() != Likelihood::pg) return data_lipschitz(g, config.C);
                return lipschitz_report(g.op(), g.measurements(), g.model(), config.C).L_pg;
            },
            rec);
        const Objective G = [&g](const ImageGrid& v) { return g.value(v); };
        if (schedule.stochastic) rec.note("sigma_t^2 = beta_t"); else rec.note("sigma_t = 0");

        Rng rng(mix_seed(config.seed, 0x646f6c7068));
        const std::size_t n = problem.op->n();
        ImageGrid x = ImageGrid::square(n);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
        rec.set_start(x);

        for (int t = schedule.T; t >= 1; --t) {
            const auto ti = static_cast<std::size_t>(t - 1);
            const int iter = schedule.T - t + 1;
            const double a = schedule.alpha[ti];
            const double abar = schedule.alpha_bar[ti];
            const ImageGrid eps = predict_noise(provider, x, abar);
            ImageGrid next = (1.0 / std::sqrt(a)) * axpy(x, -(1.0 - a) / std::sqrt(1.0 - abar), eps);
            if (t > 1 && schedule.stochastic) {
                const double sd = std::sqrt(schedule.beta[ti]);
                for (std::size_t i = 0; i < next.size(); ++i) next[i] += sd * rng.normal();
            }
            const ImageGrid grad = g.gradient(next);
            Moved m = descend(next, grad, step, G, std::nullopt, rec, iter);
            x = std::move(m.x);
            TraceEntry e;
            e.iter = iter;
            e.level = t;
            e.sigma = std::sqrt((1.0 - abar) / abar);
            e.objective = g.value(x);
            e.step = m.mu;
            rec.record(e, x);
        }
        return x;
    });
}

SolverRun pnp_admm(const Problem& problem, const SolverConfig& config, Denoiser& denoiser) {
    return guarded("pnp_admm", problem, config, [&](Recorder& rec) {
        DataFidelity g(*problem.op, *problem.meas, config.likelihood, config.truncation);
        const double rho = config.rho;
        Step step = resolve_step(config.step, [&] { return data_lipschitz(g, config.C) + rho; }, rec);
        rec.note(config.pnp_literal ? "x-update: literal D(x_k)" : "x-update: D(u - eta)");
        ImageGrid x = project_box(problem.x0, config.C);
        ImageGrid u = x;
        ImageGrid eta(x.rows(), x.cols());
        double last_mu = 0.0;
        for (int k = 1; k <= config.iterations; ++k) {
            const ImageGrid anchor = x + eta;
            const Objective G = [&](const ImageGrid& v) {
                const ImageGrid d = v - anchor;
                return g.value(v) + 0.5 * rho * dot(d, d);
            };
            for (int t = 0; t < config.inner_iterations; ++t) {
                const ImageGrid grad = g.gradient(u) + rho * (u - anchor);
                Moved m = descend(u, grad, step, G, config.C, rec, k);
                u = std::move(m.x);
                last_mu = m.mu;
            }
            ImageGrid x_next = config.pnp_literal ? denoiser.denoise(x, config.denoise_strength)
                                                  : denoiser.denoise(u - eta, config.denoise_strength);
            x_next = project_box(std::move(x_next), config.C);
            eta += x_next - u;
            x = std::move(x_next);
            TraceEntry e;
            e.iter = k;
            e.objective = g.value(x);
            e.step = last_mu;
            e.residual = norm2(x - u);
            rec.record(e, x);
        }
        return x;
    });
}

SolverRun pnp_pgm(const Problem& problem, const SolverConfig& config, Denoiser& denoiser) {
    if (config.beta > 1.0) throw std::invalid_argument("pnp_pgm: beta must lie in [0,1]");
    return guarded("pnp_pgm", problem, config, [&](Recorder& rec) {
        DataFidelity g(*problem.op, *problem.meas, config.likelihood, config.truncation);
        Step step = resolve_step(config.step, [&] { return data_lipschitz(g, config.C); }, rec);
        const Objective G = [&g](const ImageGrid& v) { return g.value(v); };
        ImageGrid x = project_box(problem.x0, config.C);
        for (int k = 1; k <= config.iterations; ++k) {
            const ImageGrid grad = g.gradient(x);
            // x~ is the projected WF step, so beta = 0 is WF under any step rule
            Moved m = descend(x, grad, step, G, config.C, rec, k);
            const ImageGrid& x_tilde = m.x;
            const ImageGrid x_bar = denoiser.denoise(x_tilde, config.denoise_strength);
            x = project_box(axpy(x_tilde, config.beta, x_bar - x_tilde), config.C);
            TraceEntry e;
            e.iter = k;
            e.objective = g.value(x);
            e.step = m.mu;
            rec.record(e, x);
        }
        return x;
    });
}

SolverRun red_sd(const Problem& problem, const SolverConfig& config, Denoiser& denoiser) {
    return guarded("red_sd", problem, config, [&](Recorder& rec) {
        DataFidelity g(*problem.op, *problem.meas, config.likelihood, config.truncation);
        // Residual term x - D(x) is 2-Lipschitz for a nonexpansive denoiser.
        Step step =
            resolve_step(config.step, [&] { return data_lipschitz(g, config.C) + 2.0 * config.beta; }, rec);
        // Armijo on the RED functional g + beta/2 <x, x - D(x)>; its gradient is
        // the update direction when D is locally homogeneous with symmetric Jacobian.
        if (step.backtracking && config.beta > 0.0) rec.note("armijo test on g + beta/2 <x, x - D(x)>");
        const double beta = config.beta;
        const Objective G = [&](const ImageGrid& v) {
            if (beta == 0.0) return g.value(v);
            return g.value(v) + 0.5 * beta * dot(v, v - denoiser.denoise(v, config.denoise_strength));
        };
        ImageGrid x = project_box(problem.x0, config.C);
        for (int k = 1; k <= config.iterations; ++k) {
            const ImageGrid resid = x - denoiser.denoise(x, config.denoise_strength);
            const ImageGrid grad = axpy(g.gradient(x), config.beta, resid);
            Moved m = descend(x, grad, step, G, config.C, rec, k);
            x = std::move(m.x);
            TraceEntry e;
            e.iter = k;
            e.objective = g.value(x);
            e.step = m.mu;
            e.residual = norm2(resid);
            rec.record(e, x);
        }
        return x;
    });
}

SolverRun admm_intensity_split(const Problem& problem, const SolverConfig& config, ScoreProvider* reg) {
    return guarded("admm_intensity_split", problem, config, [&](Recorder& rec) {
        const HolographicOperator& op = *problem.op;
        const MeasurementSet& meas = *problem.meas;
        DataFidelity g(op, meas, config.likelihood, config.truncation);
        const double rho = config.rho;
        const double sigma = config.prior_sigma;
        Step step_u;
        step_u.backtracking = true;
        if (const auto* bt = std::get_if<BacktrackingStep>(&config.step)) step_u.bt = *bt;
        Step step_x = step_u;
        if (reg && !reg->has_energy()) rec.note("x-step armijo test without the prior term");

        const std::size_t M = op.measurement_count();
        auto as_row = [M](std::vector<double> v) { return ImageGrid(1, M, std::move(v)); };
        auto total_intensity = [&](const ImageGrid& v) {
            std::vector<double> a = op.intensity(v);
            for (std::size_t i = 0; i < M; ++i) a[i] += meas.b_bar[i];
            return as_row(std::move(a));
        };
        const double inf = std::numeric_limits<double>::infinity();

        ImageGrid x = project_box(problem.x0, config.C);
        ImageGrid a = total_intensity(x);
        ImageGrid u = a;
        ImageGrid eta(1, M);
        for (int k = 1; k <= config.iterations; ++k) {
            // u-step on Phi(u) + rho/2 |u - a - eta|^2, u >= 0.
            const ImageGrid target = a + eta;
            const Objective J = [&](const ImageGrid& v) {
                const ImageGrid d = v - target;
                return g.value_from_intensity(v.values()) + 0.5 * rho * dot(d, d);
            };
            for (int t = 0; t < config.inner_iterations; ++t) {
                const ImageGrid grad = as_row(g.intensity_gradient(u.values())) + rho * (u - target);
                u = descend(u, grad, step_u, J, inf, rec, k).x;
            }
            // x-step on rho/2 |A(x) + b - u + eta|^2 + R(x).
            const ImageGrid shift = u - eta;
            const Objective E = [&](const ImageGrid& v) {
                const ImageGrid r = total_intensity(v) - shift;
                double val = 0.5 * rho * dot(r, r);
                if (reg && reg->has_energy()) val += reg->energy(v, sigma);
                return val;
            };
            double last_mu = 0.0;
            for (int t = 0; t < config.inner_iterations; ++t) {
                const ImageGrid r = total_intensity(x) - shift;
                Field f = op.apply_forward(x);
                for (std::size_t i = 0; i < M; ++i) f[i] *= r[i];
                ImageGrid grad = op.apply_adjoint(f);
                grad *= 2.0 * rho;
                grad = with_score(std::move(grad), reg, x, sigma);
                Moved m = descend(x, grad, step_x, E, config.C, rec, k);
                x = std::move(m.x);
                last_mu = m.mu;
            }
            a = total_intensity(x);
            eta += a - u;
            TraceEntry e;
            e.iter = k;
            e.objective = g.value(x);
            e.prior_energy = prior_energy_or_nan(reg, x, sigma);
            e.step = last_mu;
            e.residual = norm2(a - u);
            rec.record(e, x);
        }
        return x;
    });
}

SpectralInit spectral_init(const HolographicOperator& op, const MeasurementSet& meas, int iterations,
                           double C, std::uint64_t seed) {
    meas.validate(op.measurement_count());
    if (iterations < 1) throw std::invalid_argument("spectral_init: iterations must be >= 1");
    const std::size_t M = op.measurement_count();
    if (M < op.pixel_count()) throw std::invalid_argument("spectral_init: need M >= N");
    std::vector<double> yhat(M);
    double total = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        yhat[i] = std::max(meas.y[i] - meas.b_bar[i], 0.0);
        total += yhat[i];
    }
    if (!(total > 0.0)) throw std::domain_error("spectral_init: degenerate all-zero measurements");
    const double mean = total / static_cast<double>(M);
    for (double& v : yhat) v /= mean;

    Rng rng(mix_seed(seed, 0x73706563));
    const std::size_t n = op.n();
    ImageGrid v = ImageGrid::square(n);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.normal();
    v *= 1.0 / norm2(v);

    SpectralInit out;
    for (int it = 0; it < iterations; ++it) {
        Field f = op.apply_linear(v);
        for (std::size_t i = 0; i < M; ++i) f[i] *= yhat[i];
        ImageGrid w = op.apply_adjoint(f);
        out.rayleigh.push_back(dot(v, w));
        const double nw = norm2(w);
        if (!(nw > 0.0)) throw std::domain_error("spectral_init: power iteration collapsed");
        v = (1.0 / nw) * std::move(w);
    }

    // E sum(y - b) = g^2 (|x|^2 + |r|^2): the two blocks have disjoint support.
    const double gain2 = op.alpha() * op.alpha();
    const double ref2 = dot(op.reference(), op.reference());
    double energy = total / gain2 - ref2;
    if (!(energy > 0.0)) energy = total / gain2;
    double sum = 0.0;
    for (double t : v.values()) sum += t;
    if (sum < 0.0) v *= -1.0;
    v *= std::sqrt(energy);
    out.image = project_box(std::move(v), C);
    return out;
}

}  // namespace hpr
