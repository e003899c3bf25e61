#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hpr/image.hpp"
#include "hpr/measurement.hpp"
#include "hpr/operator.hpp"
#include "hpr/priors.hpp"
#include "hpr/solvers.hpp"
#include "hpr/synthetic.hpp"

namespace hpr {

enum class SolverKind { wf, wfsd, awfs, dolph, pnp_admm, pnp_pgm, red, admm_split };

SolverKind parse_solver_kind(const std::string& name);
std::string to_string(SolverKind kind);

/// Prior or denoiser named in a solver entry. "external" runs `command` as an
/// SPR1 server, one process per job.
struct PriorSpec {
    std::string kind = "gmm";  ///< gmm | zero | huber-tv | none | external
    std::string command;
    double huber_delta = 0.01;
    double huber_lambda = 0.02;
};

struct DenoiserSpec {
    std::string kind = "tv";  ///< identity | gaussian | median | tv | external
    std::string command;
    BuiltinDenoiser::Params params{};
};

struct SolverSpec {
    std::string label;
    SolverKind kind = SolverKind::wf;
    SolverConfig config{};
    PriorSpec prior{};
    DenoiserSpec denoiser{};
    int ddpm_steps = 100;
    double ddpm_beta_1 = 1e-4;
    double ddpm_beta_T = 0.3;
    bool ddpm_stochastic = false;
    bool typed = true;  ///< false for a custom label still waiting for its type key
};

/// Built-in labels: the solver kind names, plus pg-wf, poisson-wf and
/// gaussian-wf (wf with that likelihood). Other labels need solver.<label>.type.
SolverSpec default_solver_spec(const std::string& label);

struct ExperimentConfig {
    std::string image = "gmm-texture";  ///< generator name or "file"
    std::filesystem::path image_file;
    std::size_t n = 16;
    std::size_t oversample = 2;
    double reference_fill = 0.5;
    std::vector<double> alphas{0.02};
    std::vector<double> sigmas{1.0};
    double b_bar = 0.1;
    double C = 1.0;
    std::vector<std::uint64_t> seeds{1};
    std::vector<SolverSpec> solvers;
    int init_spectral_iterations = 100;
    int init_poisson_iterations = 50;
    std::filesystem::path output_dir;  ///< empty: no artifacts
    bool write_traces = true;
    bool write_images = true;
    int threads = 0;  ///< 0: hardware concurrency, capped by HPR_THREADS

    void validate() const;
    /// Solver entry by label; nullptr when absent.
    SolverSpec* find_solver(const std::string& label);
};

/// Flat text config: `key = value`, '#' starts a comment. Lists are comma
/// separated; numeric lists also take a:step:b (inclusive) and integer a:b.
/// Per-solver keys are solver.<label>.<key>.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// One key/value into an existing config; throws on unknown keys.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

std::vector<double> parse_real_list(const std::string& text);
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct MetricRow {
    std::string solver;
    double alpha = 0.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double nrmse = 0.0;      ///< percent, after phase correction
    double nrmse_raw = 0.0;  ///< before phase correction
    double ssim = 0.0;
    int iterations = 0;
    double wall_ms = 0.0;
    std::string status = "ok";
};

struct ExperimentResult {
    std::vector<MetricRow> rows;
    std::vector<SolverRun> runs;  ///< parallel to rows
    std::vector<ImageGrid> truths;  ///< parallel to rows
};

/// One simulated problem. The truth and reference depend only on the seed, so
/// every (alpha, sigma) cell of a sweep sees the same images; the noise stream
/// also depends on alpha and sigma.
struct Instance {
    ImageGrid truth;
    std::shared_ptr<const HolographicOperator> op;
    MeasurementSet meas;
};

Instance make_instance(const ExperimentConfig& config, double alpha, double sigma, std::uint64_t seed);

/// Spectral init followed by init_poisson_iterations of backtracking Poisson WF.
ImageGrid initialize(const ExperimentConfig& config, const HolographicOperator& op,
                     const MeasurementSet& meas, std::uint64_t seed);

/// Builds the prior or denoiser named in `spec` and runs it on `problem`.
SolverRun run_solver(const SolverSpec& spec, const Problem& problem, const SolverConfig& config);

/// Worker count: config.threads or hardware concurrency, capped by HPR_THREADS.
int resolve_threads(int requested);

/// Simulate, initialize (spectral -> Poisson WF), solve, score, per
/// (alpha, sigma, seed, solver). Rows are in job-key order. Writes artifacts
/// when output_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string metrics_csv(const std::vector<MetricRow>& rows);
std::string timings_csv(const std::vector<MetricRow>& rows);
std::string trace_jsonl(const SolverRun& run);
/// Whitespace columns: iter nrmse objective step.
std::string trace_dat(const SolverRun& run);

struct ComparisonRow {
    std::string solver;
    std::string alpha;  ///< value, or "all"
    int count = 0;
    double nrmse_poisson_mean = 0.0, nrmse_poisson_std = 0.0;
    double nrmse_pg_mean = 0.0, nrmse_pg_std = 0.0;
    double ssim_poisson_mean = 0.0, ssim_poisson_std = 0.0;
    double ssim_pg_mean = 0.0, ssim_pg_std = 0.0;
};

struct LikelihoodComparison {
    std::vector<ComparisonRow> table;
    ExperimentResult result;
};

/// Runs every configured solver once with the Poisson and once with the PG
/// likelihood on shared instances and initializations.
LikelihoodComparison compare_likelihoods(const ExperimentConfig& config);
std::string format_comparison(const std::vector<ComparisonRow>& table);
std::string comparison_csv(const std::vector<ComparisonRow>& table);

struct SelftestResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Fast invariant checks on small instances.
std::vector<SelftestResult> selftest();

}  // namespace hpr
