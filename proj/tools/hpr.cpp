#include <cmath>
#include <optional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hpr/harness.hpp"
#include "hpr/image_io.hpp"
#include "hpr/metrics.hpp"

namespace fs = std::filesystem;

namespace {

// Flags that mirror ExperimentConfig keys; applied after the config file.
struct CommonFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::string image, image_file, n, oversample, alpha, sigma, b_bar, C, seeds, solvers, output, threads;

    void add(CLI::App* app) {
        app->add_option("-c,--config", config_file, "key = value config file")->check(CLI::ExistingFile);
        app->add_option("--set", sets, "extra key=value, repeatable (solver.<label>.<key>=...)");
        app->add_option("--image", image, "gmm-texture | blobs | checker");
        app->add_option("--image-file", image_file, "ground truth .hpr or .pgm");
        app->add_option("--n", n, "image side");
        app->add_option("--oversample", oversample, "padding factor");
        app->add_option("--alpha", alpha, "list or a:step:b");
        app->add_option("--sigma", sigma, "list or a:step:b");
        app->add_option("--b-bar", b_bar, "background mean");
        app->add_option("--C", C, "box upper bound");
        app->add_option("--seeds", seeds, "list or a:b");
        app->add_option("--solvers", solvers, "comma-separated solver labels");
        app->add_option("-o,--out", output, "output directory");
        app->add_option("--threads", threads, "worker threads (HPR_THREADS caps)");
    }

    /// `ensure_solver`: label added to the solver list when missing.
    hpr::ExperimentConfig build(const std::string& ensure_solver = "") const {
        hpr::ExperimentConfig cfg;
        if (!config_file.empty()) cfg = hpr::load_experiment_config(config_file);
        const std::pair<const char*, const std::string*> flags[] = {
            {"image", &image},   {"image_file", &image_file}, {"n", &n},
            {"oversample", &oversample}, {"alpha", &alpha}, {"sigma", &sigma},
            {"b_bar", &b_bar},   {"C", &C},                   {"seeds", &seeds},
            {"solvers", &solvers}, {"output", &output},       {"threads", &threads}};
        for (const auto& [key, val] : flags) {
            if (!val->empty()) hpr::apply_setting(cfg, key, *val);
        }
        if (!ensure_solver.empty() && !cfg.find_solver(ensure_solver)) {
            std::string labels;
            for (const auto& s : cfg.solvers) labels += s.label + ",";
            hpr::apply_setting(cfg, "solvers", labels + ensure_solver);
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
            hpr::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

int cmd_simulate(const CommonFlags& flags) {
    hpr::ExperimentConfig cfg = flags.build();
    if (cfg.output_dir.empty()) cfg.output_dir = "sim";
    fs::create_directories(cfg.output_dir);
    for (double alpha : cfg.alphas) {
        for (double sigma : cfg.sigmas) {
            for (auto seed : cfg.seeds) {
                const hpr::Instance inst = hpr::make_instance(cfg, alpha, sigma, seed);
                char tag[128];
                std::snprintf(tag, sizeof tag, "a%g_s%g_seed%llu", alpha, sigma,
                              static_cast<unsigned long long>(seed));
                const fs::path base = cfg.output_dir / tag;
                hpr::write_raw_image(base.string() + "_truth.hpr", inst.truth);
                hpr::write_pgm(base.string() + "_truth.pgm", inst.truth, cfg.C);
                hpr::write_raw_image(base.string() + "_reference.hpr", inst.op->reference());
                hpr::write_measurements(base.string() + ".hpm", inst.meas, inst.op->alpha());
                std::printf("%s: M=%zu mean count %.3f y_max %.1f\n", tag, inst.meas.size(),
                            hpr::mean_count(*inst.op, inst.truth, cfg.b_bar), inst.meas.y_max());
            }
        }
    }
    return 0;
}

int cmd_reconstruct(const CommonFlags& flags, const std::string& meas_path, const std::string& ref_path,
                    const std::string& truth_path, const std::string& label, std::uint64_t seed) {
    hpr::ExperimentConfig cfg = flags.build(label);
    const hpr::SolverSpec spec = *cfg.find_solver(label);
    const hpr::MeasurementFile mf = hpr::read_measurements(meas_path);
    const hpr::ImageGrid ref = hpr::read_raw_image(ref_path);
    const std::size_t n = ref.rows();
    const double os = std::sqrt(static_cast<double>(mf.measurements.size()) / (3.0 * n * n));
    const auto oversample = static_cast<std::size_t>(std::lround(os));
    if (oversample < 1 || 3 * oversample * oversample * n * n != mf.measurements.size()) {
        throw std::invalid_argument("measurement count does not match the reference size");
    }
    const hpr::HolographicOperator op = hpr::make_operator(n, mf.alpha, oversample, ref);
    std::optional<hpr::ImageGrid> truth;
    if (!truth_path.empty()) truth = hpr::read_raw_image(truth_path);

    const hpr::ImageGrid init = hpr::initialize(cfg, op, mf.measurements, seed);
    hpr::SolverConfig sc = spec.config;
    sc.C = cfg.C;
    sc.seed = seed;
    const hpr::SolverRun run =
        hpr::run_solver(spec, hpr::Problem{&op, &mf.measurements, init, truth ? &*truth : nullptr}, sc);

    const fs::path out = cfg.output_dir.empty() ? fs::path("recon") : cfg.output_dir;
    fs::create_directories(out);
    hpr::ImageGrid img = truth ? hpr::phase_correct(run.image, *truth) : run.image;
    hpr::write_raw_image(out / (label + ".hpr"), img);
    hpr::write_pgm(out / (label + ".pgm"), img, cfg.C);
    write_file(out / (label + ".jsonl"), hpr::trace_jsonl(run));
    write_file(out / (label + ".dat"), hpr::trace_dat(run));
    std::printf("%s: status %s, %zu iterations, %.1f ms\n", label.c_str(), run.status.c_str(), run.trace.size(),
                run.wall_ms);
    if (truth) {
        std::printf("NRMSE %.4f%%  SSIM %.4f\n", hpr::nrmse(run.image, *truth),
                    hpr::ssim(img, *truth, hpr::SsimParams{.data_range = cfg.C}));
    }
    return run.ok() ? 0 : 1;
}

int cmd_sweep(const CommonFlags& flags) {
    hpr::ExperimentConfig cfg = flags.build();
    if (cfg.solvers.empty()) throw std::invalid_argument("sweep: no solvers configured");
    if (cfg.output_dir.empty()) cfg.output_dir = "sweep";
    const hpr::ExperimentResult res = hpr::run_experiment(cfg);
    int bad = 0;
    for (const auto& r : res.rows) bad += r.status != "ok";
    std::printf("%zu rows -> %s (%d not ok)\n", res.rows.size(), (cfg.output_dir / "metrics.csv").c_str(), bad);
    return 0;
}

int cmd_compare(const CommonFlags& flags) {
    hpr::ExperimentConfig cfg = flags.build();
    const hpr::LikelihoodComparison cmp = hpr::compare_likelihoods(cfg);
    std::fputs(hpr::format_comparison(cmp.table).c_str(), stdout);
    if (!cfg.output_dir.empty()) {
        fs::create_directories(cfg.output_dir);
        write_file(cfg.output_dir / "compare.csv", hpr::comparison_csv(cmp.table));
    }
    return 0;
}

int cmd_selftest() {
    int failed = 0;
    for (const auto& r : hpr::selftest()) {
        std::printf("%s %s (%s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        failed += !r.passed;
    }
    return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"holographic phase retrieval under Poisson-Gaussian noise"};
    app.require_subcommand(1);

    CommonFlags sim_flags, rec_flags, sweep_flags, cmp_flags;
    auto* sim = app.add_subcommand("simulate", "write ground truth, reference and measurements");
    sim_flags.add(sim);

    auto* rec = app.add_subcommand("reconstruct", "run one solver on one measurement file");
    rec_flags.add(rec);
    std::string meas_path, ref_path, truth_path, label = "awfs";
    std::uint64_t seed = 0;
    rec->add_option("-m,--measurements", meas_path, ".hpm file")->required()->check(CLI::ExistingFile);
    rec->add_option("-r,--reference", ref_path, "reference .hpr")->required()->check(CLI::ExistingFile);
    rec->add_option("-t,--truth", truth_path, "ground truth .hpr for metrics")->check(CLI::ExistingFile);
    rec->add_option("-s,--solver", label, "solver label");
    rec->add_option("--seed", seed, "solver seed");

    auto* sweep = app.add_subcommand("sweep", "full (alpha, sigma, seed, solver) grid");
    sweep_flags.add(sweep);
    auto* cmp = app.add_subcommand("compare", "Poisson vs PG likelihood table");
    cmp_flags.add(cmp);
    auto* self = app.add_subcommand("selftest", "invariant suite");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return cmd_simulate(sim_flags);
        if (*rec) return cmd_reconstruct(rec_flags, meas_path, ref_path, truth_path, label, seed);
        if (*sweep) return cmd_sweep(sweep_flags);
        if (*cmp) return cmd_compare(cmp_flags);
        if (*self) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "hpr: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
