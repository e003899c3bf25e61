#include "hpr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "hpr/image_io.hpp"
#include "hpr/measurement.hpp"
#include "hpr/metrics.hpp"
#include "hpr/operator.hpp"
#include "hpr/random.hpp"
#include "hpr/score_client.hpp"

namespace hpr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

double to_real(const std::string& key, const std::string& text) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || trim(text.substr(pos)).size() != 0) {
        throw std::invalid_argument("'" + key + "': expected a number, got '" + text + "'");
    }
    return v;
}

long long to_int(const std::string& key, const std::string& text) {
    const double v = to_real(key, text);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) {
        throw std::invalid_argument("'" + key + "': expected an integer, got '" + text + "'");
    }
    return static_cast<long long>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw std::invalid_argument("'" + key + "': expected a boolean, got '" + text + "'");
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string num(double v) { return fmt("%.8g", v); }

// Shortest form that still names the grid point, used in file names and keys.
std::string short_num(double v) { return fmt("%g", v); }

}  // namespace

// ----------------------------------------------------------------------------
// names

SolverKind parse_solver_kind(const std::string& name) {
    if (name == "wf") return SolverKind::wf;
    if (name == "wfsd") return SolverKind::wfsd;
    if (name == "awfs") return SolverKind::awfs;
    if (name == "dolph") return SolverKind::dolph;
    if (name == "pnp-admm") return SolverKind::pnp_admm;
    if (name == "pnp-pgm") return SolverKind::pnp_pgm;
    if (name == "red") return SolverKind::red;
    if (name == "admm-split") return SolverKind::admm_split;
    throw std::invalid_argument("unknown solver type '" + name +
                                "' (wf|wfsd|awfs|dolph|pnp-admm|pnp-pgm|red|admm-split)");
}

std::string to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::wf: return "wf";
        case SolverKind::wfsd: return "wfsd";
        case SolverKind::awfs: return "awfs";
        case SolverKind::dolph: return "dolph";
        case SolverKind::pnp_admm: return "pnp-admm";
        case SolverKind::pnp_pgm: return "pnp-pgm";
        case SolverKind::red: return "red";
        case SolverKind::admm_split: return "admm-split";
    }
    return "?";
}

SolverSpec default_solver_spec(const std::string& label) {
    SolverSpec spec;
    spec.label = label;
    if (label == "pg-wf" || label == "poisson-wf" || label == "gaussian-wf") {
        spec.kind = SolverKind::wf;
        spec.config.likelihood = parse_likelihood(label.substr(0, label.size() - 3));
    } else {
        spec.kind = parse_solver_kind(label);
    }
    switch (spec.kind) {
        case SolverKind::wf:
        case SolverKind::admm_split: spec.prior.kind = "none"; break;
        case SolverKind::pnp_admm:
        case SolverKind::pnp_pgm: spec.config.step = BacktrackingStep{}; break;
        case SolverKind::red:
            spec.config.step = BacktrackingStep{};
            spec.config.beta = 0.5;
            break;
        default: break;
    }
    return spec;
}

// ----------------------------------------------------------------------------
// config

void ExperimentConfig::validate() const {
    if (alphas.empty()) throw std::invalid_argument("config: alpha list is empty");
    if (sigmas.empty()) throw std::invalid_argument("config: sigma list is empty");
    if (seeds.empty()) throw std::invalid_argument("config: seed list is empty");
    for (double a : alphas) {
        if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("config: alpha must be > 0");
    }
    for (double s : sigmas) {
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("config: sigma must be > 0");
    }
    if (!(b_bar >= 0.0)) throw std::invalid_argument("config: b_bar must be >= 0");
    if (!(C > 0.0)) throw std::invalid_argument("config: C must be > 0");
    if (image == "file") {
        if (image_file.empty()) throw std::invalid_argument("config: image = file needs image_file");
    } else {
        parse_synthetic_kind(image);
        if (n < 8) throw std::invalid_argument("config: n must be >= 8 (SSIM window)");
    }
    if (oversample < 1) throw std::invalid_argument("config: oversample must be >= 1");
    if (init_spectral_iterations < 1) {
        throw std::invalid_argument("config: init.spectral_iterations must be >= 1");
    }
    if (init_poisson_iterations < 0) {
        throw std::invalid_argument("config: init.poisson_iterations must be >= 0");
    }
    std::vector<std::string> labels;
    for (const auto& s : solvers) {
        if (std::find(labels.begin(), labels.end(), s.label) != labels.end()) {
            throw std::invalid_argument("config: duplicate solver label '" + s.label + "'");
        }
        labels.push_back(s.label);
        if (!s.typed) throw std::invalid_argument("config: solver '" + s.label + "' needs solver." + s.label + ".type");
        s.config.validate();
    }
}

SolverSpec* ExperimentConfig::find_solver(const std::string& label) {
    for (auto& s : solvers) {
        if (s.label == label) return &s;
    }
    return nullptr;
}

std::vector<double> parse_real_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        if (parts.size() == 1) {
            out.push_back(to_real("list", parts[0]));
            continue;
        }
        double a = 0.0, step = 1.0, b = 0.0;
        if (parts.size() == 2) {
            a = to_real("range", parts[0]);
            b = to_real("range", parts[1]);
        } else if (parts.size() == 3) {
            a = to_real("range", parts[0]);
            step = to_real("range", parts[1]);
            b = to_real("range", parts[2]);
        } else {
            throw std::invalid_argument("bad range '" + item + "'");
        }
        if (!(step > 0.0) || b < a) throw std::invalid_argument("bad range '" + item + "'");
        const double count = std::floor((b - a) / step + 1e-9);
        for (long long i = 0; i <= static_cast<long long>(count); ++i) {
            out.push_back(a + static_cast<double>(i) * step);
        }
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (double v : parse_real_list(text)) {
        if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("seeds must be nonnegative integers");
        out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
}

namespace {

NoiseSchedule rebuild_schedule(const NoiseSchedule& cur, const std::string& field, double v) {
    double hi = cur.levels.front(), lo = cur.levels.back();
    int K = static_cast<int>(cur.levels.size());
    int T = cur.passes_per_level;
    if (field == "passes") return NoiseSchedule{cur.levels, static_cast<int>(v)};  // keep an explicit list
    if (field == "hi") hi = v;
    else if (field == "lo") lo = v;
    else if (field == "levels") K = static_cast<int>(v);
    else T = static_cast<int>(v);
    if (K == 1) return NoiseSchedule{{hi}, T};
    return make_geometric_schedule(hi, lo, K, T);
}

void apply_solver_setting(SolverSpec& spec, const std::string& key, const std::string& value,
                          const std::string& full) {
    SolverConfig& c = spec.config;
    if (key == "type") {
        const std::string label = spec.label;
        spec = default_solver_spec(value);
        spec.label = label;
    } else if (key == "likelihood") {
        c.likelihood = parse_likelihood(value);
    } else if (key == "step") {
        if (value == "fixed") c.step = FixedStep{};
        else if (value == "lipschitz") c.step = LipschitzStep{};
        else if (value == "backtracking") c.step = BacktrackingStep{};
        else throw std::invalid_argument("'" + full + "': fixed|lipschitz|backtracking");
    } else if (key == "step.mu") {
        const double v = to_real(full, value);
        if (auto* f = std::get_if<FixedStep>(&c.step)) f->mu = v;
        else if (auto* b = std::get_if<BacktrackingStep>(&c.step)) b->mu_init = v;
        else c.step = FixedStep{v};
    } else if (key == "step.safety") {
        c.step = LipschitzStep{to_real(full, value)};
    } else if (key == "step.armijo" || key == "step.shrink") {
        auto* b = std::get_if<BacktrackingStep>(&c.step);
        if (!b) {
            c.step = BacktrackingStep{};
            b = std::get_if<BacktrackingStep>(&c.step);
        }
        (key == "step.armijo" ? b->armijo : b->shrink) = to_real(full, value);
    } else if (key == "epsilon_steps") {
        c.epsilon_steps = to_bool(full, value);
    } else if (key == "epsilon") {
        c.epsilon = to_real(full, value);
    } else if (key == "schedule.hi" || key == "schedule.lo" || key == "schedule.levels" ||
               key == "schedule.passes") {
        const double v = to_real(full, value);
        c.schedule = rebuild_schedule(c.schedule, key.substr(9), v);
    } else if (key == "schedule") {
        c.schedule.levels = parse_real_list(value);
    } else if (key == "prior_sigma") {
        c.prior_sigma = to_real(full, value);
    } else if (key == "gamma_mode") {
        if (value == "posterior" || value == "posterior-select") c.gamma_mode = GammaMode::posterior_select;
        else if (value == "fixed") c.gamma_mode = GammaMode::fixed;
        else throw std::invalid_argument("'" + full + "': posterior|fixed");
    } else if (key == "gamma") {
        c.gamma = to_real(full, value);
        c.gamma_mode = GammaMode::fixed;
    } else if (key == "rho") {
        c.rho = to_real(full, value);
    } else if (key == "beta") {
        c.beta = to_real(full, value);
    } else if (key == "denoise_strength") {
        c.denoise_strength = to_real(full, value);
    } else if (key == "iterations") {
        c.iterations = static_cast<int>(to_int(full, value));
    } else if (key == "inner_iterations") {
        c.inner_iterations = static_cast<int>(to_int(full, value));
    } else if (key == "pnp_literal") {
        c.pnp_literal = to_bool(full, value);
    } else if (key == "max_iters") {
        c.max_iters = static_cast<int>(to_int(full, value));
    } else if (key == "max_wall_ms") {
        c.max_wall_ms = to_real(full, value);
    } else if (key == "truncation.delta") {
        c.truncation.delta = to_real(full, value);
    } else if (key == "truncation.hard_cap") {
        c.truncation.hard_cap = to_real(full, value);
    } else if (key == "truncation.tail_guard") {
        c.truncation.tail_guard = to_bool(full, value);
    } else if (key == "prior") {
        spec.prior.kind = value;
        if (value != "gmm" && value != "zero" && value != "huber-tv" && value != "none" &&
            value != "external") {
            throw std::invalid_argument("'" + full + "': gmm|zero|huber-tv|none|external");
        }
    } else if (key == "prior.command") {
        spec.prior.command = value;
    } else if (key == "prior.huber_delta") {
        spec.prior.huber_delta = to_real(full, value);
    } else if (key == "prior.huber_lambda") {
        spec.prior.huber_lambda = to_real(full, value);
    } else if (key == "denoiser") {
        spec.denoiser.kind = value;
        if (value != "external") spec.denoiser.params.kind = parse_denoiser_kind(value);
    } else if (key == "denoiser.command") {
        spec.denoiser.command = value;
    } else if (key == "denoiser.blur_width") {
        spec.denoiser.params.blur_width = to_real(full, value);
    } else if (key == "denoiser.tv_lambda") {
        spec.denoiser.params.tv_lambda = to_real(full, value);
    } else if (key == "denoiser.tv_delta") {
        spec.denoiser.params.tv_delta = to_real(full, value);
    } else if (key == "denoiser.tv_iterations") {
        spec.denoiser.params.tv_iterations = static_cast<int>(to_int(full, value));
    } else if (key == "ddpm.steps") {
        spec.ddpm_steps = static_cast<int>(to_int(full, value));
    } else if (key == "ddpm.beta_1") {
        spec.ddpm_beta_1 = to_real(full, value);
    } else if (key == "ddpm.beta_T") {
        spec.ddpm_beta_T = to_real(full, value);
    } else if (key == "ddpm.stochastic") {
        spec.ddpm_stochastic = to_bool(full, value);
    } else {
        throw std::invalid_argument("unknown solver key '" + full + "'");
    }
}

}  // namespace

void apply_setting(ExperimentConfig& config, const std::string& key_in, const std::string& value_in) {
    const std::string key = trim(key_in);
    const std::string value = trim(value_in);
    if (key.rfind("solver.", 0) == 0) {
        const auto dot = key.find('.', 7);
        if (dot == std::string::npos) throw std::invalid_argument("bad solver key '" + key + "'");
        const std::string label = key.substr(7, dot - 7);
        SolverSpec* spec = config.find_solver(label);
        if (!spec) throw std::invalid_argument("'" + key + "': solver '" + label + "' is not in the solvers list");
        apply_solver_setting(*spec, key.substr(dot + 1), value, key);
        return;
    }
    if (key == "image") {
        if (value != "file") parse_synthetic_kind(value);
        config.image = value;
    } else if (key == "image_file") {
        config.image_file = value;
        config.image = "file";
    } else if (key == "n") {
        config.n = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "oversample") {
        config.oversample = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "reference_fill") {
        config.reference_fill = to_real(key, value);
    } else if (key == "alpha") {
        config.alphas = parse_real_list(value);
    } else if (key == "sigma") {
        config.sigmas = parse_real_list(value);
    } else if (key == "b_bar") {
        config.b_bar = to_real(key, value);
    } else if (key == "C") {
        config.C = to_real(key, value);
    } else if (key == "seeds") {
        config.seeds = parse_seed_list(value);
    } else if (key == "solvers") {
        std::vector<SolverSpec> next;
        for (const auto& label : split(value, ',')) {
            if (label.empty()) continue;
            const SolverSpec* existing = config.find_solver(label);
            if (existing) {
                next.push_back(*existing);
            } else {
                try {
                    next.push_back(default_solver_spec(label));
                } catch (const std::invalid_argument&) {
                    SolverSpec custom;
                    custom.label = label;
                    custom.typed = false;
                    next.push_back(custom);
                }
            }
        }
        config.solvers = std::move(next);
    } else if (key == "init.spectral_iterations") {
        config.init_spectral_iterations = static_cast<int>(to_int(key, value));
    } else if (key == "init.poisson_iterations") {
        config.init_poisson_iterations = static_cast<int>(to_int(key, value));
    } else if (key == "output") {
        config.output_dir = value;
    } else if (key == "write_traces") {
        config.write_traces = to_bool(key, value);
    } else if (key == "write_images") {
        config.write_images = to_bool(key, value);
    } else if (key == "threads") {
        config.threads = static_cast<int>(to_int(key, value));
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    // Globals first, then solver.<label>.type, then the rest of the solver keys,
    // so a file may list solver settings before the solvers line.
    std::vector<std::pair<std::string, std::string>> global, types, rest;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        std::pair<std::string, std::string> kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
        if (kv.first.rfind("solver.", 0) != 0) {
            global.push_back(kv);
        } else if (kv.first.size() > 5 && kv.first.compare(kv.first.size() - 5, 5, ".type") == 0) {
            types.push_back(kv);
        } else {
            rest.push_back(kv);
        }
    }
    ExperimentConfig config;
    for (const auto* group : {&global, &types, &rest}) {
        for (const auto& [k, v] : *group) apply_setting(config, k, v);
    }
    config.validate();
    return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

// ----------------------------------------------------------------------------
// running

int resolve_threads(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("HPR_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) n = std::min(n, cap);
    }
    return n;
}

namespace {

struct JobKey {
    std::size_t alpha = 0, sigma = 0, seed = 0;
};

std::string run_name(const ExperimentConfig& cfg, const JobKey& k, const std::string& label) {
    return "a" + short_num(cfg.alphas[k.alpha]) + "_s" + short_num(cfg.sigmas[k.sigma]) + "_seed" +
           std::to_string(cfg.seeds[k.seed]) + "_" + label;
}

ImageGrid load_truth(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.image != "file") return make_synthetic(parse_synthetic_kind(cfg.image), cfg.n, seed);
    const auto ext = cfg.image_file.extension().string();
    ImageGrid img = (ext == ".pgm") ? read_pgm(cfg.image_file, cfg.C) : read_raw_image(cfg.image_file);
    if (img.rows() != img.cols()) throw std::invalid_argument("image_file must be square");
    return project_box(std::move(img), cfg.C);
}

std::unique_ptr<ScoreProvider> make_provider(const PriorSpec& p) {
    if (p.kind == "none") return nullptr;
    if (p.kind == "gmm") return std::make_unique<GmmScore>(GmmPrior::default_test_prior());
    if (p.kind == "zero") return std::make_unique<ZeroScore>();
    if (p.kind == "huber-tv") return std::make_unique<HuberTvScore>(p.huber_delta, p.huber_lambda);
    if (p.kind == "external") {
        if (p.command.empty()) throw std::invalid_argument("prior = external needs prior.command");
        return std::make_unique<ExternalScore>(
            std::make_shared<ScoreServerProcess>(split_command(p.command)));
    }
    throw std::invalid_argument("unknown prior '" + p.kind + "'");
}

std::unique_ptr<Denoiser> make_denoiser(const DenoiserSpec& d) {
    if (d.kind == "external") {
        if (d.command.empty()) throw std::invalid_argument("denoiser = external needs denoiser.command");
        return std::make_unique<ExternalDenoiser>(
            std::make_shared<ScoreServerProcess>(split_command(d.command)));
    }
    return std::make_unique<BuiltinDenoiser>(d.params);
}

}  // namespace

SolverRun run_solver(const SolverSpec& spec, const Problem& problem, const SolverConfig& config) {
    const auto need_provider = [&]() {
        auto p = make_provider(spec.prior);
        if (!p) throw std::invalid_argument(to_string(spec.kind) + " needs a prior (prior = none)");
        return p;
    };
    switch (spec.kind) {
        case SolverKind::wf: {
            auto p = make_provider(spec.prior);
            return wf(problem, config, p.get());
        }
        case SolverKind::wfsd: {
            auto p = need_provider();
            return wfsd(problem, config, *p);
        }
        case SolverKind::awfs: {
            auto p = need_provider();
            return awfs(problem, config, *p);
        }
        case SolverKind::dolph: {
            auto p = need_provider();
            const DdpmSchedule sched =
                make_ddpm_schedule(spec.ddpm_steps, spec.ddpm_beta_1, spec.ddpm_beta_T, spec.ddpm_stochastic);
            return dolph(problem, config, *p, sched);
        }
        case SolverKind::pnp_admm: {
            auto d = make_denoiser(spec.denoiser);
            return pnp_admm(problem, config, *d);
        }
        case SolverKind::pnp_pgm: {
            auto d = make_denoiser(spec.denoiser);
            return pnp_pgm(problem, config, *d);
        }
        case SolverKind::red: {
            auto d = make_denoiser(spec.denoiser);
            return red_sd(problem, config, *d);
        }
        case SolverKind::admm_split: {
            auto p = make_provider(spec.prior);
            return admm_intensity_split(problem, config, p.get());
        }
    }
    throw std::logic_error("run_solver: unknown solver");
}

Instance make_instance(const ExperimentConfig& cfg, double alpha, double sigma, std::uint64_t seed) {
    Instance inst;
    inst.truth = load_truth(cfg, seed);
    const std::size_t n = inst.truth.rows();
    const ImageGrid ref = random_binary_reference(n, mix_seed(seed, 0x726566), cfg.reference_fill);
    inst.op = std::make_shared<const HolographicOperator>(
        make_operator(n, nominal_gain(alpha, n, cfg.oversample), cfg.oversample, ref));
    const std::uint64_t noise_seed =
        mix_seed(mix_seed(seed, std::bit_cast<std::uint64_t>(alpha)), std::bit_cast<std::uint64_t>(sigma));
    inst.meas = simulate_measurements(*inst.op, inst.truth, cfg.b_bar, sigma, noise_seed);
    return inst;
}

ImageGrid initialize(const ExperimentConfig& cfg, const HolographicOperator& op, const MeasurementSet& meas,
                     std::uint64_t seed) {
    ImageGrid init = spectral_init(op, meas, cfg.init_spectral_iterations, cfg.C, seed).image;
    if (cfg.init_poisson_iterations > 0) {
        SolverConfig ic;
        ic.likelihood = Likelihood::poisson;
        ic.step = BacktrackingStep{};
        ic.iterations = cfg.init_poisson_iterations;
        ic.C = cfg.C;
        ic.seed = seed;
        SolverRun r = wf(Problem{&op, &meas, init, nullptr}, ic);
        if (r.image.size() == init.size()) init = std::move(r.image);
    }
    return init;
}

namespace {

struct GroupOutput {
    std::vector<MetricRow> rows;
    std::vector<SolverRun> runs;
    ImageGrid truth;
};

GroupOutput run_group(const ExperimentConfig& cfg, const JobKey& key) {
    GroupOutput out;
    const double alpha = cfg.alphas[key.alpha];
    const double sigma = cfg.sigmas[key.sigma];
    const std::uint64_t seed = cfg.seeds[key.seed];

    Instance inst = make_instance(cfg, alpha, sigma, seed);
    out.truth = inst.truth;
    const HolographicOperator& op = *inst.op;
    const MeasurementSet& meas = inst.meas;
    const ImageGrid init = initialize(cfg, op, meas, seed);

    for (const auto& spec : cfg.solvers) {
        SolverConfig sc = spec.config;
        sc.C = cfg.C;
        sc.seed = seed;
        MetricRow row;
        row.solver = spec.label;
        row.alpha = alpha;
        row.sigma = sigma;
        row.seed = seed;
        SolverRun run;
        try {
            run = run_solver(spec, Problem{&op, &meas, init, &out.truth}, sc);
        } catch (const std::exception& e) {
            run.solver = to_string(spec.kind);
            run.status = std::string("error: ") + e.what();
        }
        row.status = run.status;
        row.wall_ms = run.wall_ms;
        row.iterations = static_cast<int>(run.trace.size());
        if (run.image.size() == out.truth.size() && all_finite(run.image)) {
            row.nrmse = nrmse(run.image, out.truth);
            row.nrmse_raw = nrmse_raw(run.image, out.truth);
            SsimParams sp;
            sp.data_range = cfg.C;
            row.ssim = ssim(phase_correct(run.image, out.truth), out.truth, sp);
        } else {
            row.nrmse = row.nrmse_raw = row.ssim = std::numeric_limits<double>::quiet_NaN();
        }
        out.rows.push_back(std::move(row));
        out.runs.push_back(std::move(run));
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

std::string gnuplot_stub(const std::vector<std::string>& dat_files) {
    std::string s;
    s += "# gnuplot -p convergence.gp\n";
    s += "set logscale y\nset xlabel 'iteration'\nset ylabel 'NRMSE (%)'\nset key outside\n";
    if (dat_files.empty()) return s;
    s += "plot ";
    for (std::size_t i = 0; i < dat_files.size(); ++i) {
        if (i) s += ", \\\n     ";
        s += "'" + dat_files[i] + "' using 1:2 with lines title '" + dat_files[i].substr(0, dat_files[i].size() - 4) + "'";
    }
    s += "\n";
    return s;
}

void write_artifacts(const ExperimentConfig& cfg, const std::vector<JobKey>& keys,
                     const std::vector<GroupOutput>& groups, const std::vector<MetricRow>& rows) {
    namespace fs = std::filesystem;
    const fs::path root = cfg.output_dir;
    fs::create_directories(root);
    write_text(root / "metrics.csv", metrics_csv(rows));
    write_text(root / "timings.csv", timings_csv(rows));
    if (cfg.write_traces) {
        fs::create_directories(root / "traces");
        fs::create_directories(root / "plots");
    }
    if (cfg.write_images) fs::create_directories(root / "images");
    std::vector<std::string> dats;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const std::string base = run_name(cfg, keys[g], "truth");
        if (cfg.write_images) {
            write_raw_image(root / "images" / (base + ".hpr"), groups[g].truth);
            write_pgm(root / "images" / (base + ".pgm"), groups[g].truth, cfg.C);
        }
        for (std::size_t s = 0; s < groups[g].runs.size(); ++s) {
            const SolverRun& run = groups[g].runs[s];
            const std::string name = run_name(cfg, keys[g], cfg.solvers[s].label);
            if (cfg.write_traces) {
                write_text(root / "traces" / (name + ".jsonl"), trace_jsonl(run));
                write_text(root / "plots" / (name + ".dat"), trace_dat(run));
                dats.push_back(name + ".dat");
            }
            if (cfg.write_images && run.image.size() == groups[g].truth.size()) {
                const ImageGrid corrected = phase_correct(run.image, groups[g].truth);
                write_raw_image(root / "images" / (name + ".hpr"), corrected);
                write_pgm(root / "images" / (name + ".pgm"), corrected, cfg.C);
            }
        }
    }
    if (cfg.write_traces) write_text(root / "plots" / "convergence.gp", gnuplot_stub(dats));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::vector<JobKey> keys;
    for (std::size_t a = 0; a < config.alphas.size(); ++a) {
        for (std::size_t s = 0; s < config.sigmas.size(); ++s) {
            for (std::size_t k = 0; k < config.seeds.size(); ++k) keys.push_back({a, s, k});
        }
    }
    std::vector<GroupOutput> groups(keys.size());
    std::vector<std::string> failures(keys.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t j = next++; j < keys.size(); j = next++) {
            try {
                groups[j] = run_group(config, keys[j]);
            } catch (const std::exception& e) {
                failures[j] = e.what();
            }
        }
    };
    const int threads = std::min<int>(resolve_threads(config.threads), static_cast<int>(keys.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    ExperimentResult result;
    for (std::size_t j = 0; j < keys.size(); ++j) {
        if (!failures[j].empty()) {
            // Instance setup failed: one row per solver carrying the error.
            for (const auto& spec : config.solvers) {
                MetricRow row;
                row.solver = spec.label;
                row.alpha = config.alphas[keys[j].alpha];
                row.sigma = config.sigmas[keys[j].sigma];
                row.seed = config.seeds[keys[j].seed];
                row.nrmse = row.nrmse_raw = row.ssim = std::numeric_limits<double>::quiet_NaN();
                row.status = "error: " + failures[j];
                result.rows.push_back(row);
                result.runs.emplace_back();
                result.truths.emplace_back();
            }
            continue;
        }
        for (std::size_t s = 0; s < groups[j].rows.size(); ++s) {
            result.rows.push_back(groups[j].rows[s]);
            result.runs.push_back(groups[j].runs[s]);
            result.truths.push_back(groups[j].truth);
        }
    }
    if (!config.output_dir.empty()) write_artifacts(config, keys, groups, result.rows);
    return result;
}

// ----------------------------------------------------------------------------
// serialization

std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::string s = "hpr_csv_v1,solver,alpha,sigma,seed,nrmse,ssim,iterations,status\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const MetricRow& r = rows[i];
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        s += std::to_string(i) + "," + r.solver + "," + short_num(r.alpha) + "," + short_num(r.sigma) + "," +
             std::to_string(r.seed) + "," + num(r.nrmse) + "," + num(r.ssim) + "," +
             std::to_string(r.iterations) + "," + status + "\n";
    }
    return s;
}

std::string timings_csv(const std::vector<MetricRow>& rows) {
    std::string s = "row,solver,alpha,sigma,seed,wall_ms\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const MetricRow& r = rows[i];
        s += std::to_string(i) + "," + r.solver + "," + short_num(r.alpha) + "," + short_num(r.sigma) + "," +
             std::to_string(r.seed) + "," + fmt("%.3f", r.wall_ms) + "\n";
    }
    return s;
}

std::string trace_jsonl(const SolverRun& run) {
    using nlohmann::json;
    const auto val = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
    std::string s;
    json head = {{"solver", run.solver}, {"status", run.status}, {"notes", run.notes}};
    s += head.dump() + "\n";
    for (const auto& e : run.trace) {
        json j = {{"iter", e.iter},
                  {"level", e.level},
                  {"sigma", val(e.sigma)},
                  {"objective", val(e.objective)},
                  {"prior_energy", val(e.prior_energy)},
                  {"nrmse", val(e.nrmse)},
                  {"step", val(e.step)},
                  {"gamma", val(e.gamma)},
                  {"eta", val(e.eta)},
                  {"residual", val(e.residual)},
                  {"posterior_before", val(e.posterior_before)},
                  {"posterior_after", val(e.posterior_after)}};
        s += j.dump() + "\n";
    }
    return s;
}

std::string trace_dat(const SolverRun& run) {
    std::string s = "# iter nrmse objective step\n";
    for (const auto& e : run.trace) {
        s += std::to_string(e.iter) + " " + num(e.nrmse) + " " + num(e.objective) + " " + num(e.step) + "\n";
    }
    return s;
}

// ----------------------------------------------------------------------------
// likelihood comparison

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return {m, sd};
}

}  // namespace

LikelihoodComparison compare_likelihoods(const ExperimentConfig& config) {
    LikelihoodComparison out;
    if (config.solvers.empty()) return out;
    ExperimentConfig paired = config;
    paired.solvers.clear();
    for (const auto& spec : config.solvers) {
        for (Likelihood lk : {Likelihood::poisson, Likelihood::pg}) {
            SolverSpec s = spec;
            s.label = spec.label + "@" + to_string(lk);
            s.config.likelihood = lk;
            paired.solvers.push_back(s);
        }
    }
    out.result = run_experiment(paired);

    for (const auto& spec : config.solvers) {
        std::vector<std::string> alpha_keys;
        for (double a : config.alphas) alpha_keys.push_back(short_num(a));
        alpha_keys.push_back("all");
        for (const auto& ak : alpha_keys) {
            std::vector<double> np, ng, sp, sg;
            for (const auto& r : out.result.rows) {
                if (ak != "all" && short_num(r.alpha) != ak) continue;
                if (!std::isfinite(r.nrmse)) continue;
                if (r.solver == spec.label + "@poisson") {
                    np.push_back(r.nrmse);
                    sp.push_back(r.ssim);
                } else if (r.solver == spec.label + "@pg") {
                    ng.push_back(r.nrmse);
                    sg.push_back(r.ssim);
                }
            }
            ComparisonRow row;
            row.solver = spec.label;
            row.alpha = ak;
            row.count = static_cast<int>(std::min(np.size(), ng.size()));
            std::tie(row.nrmse_poisson_mean, row.nrmse_poisson_std) = mean_std(np);
            std::tie(row.nrmse_pg_mean, row.nrmse_pg_std) = mean_std(ng);
            std::tie(row.ssim_poisson_mean, row.ssim_poisson_std) = mean_std(sp);
            std::tie(row.ssim_pg_mean, row.ssim_pg_std) = mean_std(sg);
            out.table.push_back(row);
        }
    }
    return out;
}

std::string format_comparison(const std::vector<ComparisonRow>& table) {
    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %-7s %4s  %-17s %-17s  %-15s %-15s\n", "solver", "alpha", "n",
                  "NRMSE poisson", "NRMSE pg", "SSIM poisson", "SSIM pg");
    s += buf;
    for (const auto& r : table) {
        std::snprintf(buf, sizeof buf,
                      "%-14s %-7s %4d  %7.3f +- %-6.3f %7.3f +- %-6.3f  %.4f +- %-6.4f %.4f +- %-6.4f\n",
                      r.solver.c_str(), r.alpha.c_str(), r.count, r.nrmse_poisson_mean, r.nrmse_poisson_std,
                      r.nrmse_pg_mean, r.nrmse_pg_std, r.ssim_poisson_mean, r.ssim_poisson_std, r.ssim_pg_mean,
                      r.ssim_pg_std);
        s += buf;
    }
    return s;
}

std::string comparison_csv(const std::vector<ComparisonRow>& table) {
    std::string s =
        "solver,alpha,count,nrmse_poisson_mean,nrmse_poisson_std,nrmse_pg_mean,nrmse_pg_std,"
        "ssim_poisson_mean,ssim_poisson_std,ssim_pg_mean,ssim_pg_std\n";
    for (const auto& r : table) {
        s += r.solver + "," + r.alpha + "," + std::to_string(r.count) + "," + num(r.nrmse_poisson_mean) + "," +
             num(r.nrmse_poisson_std) + "," + num(r.nrmse_pg_mean) + "," + num(r.nrmse_pg_std) + "," +
             num(r.ssim_poisson_mean) + "," + num(r.ssim_poisson_std) + "," + num(r.ssim_pg_mean) + "," +
             num(r.ssim_pg_std) + "\n";
    }
    return s;
}

// ----------------------------------------------------------------------------
// selftest

namespace {

SelftestResult check(std::string name, bool ok, std::string detail) {
    return {std::move(name), ok, std::move(detail)};
}

bool same_trace(const SolverRun& a, const SolverRun& b) {
    if (a.trace.size() != b.trace.size()) return false;
    const auto same = [](double x, double y) {
        return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
    };
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        if (!same(a.trace[i].objective, b.trace[i].objective) || !same(a.trace[i].nrmse, b.trace[i].nrmse)) {
            return false;
        }
    }
    for (std::size_t i = 0; i < a.image.size(); ++i) {
        if (!same(a.image[i], b.image[i])) return false;
    }
    return a.image.size() == b.image.size();
}

}  // namespace

std::vector<SelftestResult> selftest() {
    std::vector<SelftestResult> out;
    const std::size_t n = 8;
    const ImageGrid truth = make_synthetic(SyntheticKind::gmm_texture, n, 3);
    const HolographicOperator op =
        make_operator(n, nominal_gain(0.02, n, 2), 2, random_binary_reference(n, 11));
    const MeasurementSet meas = simulate_measurements(op, truth, 0.1, 1.0, 5);

    {
        Rng rng(17);
        ImageGrid x = ImageGrid::square(n);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.2 + 0.6 * rng.uniform();
        double worst = 0.0;
        for (Likelihood lk : {Likelihood::gaussian, Likelihood::poisson, Likelihood::pg}) {
            const DataFidelity g(op, meas, lk);
            const ImageGrid a = g.gradient(x);
            const ImageGrid fd = finite_diff_grad([&](const ImageGrid& v) { return g.value(v); }, x, 1e-5);
            worst = std::max(worst, norm2(a - fd) / norm2(fd));
        }
        out.push_back(check("gradient-fd", worst < 1e-5, "max relative error " + num(worst)));
    }
    {
        const ImageGrid flipped = -1.0 * truth + 0.01 * ImageGrid::square(n, 1.0);
        const double a = nrmse(flipped, truth), b = nrmse(-1.0 * flipped, truth);
        out.push_back(check("phase-correction-symmetry", a == b, num(a) + " vs " + num(b)));
    }
    {
        SolverConfig c;
        c.step = FixedStep{1e-7};
        c.iterations = 10;
        const Problem p{&op, &meas, ImageGrid::square(n, 0.5), &truth};
        const SolverRun w = wf(p, c);
        BuiltinDenoiser tv({});
        SolverConfig rc = c;
        rc.beta = 0.0;
        const SolverRun r = red_sd(p, rc, tv);
        BuiltinDenoiser ident({DenoiserKind::identity});
        const SolverRun g = pnp_pgm(p, c, ident);
        out.push_back(check("degenerate-red-beta0", same_trace(w, r), "red beta=0 vs wf"));
        out.push_back(check("degenerate-pgm-identity", same_trace(w, g), "pnp-pgm identity vs wf"));
        bool inside = true;
        for (const auto* run : {&w, &r, &g}) inside = inside && within_box(run->image, 1.0);
        out.push_back(check("projection", inside, "outputs in [0, C]"));
    }
    {
        ExperimentConfig cfg;
        cfg.n = 8;
        cfg.seeds = {1, 2};
        cfg.init_spectral_iterations = 20;
        cfg.init_poisson_iterations = 5;
        cfg.solvers = {default_solver_spec("pg-wf")};
        cfg.solvers[0].config.iterations = 10;
        cfg.threads = 2;
        const std::string a = metrics_csv(run_experiment(cfg).rows);
        const std::string b = metrics_csv(run_experiment(cfg).rows);
        out.push_back(check("sweep-determinism", a == b, std::to_string(a.size()) + " bytes"));
    }
    return out;
}

}  // namespace hpr
