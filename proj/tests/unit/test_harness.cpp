#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hpr/harness.hpp"
#include "hpr/image_io.hpp"
#include "hpr/metrics.hpp"

#include <json.hpp>

using namespace hpr;
namespace fs = std::filesystem;

namespace {

// n = 8 grid with short runs; labels appended by the caller
std::string small_config(const std::string& extra) {
    return "n = 8\n"
           "init.spectral_iterations = 30\n"
           "init.poisson_iterations = 10\n"
           "threads = 1\n" +
           extra;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "hpr_unit_harness" / name;
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("list parsing") {
    const auto a = parse_real_list("0.02:0.005:0.035");
    REQUIRE(a.size() == 4);
    CHECK(a.front() == 0.02);
    CHECK(a.back() == doctest::Approx(0.035).epsilon(1e-12));
    CHECK(parse_real_list("0.5:0.25:1.5").size() == 5);
    CHECK(parse_real_list("1, 2,3") == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(parse_real_list("0.25") == std::vector<double>{0.25});
    CHECK(parse_seed_list("1:10").size() == 10);
    CHECK(parse_seed_list("3,5") == std::vector<std::uint64_t>{3, 5});
    CHECK_THROWS(parse_real_list("1:0:2"));
    CHECK_THROWS(parse_real_list("abc"));
    CHECK_THROWS(parse_seed_list("5:1"));
}

TEST_CASE("alpha grid of seven points") {
    // 0.02:0.0025:0.035, the finest grid over the stated range
    const auto a = parse_real_list("0.02:0.0025:0.035");
    REQUIRE(a.size() == 7);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(0.02 + 0.0025 * i).epsilon(1e-12));
}

TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_experiment_config(
        "# comment\n"
        "n = 12   # trailing\n"
        "alpha = 0.02, 0.03\n"
        "sigma = 0.5:0.5:1.5\n"
        "seeds = 1:3\n"
        "solver.mine.iterations = 7\n"
        "solvers = pg-wf, awfs, mine\n"
        "solver.mine.type = red\n"
        "solver.awfs.schedule = 0.1, 0.05, 0.01\n"
        "solver.awfs.schedule.passes = 4\n"
        "solver.pg-wf.step = fixed\n"
        "solver.pg-wf.step.mu = 1e-5\n");
    CHECK(c.n == 12);
    CHECK(c.alphas.size() == 2);
    CHECK(c.sigmas.size() == 3);
    CHECK(c.seeds.size() == 3);
    REQUIRE(c.solvers.size() == 3);
    CHECK(c.solvers[0].kind == SolverKind::wf);
    CHECK(c.solvers[0].config.likelihood == Likelihood::pg);
    CHECK(std::get<FixedStep>(c.solvers[0].config.step).mu == 1e-5);
    CHECK(c.solvers[1].config.schedule.levels == std::vector<double>{0.1, 0.05, 0.01});
    CHECK(c.solvers[1].config.schedule.passes_per_level == 4);
    CHECK(c.solvers[2].kind == SolverKind::red);
    CHECK(c.solvers[2].config.iterations == 7);

    CHECK_THROWS(parse_experiment_config("bogus = 1\n"));
    CHECK_THROWS(parse_experiment_config("n = 8\nno equals sign\n"));
    CHECK_THROWS(parse_experiment_config("solvers = wf\nsolver.wf.unknown = 1\n"));
    CHECK_THROWS(parse_experiment_config("solver.ghost.iterations = 3\n"));
    CHECK_THROWS(parse_experiment_config("solvers = custom\n"));  // needs a type
    CHECK_THROWS(parse_experiment_config("alpha = \n"));
    CHECK_THROWS(parse_experiment_config("solvers = wf\nsolver.wf.type = nope\n"));
}

TEST_CASE("default solver specs") {
    CHECK(default_solver_spec("poisson-wf").config.likelihood == Likelihood::poisson);
    CHECK(default_solver_spec("gaussian-wf").config.likelihood == Likelihood::gaussian);
    CHECK(default_solver_spec("wf").prior.kind == "none");
    CHECK(default_solver_spec("red").config.beta == 0.5);
    for (auto k : {SolverKind::wf, SolverKind::wfsd, SolverKind::awfs, SolverKind::dolph, SolverKind::pnp_admm,
                   SolverKind::pnp_pgm, SolverKind::red, SolverKind::admm_split}) {
        CHECK(parse_solver_kind(to_string(k)) == k);
        CHECK(default_solver_spec(to_string(k)).kind == k);
    }
    CHECK_THROWS(default_solver_spec("not-a-solver"));
}

TEST_CASE("one cell gives one row and reruns are byte-identical") {
    const ExperimentConfig c = parse_experiment_config(small_config("solvers = pg-wf\nsolver.pg-wf.iterations = 10\n"));
    const ExperimentResult a = run_experiment(c);
    REQUIRE(a.rows.size() == 1);
    const MetricRow& r = a.rows[0];
    CHECK(r.solver == "pg-wf");
    CHECK(r.status == "ok");
    CHECK(r.iterations == 10);
    CHECK(r.nrmse >= 0.0);
    CHECK(r.nrmse <= r.nrmse_raw);
    CHECK(r.ssim >= -1.0);
    CHECK(r.ssim <= 1.0);
    CHECK(r.nrmse == doctest::Approx(nrmse(a.runs[0].image, a.truths[0])));
    CHECK(metrics_csv(run_experiment(c).rows) == metrics_csv(a.rows));
}

TEST_CASE("thread count does not change the results") {
    ExperimentConfig c = parse_experiment_config(
        small_config("seeds = 1:3\nalpha = 0.02, 0.03\nsolvers = pg-wf, poisson-wf\n"
                     "solver.pg-wf.iterations = 5\nsolver.poisson-wf.iterations = 5\n"));
    const std::string one = metrics_csv(run_experiment(c).rows);
    c.threads = 3;
    CHECK(metrics_csv(run_experiment(c).rows) == one);
    // rows in job-key order
    const auto rows = run_experiment(c).rows;
    REQUIRE(rows.size() == 12);
    CHECK(rows[0].alpha == 0.02);
    CHECK(rows[0].seed == 1);
    CHECK(rows[0].solver == "pg-wf");
    CHECK(rows[1].solver == "poisson-wf");
    CHECK(rows.back().alpha == 0.03);
    CHECK(rows.back().seed == 3);
}

TEST_CASE("solver failures become rows and the sweep continues") {
    const ExperimentConfig c = parse_experiment_config(
        small_config("solvers = pnp-pgm, pg-wf\nsolver.pnp-pgm.beta = 2\nsolver.pg-wf.iterations = 3\n"));
    const ExperimentResult r = run_experiment(c);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].status.rfind("error", 0) == 0);
    CHECK(r.rows[1].status == "ok");
    const std::string csv = metrics_csv(r.rows);
    CHECK(csv.find("error") != std::string::npos);
}

TEST_CASE("csv schema") {
    MetricRow r;
    r.solver = "wf";
    r.alpha = 0.02;
    r.sigma = 1;
    r.seed = 4;
    r.nrmse = 12.5;
    r.ssim = 0.75;
    r.iterations = 9;
    r.status = "error: a, b";
    const std::string csv = metrics_csv({r});
    CHECK(csv.rfind("hpr_csv_v1,solver,alpha,sigma,seed,nrmse,ssim,iterations,status\n", 0) == 0);
    CHECK(csv.find("\n0,wf,0.02,1,4,12.5,0.75,9,error: a; b\n") != std::string::npos);
    CHECK(timings_csv({r}).find("wall_ms") != std::string::npos);
}

TEST_CASE("artifacts") {
    const fs::path dir = fresh_dir("artifacts");
    const ExperimentConfig c = parse_experiment_config(
        small_config("solvers = pg-wf, awfs\nsolver.pg-wf.iterations = 4\nsolver.awfs.schedule.levels = 2\n"
                     "solver.awfs.schedule.passes = 2\noutput = " + dir.string() + "\n"));
    const ExperimentResult r = run_experiment(c);
    REQUIRE(r.rows.size() == 2);
    CHECK(slurp(dir / "metrics.csv") == metrics_csv(r.rows));
    CHECK(fs::exists(dir / "timings.csv"));
    CHECK(fs::exists(dir / "plots" / "convergence.gp"));
    for (const std::string name : {"a0.02_s1_seed1_pg-wf", "a0.02_s1_seed1_awfs"}) {
        INFO(name);
        CHECK(fs::exists(dir / "plots" / (name + ".dat")));
        CHECK(fs::exists(dir / "images" / (name + ".pgm")));
        const ImageGrid img = read_raw_image(dir / "images" / (name + ".hpr"));
        CHECK(img.rows() == 8);
        std::ifstream f(dir / "traces" / (name + ".jsonl"));
        std::string line;
        int entries = 0;
        bool header = true;
        while (std::getline(f, line)) {
            const auto j = nlohmann::json::parse(line);
            if (header) {
                CHECK(j.contains("solver"));
                header = false;
            } else {
                CHECK(j.contains("iter"));
                ++entries;
            }
        }
        CHECK(entries == 4);
    }
    CHECK(fs::exists(dir / "images" / "a0.02_s1_seed1_truth.hpr"));
}

TEST_CASE("likelihood comparison table") {
    SUBCASE("no solvers: empty table") {
        const ExperimentConfig c = parse_experiment_config(small_config(""));
        CHECK(compare_likelihoods(c).table.empty());
    }
    SUBCASE("each side matches a plain run with that likelihood") {
        const std::string base = small_config("seeds = 1:2\nalpha = 0.02, 0.03\nsolvers = wf\nsolver.wf.iterations = 5\n");
        const LikelihoodComparison cmp = compare_likelihoods(parse_experiment_config(base));
        REQUIRE(cmp.table.size() == 3);  // two alphas plus "all"
        CHECK(cmp.table.back().alpha == "all");
        CHECK(cmp.table.back().count == 4);
        CHECK(cmp.result.rows.size() == 8);
        for (const char* lk : {"poisson", "pg"}) {
            const ExperimentResult plain = run_experiment(
                parse_experiment_config(base + "solver.wf.likelihood = " + std::string(lk) + "\n"));
            double mean = 0.0;
            for (const auto& r : plain.rows) mean += r.nrmse / 4.0;
            const auto& all = cmp.table.back();
            CHECK(mean == doctest::Approx(std::string(lk) == "pg" ? all.nrmse_pg_mean : all.nrmse_poisson_mean)
                              .epsilon(1e-12));
        }
        CHECK(format_comparison(cmp.table).find("wf") != std::string::npos);
        CHECK(comparison_csv(cmp.table).rfind("solver,alpha,count,", 0) == 0);
    }
}

TEST_CASE("more photons make unregularized PG-WF easier") {
    const ExperimentConfig c = parse_experiment_config(
        "n = 16\nalpha = 0.02, 0.035\nseeds = 1:10\nsolvers = pg-wf\nthreads = 0\n");
    const ExperimentResult r = run_experiment(c);
    REQUIRE(r.rows.size() == 20);
    double lo = 0.0, hi = 0.0;
    for (const auto& row : r.rows) {
        CHECK(row.status == "ok");
        (row.alpha == 0.02 ? lo : hi) += row.nrmse / 10.0;
    }
    INFO("mean NRMSE at 0.02: " << lo << ", at 0.035: " << hi);
    CHECK(hi <= lo);
}

TEST_CASE("selftest suite passes") {
    for (const auto& r : selftest()) {
        INFO(r.name << ": " << r.detail);
        CHECK(r.passed);
    }
}

TEST_CASE("cli round trip: simulate then reconstruct") {
    const fs::path dir = fresh_dir("cli");
    fs::create_directories(dir);
    const std::string cli = HPR_CLI_PATH;
    const std::string sim = cli + " simulate --n 8 --seeds 2 -o " + (dir / "sim").string() + " > /dev/null";
    REQUIRE(std::system(sim.c_str()) == 0);
    const fs::path base = dir / "sim" / "a0.02_s1_seed2";
    const std::string rec = cli + " reconstruct -m " + base.string() + ".hpm -r " + base.string() +
                            "_reference.hpr -t " + base.string() + "_truth.hpr -s pg-wf --set solver.pg-wf.iterations=5 -o " +
                            (dir / "rec").string() + " > " + (dir / "rec.txt").string();
    REQUIRE(std::system(rec.c_str()) == 0);
    CHECK(fs::exists(dir / "rec" / "pg-wf.hpr"));
    CHECK(slurp(dir / "rec.txt").find("NRMSE") != std::string::npos);
    // bad flag exits non-zero
    CHECK(std::system((cli + " sweep --set nonsense=1 > /dev/null 2>&1").c_str()) != 0);
}
