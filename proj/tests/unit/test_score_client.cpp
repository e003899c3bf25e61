#include <doctest.h>

#include <cmath>
#include <memory>
#include <thread>

#include "fixtures.hpp"
#include "hpr/priors.hpp"
#include "hpr/score_client.hpp"

using namespace hpr;
using testing_fixtures::uniform_image;

namespace {

ImageGrid float_rounded(ImageGrid x) {
    for (auto& v : x.values()) v = static_cast<float>(v);
    return x;
}

std::vector<std::string> server(const std::string& mode) { return {HPR_SCORE_SERVER, "--mode", mode}; }

}  // namespace

TEST_CASE("echo server round-trips float32 images bit-exactly") {
    ScoreServerProcess p(server("echo"));
    for (std::size_t n : {1, 8, 33}) {
        const ImageGrid x = float_rounded(uniform_image(n, n, -2.0, 2.0));
        CHECK(p.request(x, 0.1) == x);
    }
}

TEST_CASE("gmm server matches the in-process score") {
    auto proc = std::make_shared<ScoreServerProcess>(server("gmm"));
    ExternalScore ext(proc);
    const GmmPrior prior = GmmPrior::default_test_prior();
    for (double sigma : {0.005, 0.05, 0.1}) {
        const ImageGrid x = float_rounded(uniform_image(16, 7));
        const ImageGrid remote = ext.score_grad(x, sigma);
        const ImageGrid local = gmm_score_grad(prior, x, sigma);
        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            worst = std::max(worst, std::abs(remote[i] - local[i]) / std::max(1.0, std::abs(local[i])));
        }
        CHECK(worst < 1e-6);
    }
    CHECK_FALSE(ext.has_energy());
    CHECK(std::isinf(ext.lipschitz_bound(0.1, 1.0)));
}

TEST_CASE("external denoiser sends the strength as sigma") {
    auto proc = std::make_shared<ScoreServerProcess>(server("tv"));
    ExternalDenoiser d(proc);
    const ImageGrid x = float_rounded(uniform_image(8, 3));
    BuiltinDenoiser local({});
    const ImageGrid a = d.denoise(x, 0.7), b = local.denoise(x, 0.7);
    CHECK(max_abs(a - b) < 1e-6);
}

TEST_CASE("killed server raises a transport error") {
    ScoreServerProcess p(server("echo"));
    const ImageGrid x = uniform_image(4, 1);
    CHECK_NOTHROW(p.request(x, 0.1));
    p.kill();
    CHECK_THROWS_AS(p.request(x, 0.1), TransportError);
}

TEST_CASE("corrupt reply header raises") {
    ScoreServerProcess p({HPR_SCORE_SERVER, "--corrupt-reply"});
    CHECK_THROWS_AS(p.request(uniform_image(4, 1), 0.1), TransportError);
}

TEST_CASE("server that never answers times out") {
    // `sleep` never writes a handshake
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(ScoreServerProcess({"/bin/sleep", "30"}, std::chrono::milliseconds(300)), TransportError);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(10));
}

TEST_CASE("missing executable and wrong handshake") {
    CHECK_THROWS_AS(ScoreServerProcess({"/nonexistent/score-server"}), TransportError);
    // wrong protocol version in the greeting
    CHECK_THROWS_AS(ScoreServerProcess({"/usr/bin/printf", "SPR2\\n"}), TransportError);
}

TEST_CASE("concurrent callers are serialized") {
    auto proc = std::make_shared<ScoreServerProcess>(server("echo"));
    std::vector<std::thread> ts;
    std::vector<int> ok(4, 0);
    for (int t = 0; t < 4; ++t) {
        ts.emplace_back([&, t] {
            const ImageGrid x = float_rounded(uniform_image(8, 50 + t));
            int good = 0;
            for (int k = 0; k < 25; ++k) good += proc->request(x, 0.1) == x;
            ok[t] = good;
        });
    }
    for (auto& t : ts) t.join();
    for (int v : ok) CHECK(v == 25);
}

TEST_CASE("command splitting") {
    CHECK(split_command("  a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_command("").empty());
}
