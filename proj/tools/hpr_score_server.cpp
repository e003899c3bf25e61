// SPR1 score server backed by the analytic providers, for loopback tests and
// as a template for external learned priors.
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hpr/priors.hpp"
#include "hpr/score_client.hpp"
#include "hpr/spr_wire.hpp"

namespace {

constexpr std::uint32_t kMaxN = 4096;
constexpr std::uint32_t kErrorMagic = 0x53505245;

bool read_exact(void* dst, std::size_t len) {
    return std::fread(dst, 1, len, stdin) == len;
}

void write_exact(const std::vector<unsigned char>& buf) {
    std::fwrite(buf.data(), 1, buf.size(), stdout);
    std::fflush(stdout);
}

int fail(const std::string& msg) {
    std::vector<unsigned char> buf;
    hpr::wire::put_u32(buf, kErrorMagic);
    hpr::wire::put_u32(buf, static_cast<std::uint32_t>(msg.size()));
    buf.insert(buf.end(), msg.begin(), msg.end());
    write_exact(buf);
    std::fprintf(stderr, "hpr_score_server: %s\n", msg.c_str());
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SPR1 score server (analytic priors)"};
    std::string mode = "gmm";
    bool corrupt = false;
    app.add_option("--mode", mode, "gmm | zero | echo | tv")
        ->check(CLI::IsMember({"gmm", "zero", "echo", "tv"}));
    app.add_flag("--corrupt-reply", corrupt, "send a wrong reply magic (client error-path tests)");
    CLI11_PARSE(app, argc, argv);

    hpr::GmmScore gmm(hpr::GmmPrior::default_test_prior());
    hpr::BuiltinDenoiser tv({});

    write_exact({hpr::wire::kHandshake, hpr::wire::kHandshake + hpr::wire::kHandshakeLen});
    char hello[hpr::wire::kHandshakeLen];
    if (!read_exact(hello, sizeof hello)) return 0;
    if (std::memcmp(hello, hpr::wire::kHandshake, sizeof hello) != 0) return fail("bad handshake");

    unsigned char head[16];
    for (;;) {
        const std::size_t got = std::fread(head, 1, sizeof head, stdin);
        if (got == 0) return 0;  // clean EOF
        if (got != sizeof head) return fail("truncated request header");
        if (hpr::wire::get_u32(head) != hpr::kSprRequestMagic) return fail("bad request magic");
        const std::uint32_t n = hpr::wire::get_u32(head + 4);
        const double sigma = hpr::wire::get_f64(head + 8);
        if (n == 0 || n > kMaxN) return fail("image size out of range");
        std::vector<unsigned char> body(static_cast<std::size_t>(n) * n * 4);
        if (!read_exact(body.data(), body.size())) return fail("truncated request body");

        hpr::ImageGrid x = hpr::ImageGrid::square(n);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = hpr::wire::get_f32(body.data() + 4 * i);

        hpr::ImageGrid out;
        if (mode == "gmm") out = gmm.score_grad(x, sigma);
        else if (mode == "zero") out = hpr::ImageGrid::square(n);
        else if (mode == "echo") out = x;
        else out = tv.denoise(x, sigma);

        std::vector<unsigned char> reply;
        reply.reserve(8 + body.size());
        hpr::wire::put_u32(reply, corrupt ? 0xdeadbeef : hpr::kSprReplyMagic);
        hpr::wire::put_u32(reply, n);
        for (std::size_t i = 0; i < out.size(); ++i) hpr::wire::put_f32(reply, static_cast<float>(out[i]));
        write_exact(reply);
    }
}
