#include "hpr/score_client.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <sstream>

#include "hpr/spr_wire.hpp"

namespace hpr {
namespace {

std::once_flag g_sigpipe_once;

void ignore_sigpipe() {
    std::call_once(g_sigpipe_once, [] {
        struct sigaction current {};
        if (sigaction(SIGPIPE, nullptr, &current) == 0 && current.sa_handler == SIG_DFL) {
            struct sigaction ign {};
            ign.sa_handler = SIG_IGN;
            sigemptyset(&ign.sa_mask);
            sigaction(SIGPIPE, &ign, nullptr);
        }
    });
}

int remaining_ms(std::chrono::steady_clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    return static_cast<int>(std::max<std::int64_t>(0, left.count()));
}

}  // namespace

std::vector<std::string> split_command(const std::string& command) {
    std::istringstream is(command);
    std::vector<std::string> out;
    for (std::string tok; is >> tok;) out.push_back(tok);
    return out;
}

ScoreServerProcess::ScoreServerProcess(std::vector<std::string> argv, std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), timeout_(timeout) {
    if (argv_.empty()) throw std::invalid_argument("ScoreServerProcess: empty command");
    ignore_sigpipe();
    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) throw TransportError("pipe2 failed");
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw TransportError("pipe2 failed");
    }
    std::vector<char*> cargv;
    for (auto& a : argv_) cargv.push_back(a.data());
    cargv.push_back(nullptr);

    pid_ = fork();
    if (pid_ < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
        throw TransportError("fork failed");
    }
    if (pid_ == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];

    try {
        write_all(wire::kHandshake, wire::kHandshakeLen);
        char hello[wire::kHandshakeLen];
        read_all(hello, sizeof hello);
        if (std::memcmp(hello, wire::kHandshake, wire::kHandshakeLen) != 0) {
            throw TransportError("score server: handshake version mismatch");
        }
    } catch (...) {
        shutdown();
        throw;
    }
}

ScoreServerProcess::~ScoreServerProcess() { shutdown(); }

void ScoreServerProcess::shutdown() {
    if (to_child_ >= 0) close(to_child_);
    to_child_ = -1;
    if (pid_ > 0) {
        // Give the server a moment to exit on EOF before forcing it.
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
        int status = 0;
        while (waitpid(pid_, &status, WNOHANG) == 0) {
            if (std::chrono::steady_clock::now() > deadline) {
                ::kill(pid_, SIGKILL);
                waitpid(pid_, &status, 0);
                break;
            }
            usleep(2000);
        }
        pid_ = -1;
    }
    if (from_child_ >= 0) close(from_child_);
    from_child_ = -1;
}

void ScoreServerProcess::kill() {
    if (pid_ > 0) ::kill(pid_, SIGKILL);
}

void ScoreServerProcess::write_all(const void* data, std::size_t len) {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    const auto* p = static_cast<const unsigned char*>(data);
    while (len > 0) {
        pollfd pfd{to_child_, POLLOUT, 0};
        const int rc = poll(&pfd, 1, remaining_ms(deadline));
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) throw TransportError("score server: write timed out");
        if (rc < 0 || (pfd.revents & (POLLERR | POLLHUP))) throw TransportError("score server: pipe closed");
        const ssize_t w = ::write(to_child_, p, len);
        if (w < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw TransportError(std::string("score server: write failed: ") + std::strerror(errno));
        }
        p += w;
        len -= static_cast<std::size_t>(w);
    }
}

void ScoreServerProcess::read_all(void* data, std::size_t len) {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    auto* p = static_cast<unsigned char*>(data);
    while (len > 0) {
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = poll(&pfd, 1, remaining_ms(deadline));
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) throw TransportError("score server: reply timed out");
        if (rc < 0) throw TransportError("score server: poll failed");
        const ssize_t r = ::read(from_child_, p, len);
        if (r < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw TransportError(std::string("score server: read failed: ") + std::strerror(errno));
        }
        if (r == 0) throw TransportError("score server: unexpected end of stream");
        p += r;
        len -= static_cast<std::size_t>(r);
    }
}

ImageGrid ScoreServerProcess::request(const ImageGrid& x, double sigma) {
    if (x.rows() != x.cols() || x.empty()) throw std::invalid_argument("score server: image must be square");
    std::lock_guard lock(mutex_);
    if (pid_ <= 0) throw TransportError("score server: process not running");
    const auto n = static_cast<std::uint32_t>(x.rows());
    std::vector<unsigned char> frame;
    frame.reserve(16 + 4 * x.size());
    wire::put_u32(frame, kSprRequestMagic);
    wire::put_u32(frame, n);
    wire::put_f64(frame, sigma);
    for (double v : x.values()) wire::put_f32(frame, static_cast<float>(v));
    write_all(frame.data(), frame.size());

    unsigned char head[8];
    read_all(head, sizeof head);
    if (wire::get_u32(head) != kSprReplyMagic) throw TransportError("score server: bad reply magic");
    if (wire::get_u32(head + 4) != n) throw TransportError("score server: reply shape mismatch");
    std::vector<unsigned char> body(4 * x.size());
    read_all(body.data(), body.size());
    ImageGrid out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<double>(wire::get_f32(body.data() + 4 * i));
    }
    return out;
}

ExternalScore::ExternalScore(std::shared_ptr<ScoreServerProcess> process) : process_(std::move(process)) {
    if (!process_) throw std::invalid_argument("ExternalScore: null process");
}

ImageGrid ExternalScore::score_grad(const ImageGrid& x, double sigma) {
    ImageGrid g = process_->request(x, sigma);
    if (!all_finite(g)) throw TransportError("score server: non-finite reply");
    return g;
}

ExternalDenoiser::ExternalDenoiser(std::shared_ptr<ScoreServerProcess> process)
    : process_(std::move(process)) {
    if (!process_) throw std::invalid_argument("ExternalDenoiser: null process");
}

ImageGrid ExternalDenoiser::denoise(const ImageGrid& x, double strength) {
    ImageGrid d = process_->request(x, strength);
    if (!all_finite(d)) throw TransportError("score server: non-finite reply");
    return d;
}

}  // namespace hpr
