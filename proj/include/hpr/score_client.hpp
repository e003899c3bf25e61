#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpr/priors.hpp"

namespace hpr {

inline constexpr std::uint32_t kSprRequestMagic = 0x53505251;
inline constexpr std::uint32_t kSprReplyMagic = 0x53505250;

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Child process speaking SPR1 on its stdin/stdout.
///
/// Handshake "SPR1\n" in both directions, then little-endian frames:
/// request  = u32 0x53505251, u32 n, f64 sigma, n*n float32
/// reply    = u32 0x53505250, u32 n, n*n float32
/// One in-flight request per process; calls are serialized.
class ScoreServerProcess {
public:
    explicit ScoreServerProcess(std::vector<std::string> argv,
                                std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ~ScoreServerProcess();
    ScoreServerProcess(const ScoreServerProcess&) = delete;
    ScoreServerProcess& operator=(const ScoreServerProcess&) = delete;

    ImageGrid request(const ImageGrid& x, double sigma);
    int pid() const noexcept { return pid_; }
    /// Sends SIGKILL to the child.
    void kill();

private:
    void write_all(const void* data, std::size_t len);
    void read_all(void* data, std::size_t len);
    void shutdown();

    std::vector<std::string> argv_;
    std::chrono::milliseconds timeout_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::mutex mutex_;
};

/// Splits a command line on whitespace (no quoting).
std::vector<std::string> split_command(const std::string& command);

class ExternalScore final : public ScoreProvider {
public:
    explicit ExternalScore(std::shared_ptr<ScoreServerProcess> process);
    ImageGrid score_grad(const ImageGrid& x, double sigma) override;
    std::string name() const override { return "external"; }

private:
    std::shared_ptr<ScoreServerProcess> process_;
};

/// Denoiser served over SPR1; the strength is sent as the sigma field.
class ExternalDenoiser final : public Denoiser {
public:
    explicit ExternalDenoiser(std::shared_ptr<ScoreServerProcess> process);
    ImageGrid denoise(const ImageGrid& x, double strength) override;
    std::string name() const override { return "external"; }

private:
    std::shared_ptr<ScoreServerProcess> process_;
};

}  // namespace hpr
