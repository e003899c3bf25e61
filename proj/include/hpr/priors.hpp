#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hpr/image.hpp"

namespace hpr {

/// Regularizer gradient at a noise level. Implementations return
/// grad h_sigma = -grad log p_sigma so that solvers always descend g + h.
class ScoreProvider {
public:
    virtual ~ScoreProvider() = default;

    virtual ImageGrid score_grad(const ImageGrid& x, double sigma) = 0;
    virtual bool has_energy() const { return false; }
    /// h_sigma(x); only meaningful when has_energy().
    virtual double energy(const ImageGrid& x, double sigma);
    /// Lipschitz bound of score_grad on [0, C]^N at level sigma; +inf if unknown.
    virtual double lipschitz_bound(double sigma, double C) const;
    virtual std::string name() const = 0;
};

class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual ImageGrid denoise(const ImageGrid& x, double strength) = 0;
    virtual std::string name() const = 0;
};

struct GmmComponent {
    double weight = 1.0;
    double mean = 0.0;
    double variance = 1.0;
};

/// Pixels i.i.d. under a scalar Gaussian mixture.
struct GmmPrior {
    std::vector<GmmComponent> components;

    void validate() const;
    /// Two components at 0.2 and 0.8, tau = 0.1, equal weights.
    static GmmPrior default_test_prior();
};

/// Per-pixel -d/dt log sum_m w_m N(t; mu_m, tau_m^2 + sigma^2).
double gmm_pixel_score(const GmmPrior& prior, double t, double sigma);
double gmm_pixel_energy(const GmmPrior& prior, double t, double sigma);

ImageGrid gmm_score_grad(const GmmPrior& prior, const ImageGrid& x, double sigma);
double gmm_energy(const GmmPrior& prior, const ImageGrid& x, double sigma);

/// sup over t in [0, C] of |d^2/dt^2 h_sigma(t)|, scanned on a dense grid
/// using the closed-form second derivative.
double gmm_curvature_bound(const GmmPrior& prior, double sigma, double C);

/// Image with pixels drawn from the mixture, clamped to [0, C].
ImageGrid gmm_sample_image(const GmmPrior& prior, std::size_t n, std::uint64_t seed, double C = 1.0);

/// lambda * sum over 4-neighbour edges of Huber_delta(x_p - x_q); Neumann boundary.
double huber_tv_energy(const ImageGrid& x, double huber_delta, double lambda);
ImageGrid huber_tv_grad(const ImageGrid& x, double huber_delta, double lambda);

class ZeroScore final : public ScoreProvider {
public:
    ImageGrid score_grad(const ImageGrid& x, double sigma) override;
    bool has_energy() const override { return true; }
    double energy(const ImageGrid& x, double sigma) override;
    double lipschitz_bound(double, double) const override { return 0.0; }
    std::string name() const override { return "zero"; }
};

class GmmScore final : public ScoreProvider {
public:
    explicit GmmScore(GmmPrior prior);
    const GmmPrior& prior() const noexcept { return prior_; }

    ImageGrid score_grad(const ImageGrid& x, double sigma) override;
    bool has_energy() const override { return true; }
    double energy(const ImageGrid& x, double sigma) override;
    double lipschitz_bound(double sigma, double C) const override;
    std::string name() const override { return "gmm"; }

private:
    GmmPrior prior_;
};

/// Huber-TV as a provider; the noise level is ignored.
class HuberTvScore final : public ScoreProvider {
public:
    HuberTvScore(double huber_delta, double lambda);

    ImageGrid score_grad(const ImageGrid& x, double sigma) override;
    bool has_energy() const override { return true; }
    double energy(const ImageGrid& x, double sigma) override;
    double lipschitz_bound(double sigma, double C) const override;
    std::string name() const override { return "huber-tv"; }

private:
    double delta_;
    double lambda_;
};

enum class DenoiserKind { identity, gaussian, median, tv };

DenoiserKind parse_denoiser_kind(const std::string& name);
std::string to_string(DenoiserKind kind);

ImageGrid gaussian_blur(const ImageGrid& x, double width);
ImageGrid median3x3(const ImageGrid& x);
/// Approximate prox of huber_tv_energy: projected ascent on the dual, fixed iterations.
ImageGrid huber_tv_prox(const ImageGrid& x, double huber_delta, double lambda, int iterations = 200);

/// Output = x + strength * (D(x) - x) with D the selected filter.
class BuiltinDenoiser final : public Denoiser {
public:
    struct Params {
        DenoiserKind kind = DenoiserKind::tv;
        double blur_width = 0.8;
        double tv_lambda = 0.02;
        double tv_delta = 0.01;
        int tv_iterations = 200;
    };

    explicit BuiltinDenoiser(Params params);
    const Params& params() const noexcept { return params_; }

    ImageGrid denoise(const ImageGrid& x, double strength) override;
    std::string name() const override { return to_string(params_.kind); }

private:
    Params params_;
};

/// Strictly decreasing noise levels, each used for `passes_per_level` iterations.
struct NoiseSchedule {
    std::vector<double> levels;
    int passes_per_level = 1;

    void validate() const;
    std::size_t total_iterations() const { return levels.size() * static_cast<std::size_t>(passes_per_level); }
};

/// sigma_k = hi * (lo / hi)^{(k-1)/(K-1)}, k = 1..K.
NoiseSchedule make_geometric_schedule(double sigma_hi, double sigma_lo, int K, int passes_per_level = 1);

}  // namespace hpr
