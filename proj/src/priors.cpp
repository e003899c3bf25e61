#include "hpr/priors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "hpr/likelihood.hpp"
#include "hpr/random.hpp"

namespace hpr {
namespace {

struct MixtureTerms {
    double log_p = 0.0;
    double mean_a = 0.0;     // sum r_m (t - mu_m) / v_m
    double mean_a2 = 0.0;    // sum r_m ((t - mu_m) / v_m)^2
    double mean_inv_v = 0.0; // sum r_m / v_m
};

MixtureTerms mixture_terms(const GmmPrior& prior, double t, double sigma) {
    const double s2 = sigma * sigma;
    const std::size_t m = prior.components.size();
    double log_w[16];
    std::vector<double> heap;
    double* lw = log_w;
    if (m > 16) {
        heap.resize(m);
        lw = heap.data();
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
        const auto& c = prior.components[k];
        const double v = c.variance + s2;
        const double d = t - c.mean;
        lw[k] = std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
        top = std::max(top, lw[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) total += std::exp(lw[k] - top);
    MixtureTerms out;
    out.log_p = top + std::log(total);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& c = prior.components[k];
        const double v = c.variance + s2;
        const double r = std::exp(lw[k] - out.log_p);
        const double a = (t - c.mean) / v;
        out.mean_a += r * a;
        out.mean_a2 += r * a * a;
        out.mean_inv_v += r / v;
    }
    return out;
}

void require_sigma_nonneg(double sigma, const char* what) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument(std::string(what) + ": sigma must be >= 0");
    }
}

double huber(double t, double delta) {
    const double a = std::abs(t);
    return a <= delta ? t * t / (2.0 * delta) : a - 0.5 * delta;
}

double huber_slope(double t, double delta) {
    return std::abs(t) <= delta ? t / delta : (t > 0.0 ? 1.0 : -1.0);
}

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    const auto len = static_cast<std::ptrdiff_t>(n);
    if (len == 1) return 0;
    while (i < 0 || i >= len) {
        if (i < 0) i = -i - 1;
        if (i >= len) i = 2 * len - i - 1;
    }
    return static_cast<std::size_t>(i);
}

}  // namespace

double ScoreProvider::energy(const ImageGrid&, double) {
    throw std::logic_error(name() + ": provider has no energy");
}

double ScoreProvider::lipschitz_bound(double, double) const {
    return std::numeric_limits<double>::infinity();
}

void GmmPrior::validate() const {
    if (components.empty()) throw std::invalid_argument("GmmPrior: no components");
    double total = 0.0;
    for (const auto& c : components) {
        if (!(c.weight > 0.0)) throw std::invalid_argument("GmmPrior: weights must be positive");
        if (!(c.variance > 0.0)) throw std::invalid_argument("GmmPrior: variances must be positive");
        if (!std::isfinite(c.mean)) throw std::invalid_argument("GmmPrior: mean must be finite");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("GmmPrior: weights must sum to 1");
}

GmmPrior GmmPrior::default_test_prior() {
    return GmmPrior{{{0.5, 0.2, 0.01}, {0.5, 0.8, 0.01}}};
}

double gmm_pixel_score(const GmmPrior& prior, double t, double sigma) {
    return mixture_terms(prior, t, sigma).mean_a;
}

double gmm_pixel_energy(const GmmPrior& prior, double t, double sigma) {
    return -mixture_terms(prior, t, sigma).log_p;
}

ImageGrid gmm_score_grad(const GmmPrior& prior, const ImageGrid& x, double sigma) {
    require_sigma_nonneg(sigma, "gmm_score_grad");
    ImageGrid g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = gmm_pixel_score(prior, x[i], sigma);
    return g;
}

double gmm_energy(const GmmPrior& prior, const ImageGrid& x, double sigma) {
    require_sigma_nonneg(sigma, "gmm_energy");
    std::vector<double> terms(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) terms[i] = gmm_pixel_energy(prior, x[i], sigma);
    return pairwise_sum(terms);
}

double gmm_curvature_bound(const GmmPrior& prior, double sigma, double C) {
    constexpr int kGrid = 4001;
    double worst = 0.0;
    for (int k = 0; k < kGrid; ++k) {
        const double t = C * static_cast<double>(k) / (kGrid - 1);
        const MixtureTerms m = mixture_terms(prior, t, sigma);
        const double curv = m.mean_inv_v - m.mean_a2 + m.mean_a * m.mean_a;
        worst = std::max(worst, std::abs(curv));
    }
    // Grid spacing slack: the curvature varies on the scale of the smallest std.
    double v_min = std::numeric_limits<double>::infinity();
    for (const auto& c : prior.components) v_min = std::min(v_min, c.variance + sigma * sigma);
    const double h = C / (kGrid - 1);
    return worst * (1.0 + 4.0 * h / std::sqrt(v_min));
}

ImageGrid gmm_sample_image(const GmmPrior& prior, std::size_t n, std::uint64_t seed, double C) {
    prior.validate();
    Rng rng(mix_seed(seed, 0x676d6d));
    ImageGrid img = ImageGrid::square(n);
    for (std::size_t i = 0; i < img.size(); ++i) {
        double u = rng.uniform();
        std::size_t k = 0;
        while (k + 1 < prior.components.size() && u >= prior.components[k].weight) {
            u -= prior.components[k].weight;
            ++k;
        }
        const auto& c = prior.components[k];
        img[i] = std::clamp(c.mean + std::sqrt(c.variance) * rng.normal(), 0.0, C);
    }
    return img;
}

double huber_tv_energy(const ImageGrid& x, double huber_delta, double lambda) {
    if (!(huber_delta > 0.0)) throw std::invalid_argument("huber_tv: delta must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("huber_tv: lambda must be >= 0");
    std::vector<double> terms;
    terms.reserve(2 * x.size());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            if (r + 1 < x.rows()) terms.push_back(huber(x(r + 1, c) - x(r, c), huber_delta));
            if (c + 1 < x.cols()) terms.push_back(huber(x(r, c + 1) - x(r, c), huber_delta));
        }
    }
    return lambda * pairwise_sum(terms);
}

ImageGrid huber_tv_grad(const ImageGrid& x, double huber_delta, double lambda) {
    if (!(huber_delta > 0.0)) throw std::invalid_argument("huber_tv: delta must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("huber_tv: lambda must be >= 0");
    ImageGrid g(x.rows(), x.cols());
    if (lambda == 0.0) return g;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            if (r + 1 < x.rows()) {
                const double s = huber_slope(x(r + 1, c) - x(r, c), huber_delta);
                g(r + 1, c) += s;
                g(r, c) -= s;
            }
            if (c + 1 < x.cols()) {
                const double s = huber_slope(x(r, c + 1) - x(r, c), huber_delta);
                g(r, c + 1) += s;
                g(r, c) -= s;
            }
        }
    }
    g *= lambda;
    return g;
}

ImageGrid ZeroScore::score_grad(const ImageGrid& x, double) {
    return ImageGrid(x.rows(), x.cols());
}

double ZeroScore::energy(const ImageGrid&, double) { return 0.0; }

GmmScore::GmmScore(GmmPrior prior) : prior_(std::move(prior)) { prior_.validate(); }

ImageGrid GmmScore::score_grad(const ImageGrid& x, double sigma) {
    return gmm_score_grad(prior_, x, sigma);
}

double GmmScore::energy(const ImageGrid& x, double sigma) { return gmm_energy(prior_, x, sigma); }

double GmmScore::lipschitz_bound(double sigma, double C) const {
    return gmm_curvature_bound(prior_, sigma, C);
}

HuberTvScore::HuberTvScore(double huber_delta, double lambda) : delta_(huber_delta), lambda_(lambda) {
    if (!(huber_delta > 0.0)) throw std::invalid_argument("HuberTvScore: delta must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("HuberTvScore: lambda must be >= 0");
}

ImageGrid HuberTvScore::score_grad(const ImageGrid& x, double) {
    return huber_tv_grad(x, delta_, lambda_);
}

double HuberTvScore::energy(const ImageGrid& x, double) { return huber_tv_energy(x, delta_, lambda_); }

double HuberTvScore::lipschitz_bound(double, double) const {
    // |D|^2 <= 8 for the 4-neighbour difference operator.
    return 8.0 * lambda_ / delta_;
}

DenoiserKind parse_denoiser_kind(const std::string& name) {
    if (name == "identity") return DenoiserKind::identity;
    if (name == "gaussian") return DenoiserKind::gaussian;
    if (name == "median") return DenoiserKind::median;
    if (name == "tv") return DenoiserKind::tv;
    throw std::invalid_argument("unknown denoiser '" + name + "' (identity|gaussian|median|tv)");
}

std::string to_string(DenoiserKind kind) {
    switch (kind) {
        case DenoiserKind::identity: return "identity";
        case DenoiserKind::gaussian: return "gaussian";
        case DenoiserKind::median: return "median";
        case DenoiserKind::tv: return "tv";
    }
    return "?";
}

ImageGrid gaussian_blur(const ImageGrid& x, double width) {
    if (!(width >= 0.0)) throw std::invalid_argument("gaussian_blur: width must be >= 0");
    if (width == 0.0) return x;
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * width));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * static_cast<double>(k * k) / (width * width));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        total += w;
    }
    for (double& w : kernel) w /= total;

    ImageGrid tmp(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       x(r, reflect(static_cast<std::ptrdiff_t>(c) + k, x.cols()));
            }
            tmp(r, c) = acc;
        }
    }
    ImageGrid out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp(reflect(static_cast<std::ptrdiff_t>(r) + k, x.rows()), c);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

ImageGrid median3x3(const ImageGrid& x) {
    ImageGrid out(x.rows(), x.cols());
    std::array<double, 9> win{};
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            std::size_t k = 0;
            for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
                for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
                    win[k++] = x(reflect(static_cast<std::ptrdiff_t>(r) + dr, x.rows()),
                                 reflect(static_cast<std::ptrdiff_t>(c) + dc, x.cols()));
                }
            }
            std::nth_element(win.begin(), win.begin() + 4, win.end());
            out(r, c) = win[4];
        }
    }
    return out;
}

ImageGrid huber_tv_prox(const ImageGrid& x, double huber_delta, double lambda, int iterations) {
    if (!(huber_delta > 0.0)) throw std::invalid_argument("huber_tv_prox: delta must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("huber_tv_prox: lambda must be >= 0");
    if (lambda == 0.0 || iterations <= 0) return x;
    const std::size_t rows = x.rows();
    const std::size_t cols = x.cols();
    // Dual variables on vertical (pv) and horizontal (ph) edges, |p| <= 1.
    ImageGrid pv(rows, cols), ph(rows, cols);
    const double tau = 1.0 / (8.0 * lambda + huber_delta);
    auto primal = [&]() {
        // z = x - lambda D' p
        ImageGrid z = x;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                if (r + 1 < rows) {
                    z(r + 1, c) -= lambda * pv(r, c);
                    z(r, c) += lambda * pv(r, c);
                }
                if (c + 1 < cols) {
                    z(r, c + 1) -= lambda * ph(r, c);
                    z(r, c) += lambda * ph(r, c);
                }
            }
        }
        return z;
    };
    for (int it = 0; it < iterations; ++it) {
        const ImageGrid z = primal();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                if (r + 1 < rows) {
                    const double g = z(r + 1, c) - z(r, c) - huber_delta * pv(r, c);
                    pv(r, c) = std::clamp(pv(r, c) + tau * g, -1.0, 1.0);
                }
                if (c + 1 < cols) {
                    const double g = z(r, c + 1) - z(r, c) - huber_delta * ph(r, c);
                    ph(r, c) = std::clamp(ph(r, c) + tau * g, -1.0, 1.0);
                }
            }
        }
    }
    return primal();
}

BuiltinDenoiser::BuiltinDenoiser(Params params) : params_(params) {
    if (!(params_.blur_width >= 0.0)) throw std::invalid_argument("BuiltinDenoiser: blur_width < 0");
    if (!(params_.tv_lambda >= 0.0)) throw std::invalid_argument("BuiltinDenoiser: tv_lambda < 0");
    if (!(params_.tv_delta > 0.0)) throw std::invalid_argument("BuiltinDenoiser: tv_delta <= 0");
}

ImageGrid BuiltinDenoiser::denoise(const ImageGrid& x, double strength) {
    if (!(strength >= 0.0)) throw std::invalid_argument("denoise: strength must be >= 0");
    if (params_.kind == DenoiserKind::identity || strength == 0.0) return x;
    ImageGrid d;
    switch (params_.kind) {
        case DenoiserKind::gaussian: d = gaussian_blur(x, params_.blur_width); break;
        case DenoiserKind::median: d = median3x3(x); break;
        case DenoiserKind::tv:
            d = huber_tv_prox(x, params_.tv_delta, params_.tv_lambda, params_.tv_iterations);
            break;
        case DenoiserKind::identity: break;
    }
    if (strength == 1.0) return d;
    return axpy(x, strength, d - x);
}

void NoiseSchedule::validate() const {
    if (levels.empty()) throw std::invalid_argument("NoiseSchedule: no levels");
    if (passes_per_level < 1) throw std::invalid_argument("NoiseSchedule: passes_per_level must be >= 1");
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!(levels[k] > 0.0)) throw std::invalid_argument("NoiseSchedule: levels must be positive");
        if (k > 0 && !(levels[k] < levels[k - 1])) {
            throw std::invalid_argument("NoiseSchedule: levels must be strictly decreasing");
        }
    }
}

NoiseSchedule make_geometric_schedule(double sigma_hi, double sigma_lo, int K, int passes_per_level) {
    if (!(sigma_lo > 0.0) || !(sigma_hi > sigma_lo)) {
        throw std::invalid_argument("make_geometric_schedule: need sigma_hi > sigma_lo > 0");
    }
    if (K < 2) throw std::invalid_argument("make_geometric_schedule: K must be >= 2");
    NoiseSchedule s;
    s.passes_per_level = passes_per_level;
    s.levels.resize(static_cast<std::size_t>(K));
    const double ratio = sigma_lo / sigma_hi;
    for (int k = 0; k < K; ++k) {
        s.levels[static_cast<std::size_t>(k)] =
            sigma_hi * std::pow(ratio, static_cast<double>(k) / static_cast<double>(K - 1));
    }
    s.levels.front() = sigma_hi;
    s.levels.back() = sigma_lo;
    s.validate();
    return s;
}

}  // namespace hpr
