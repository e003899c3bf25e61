#include "hpr/operator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hpr/random.hpp"

namespace hpr {

HolographicOperator::HolographicOperator(std::size_t n, double alpha, std::size_t oversample,
                                         ImageGrid reference)
    : n_(n), alpha_(alpha), oversample_(oversample), reference_(std::move(reference)) {
    if (n < 2) throw std::invalid_argument("HolographicOperator: n must be >= 2");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("HolographicOperator: alpha must be positive");
    }
    if (oversample < 1) throw std::invalid_argument("HolographicOperator: oversample must be >= 1");
    if (reference_.rows() != n || reference_.cols() != n) {
        throw std::invalid_argument("HolographicOperator: reference must be " + std::to_string(n) +
                                    "x" + std::to_string(n));
    }
    fft_ = std::make_shared<const Fft2>(plane_rows(), plane_cols());
    offset_ = embed_and_transform(nullptr, &reference_);
    norms_ = estimate_norms();
}

void HolographicOperator::check_image(const ImageGrid& x) const {
    if (x.rows() != n_ || x.cols() != n_) {
        throw std::invalid_argument("HolographicOperator: expected " + std::to_string(n_) + "x" +
                                    std::to_string(n_) + " image, got " +
                                    std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
    }
}

Field HolographicOperator::embed_and_transform(const ImageGrid* x, const ImageGrid* r) const {
    const std::size_t cols = plane_cols();
    Field plane(plane_size(), Complex(0.0, 0.0));
    for (std::size_t row = 0; row < n_; ++row) {
        for (std::size_t col = 0; col < n_; ++col) {
            if (x) plane[row * cols + col] = (*x)(row, col);
            if (r) plane[row * cols + 2 * n_ + col] = (*r)(row, col);
        }
    }
    fft_->forward(plane);
    const double scale = alpha_ / std::sqrt(static_cast<double>(plane_size()));
    for (Complex& v : plane) v *= scale;
    return plane;
}

Field HolographicOperator::apply_linear(const ImageGrid& x) const {
    check_image(x);
    return embed_and_transform(&x, nullptr);
}

Field HolographicOperator::apply_forward(const ImageGrid& x) const {
    Field f = apply_linear(x);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += offset_[i];
    return f;
}

ImageGrid HolographicOperator::apply_adjoint(std::span<const Complex> field) const {
    if (field.size() != measurement_count()) {
        throw std::invalid_argument("HolographicOperator::apply_adjoint: expected " +
                                    std::to_string(measurement_count()) + " entries, got " +
                                    std::to_string(field.size()));
    }
    Field plane(field.begin(), field.end());
    fft_->backward(plane);
    const double scale = alpha_ / std::sqrt(static_cast<double>(plane_size()));
    const std::size_t cols = plane_cols();
    ImageGrid out = ImageGrid::square(n_);
    for (std::size_t row = 0; row < n_; ++row) {
        for (std::size_t col = 0; col < n_; ++col) {
            out(row, col) = scale * plane[row * cols + col].real();
        }
    }
    return out;
}

std::vector<double> HolographicOperator::intensity(const ImageGrid& x) const {
    const Field f = apply_forward(x);
    std::vector<double> u(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) u[i] = std::norm(f[i]);
    return u;
}

OperatorNorms HolographicOperator::estimate_norms() const {
    OperatorNorms out;
    // Each DFT entry has magnitude alpha / sqrt(P); a row touches n^2 x-columns.
    out.infinity = alpha_ * static_cast<double>(n_ * n_) /
                   std::sqrt(static_cast<double>(plane_size()));

    Rng rng(0x5eed);
    ImageGrid v = ImageGrid::square(n_);
    for (double& e : v.values()) e = rng.normal();
    v *= 1.0 / norm2(v);
    double previous = 0.0;
    for (int it = 0; it < 30; ++it) {
        ImageGrid w = apply_adjoint(apply_linear(v));
        const double rq = dot(v, w);  // ||L v||^2 with ||v|| = 1
        const double estimate = std::sqrt(std::max(rq, 0.0));
        out.rayleigh.push_back(estimate);
        const double wn = norm2(w);
        if (wn == 0.0) break;
        v = (1.0 / wn) * std::move(w);
        if (it > 0 && std::abs(estimate - previous) <= 1e-8 * estimate) break;
        previous = estimate;
    }
    out.spectral = out.rayleigh.empty() ? 0.0 : out.rayleigh.back();
    return out;
}

HolographicOperator make_operator(std::size_t n, double alpha, std::size_t oversample,
                                  ImageGrid reference) {
    if (reference.rows() != n || reference.cols() != n) {
        throw std::invalid_argument("make_operator: reference dimension does not match n");
    }
    for (double v : reference.values()) {
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("make_operator: reference must be binary");
    }
    return HolographicOperator(n, alpha, oversample, std::move(reference));
}

ImageGrid random_binary_reference(std::size_t n, std::uint64_t seed, double fill) {
    Rng rng(mix_seed(seed, 0x7265));
    ImageGrid r = ImageGrid::square(n);
    for (double& v : r.values()) v = rng.uniform() < fill ? 1.0 : 0.0;
    return r;
}

}  // namespace hpr
