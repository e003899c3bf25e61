#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hpr/fft.hpp"
#include "hpr/image.hpp"

namespace hpr {

using Field = std::vector<Complex>;

struct OperatorNorms {
    double spectral = 0.0;  ///< largest singular value of the linear part
    double infinity = 0.0;  ///< max row sum of |entries| of the linear part
    std::vector<double> rayleigh;  ///< power-iteration estimates, one per iteration
};

/// Holographic forward model A(x) = alpha * DFT{[x | 0 | r]}.
///
/// The n x 3n strip [x | 0 | r] sits in the top-left corner of an
/// (s n) x (3 s n) zero plane, s = oversample, and is transformed with the
/// unitary DFT. The operator splits into the linear x-block L and the
/// constant reference field c = alpha * DFT{[0 | 0 | r]}; measurement index
/// i = row * plane_cols + col. Immutable after construction.
class HolographicOperator {
public:
    HolographicOperator(std::size_t n, double alpha, std::size_t oversample, ImageGrid reference);

    std::size_t n() const noexcept { return n_; }
    double alpha() const noexcept { return alpha_; }
    std::size_t oversample() const noexcept { return oversample_; }
    std::size_t plane_rows() const noexcept { return oversample_ * n_; }
    std::size_t plane_cols() const noexcept { return 3 * oversample_ * n_; }
    /// P, the padded-plane pixel count; equals the measurement count M.
    std::size_t plane_size() const noexcept { return plane_rows() * plane_cols(); }
    std::size_t measurement_count() const noexcept { return plane_size(); }
    std::size_t pixel_count() const noexcept { return n_ * n_; }

    const ImageGrid& reference() const noexcept { return reference_; }
    std::span<const Complex> offset() const noexcept { return offset_; }

    /// L x
    Field apply_linear(const ImageGrid& x) const;
    /// L x + c
    Field apply_forward(const ImageGrid& x) const;
    /// Re(L^H f): adjoint of the x-block with respect to the real inner product.
    ImageGrid apply_adjoint(std::span<const Complex> field) const;
    /// |L x + c|^2
    std::vector<double> intensity(const ImageGrid& x) const;

    const OperatorNorms& norms() const noexcept { return norms_; }

private:
    Field embed_and_transform(const ImageGrid* x, const ImageGrid* r) const;
    void check_image(const ImageGrid& x) const;
    OperatorNorms estimate_norms() const;

    std::size_t n_;
    double alpha_;
    std::size_t oversample_;
    ImageGrid reference_;
    std::shared_ptr<const Fft2> fft_;
    Field offset_;
    OperatorNorms norms_;
};

/// Validated construction: n >= 2, alpha > 0, oversample >= 1, r binary n x n.
HolographicOperator make_operator(std::size_t n, double alpha, std::size_t oversample,
                                  ImageGrid reference);

/// Random binary reference image with P(1) = fill.
ImageGrid random_binary_reference(std::size_t n, std::uint64_t seed, double fill = 0.5);

}  // namespace hpr
