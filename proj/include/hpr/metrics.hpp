#pragma once

#include "hpr/image.hpp"

namespace hpr {

/// sign(<x_hat, x_true>) * x_hat; a zero inner product leaves x_hat unchanged.
ImageGrid phase_correct(const ImageGrid& x_hat, const ImageGrid& x_true);

/// 100 * |x_hat - x_true| / |x_true|, with no sign correction.
double nrmse_raw(const ImageGrid& x_hat, const ImageGrid& x_true);

/// nrmse_raw after phase_correct, in percent.
double nrmse(const ImageGrid& x_hat, const ImageGrid& x_true);

struct SsimParams {
    double k1 = 0.01;
    double k2 = 0.03;
    std::size_t window = 8;
    double data_range = 1.0;
};

/// Mean SSIM over all fully contained window positions (stride 1, uniform weights,
/// unbiased local variances). Neither image is sign corrected.
double ssim(const ImageGrid& x_hat, const ImageGrid& x_true, const SsimParams& params = {});

}  // namespace hpr
