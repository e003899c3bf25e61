#include "hpr/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace hpr {

ImageGrid phase_correct(const ImageGrid& x_hat, const ImageGrid& x_true) {
    require_same_shape(x_hat, x_true, "phase_correct");
    const double ip = dot(x_hat, x_true);
    if (ip < 0.0) return -1.0 * x_hat;
    return x_hat;
}

double nrmse_raw(const ImageGrid& x_hat, const ImageGrid& x_true) {
    require_same_shape(x_hat, x_true, "nrmse");
    const double ref = norm2(x_true);
    if (!(ref > 0.0)) throw std::domain_error("nrmse: ground truth has zero norm");
    return 100.0 * norm2(x_hat - x_true) / ref;
}

double nrmse(const ImageGrid& x_hat, const ImageGrid& x_true) {
    return nrmse_raw(phase_correct(x_hat, x_true), x_true);
}

double ssim(const ImageGrid& x_hat, const ImageGrid& x_true, const SsimParams& params) {
    require_same_shape(x_hat, x_true, "ssim");
    const std::size_t w = params.window;
    if (w < 2 || x_hat.rows() < w || x_hat.cols() < w) {
        throw std::invalid_argument("ssim: image smaller than window");
    }
    const double c1 = std::pow(params.k1 * params.data_range, 2);
    const double c2 = std::pow(params.k2 * params.data_range, 2);
    const double count = static_cast<double>(w * w);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t r0 = 0; r0 + w <= x_hat.rows(); ++r0) {
        for (std::size_t c0 = 0; c0 + w <= x_hat.cols(); ++c0) {
            double sa = 0.0, sb = 0.0;
            for (std::size_t r = r0; r < r0 + w; ++r) {
                for (std::size_t c = c0; c < c0 + w; ++c) {
                    sa += x_hat(r, c);
                    sb += x_true(r, c);
                }
            }
            const double ma = sa / count;
            const double mb = sb / count;
            double vaa = 0.0, vbb = 0.0, vab = 0.0;
            for (std::size_t r = r0; r < r0 + w; ++r) {
                for (std::size_t c = c0; c < c0 + w; ++c) {
                    const double da = x_hat(r, c) - ma;
                    const double db = x_true(r, c) - mb;
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            }
            vaa /= count - 1.0;
            vbb /= count - 1.0;
            vab /= count - 1.0;
            total += ((2.0 * ma * mb + c1) * (2.0 * vab + c2)) /
                     ((ma * ma + mb * mb + c1) * (vaa + vbb + c2));
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

}  // namespace hpr
