#include "hpr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hpr/random.hpp"

namespace hpr {

SyntheticKind parse_synthetic_kind(const std::string& name) {
    if (name == "gmm-texture" || name == "gmm") return SyntheticKind::gmm_texture;
    if (name == "blobs") return SyntheticKind::blobs;
    if (name == "checker") return SyntheticKind::checker;
    throw std::invalid_argument("unknown synthetic image '" + name + "' (gmm-texture|blobs|checker)");
}

std::string to_string(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::gmm_texture: return "gmm-texture";
        case SyntheticKind::blobs: return "blobs";
        case SyntheticKind::checker: return "checker";
    }
    return "?";
}

ImageGrid make_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed, const GmmPrior& prior) {
    if (n < 2) throw std::invalid_argument("make_synthetic: n must be >= 2");
    switch (kind) {
        case SyntheticKind::gmm_texture: return gmm_sample_image(prior, n, seed, 1.0);
        case SyntheticKind::blobs: {
            Rng rng(mix_seed(seed, 0x626c6f62));
            ImageGrid img = ImageGrid::square(n);
            const int count = 3 + static_cast<int>(rng.uniform() * 4.0);
            const double nf = static_cast<double>(n);
            for (int b = 0; b < count; ++b) {
                const double cr = rng.uniform() * nf;
                const double cc = rng.uniform() * nf;
                const double width = nf * (0.08 + 0.12 * rng.uniform());
                const double height = 0.4 + 0.6 * rng.uniform();
                for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t c = 0; c < n; ++c) {
                        const double dr = static_cast<double>(r) - cr;
                        const double dc = static_cast<double>(c) - cc;
                        img(r, c) += height * std::exp(-(dr * dr + dc * dc) / (2.0 * width * width));
                    }
                }
            }
            const double top = max_abs(img);
            if (top > 0.0) img *= 1.0 / top;
            return img;
        }
        case SyntheticKind::checker: {
            Rng rng(mix_seed(seed, 0x636865));
            const std::size_t block = std::max<std::size_t>(1, n / 4);
            const std::size_t phase = static_cast<std::size_t>(rng.uniform() * 2.0);
            ImageGrid img = ImageGrid::square(n);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < n; ++c) {
                    img(r, c) = ((r / block + c / block + phase) % 2 == 0) ? 0.8 : 0.2;
                }
            }
            return img;
        }
    }
    throw std::logic_error("make_synthetic: unknown kind");
}

}  // namespace hpr
