#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace hpr {

using Complex = std::complex<double>;

/// In-place 2-D complex DFT of fixed shape backed by FFTW.
///
/// Plans are created once (under a process-wide lock, since FFTW planning is
/// not thread-safe) and executed through the new-array interface, so one
/// instance may be used concurrently from several threads. Transforms are
/// unnormalized; callers apply the 1/sqrt(P) factor.
class Fft2 {
public:
    Fft2(std::size_t rows, std::size_t cols);
    ~Fft2();
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return rows_ * cols_; }

    /// exp(-2 pi i k.x / N) kernel
    void forward(std::span<Complex> data) const;
    /// exp(+2 pi i k.x / N) kernel
    void backward(std::span<Complex> data) const;

private:
    struct Plans;
    std::size_t rows_;
    std::size_t cols_;
    std::unique_ptr<Plans> plans_;
};

}  // namespace hpr
