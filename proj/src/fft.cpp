#include "hpr/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>
#include <vector>

namespace hpr {
namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

struct Fft2::Plans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
};

Fft2::Fft2(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), plans_(std::make_unique<Plans>()) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("Fft2: empty shape");
    std::vector<Complex> scratch(rows * cols);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard lock(planner_mutex());
    plans_->forward = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf, buf,
                                       FFTW_FORWARD, flags);
    plans_->backward = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf, buf,
                                        FFTW_BACKWARD, flags);
    if (!plans_->forward || !plans_->backward) throw std::runtime_error("Fft2: FFTW planning failed");
}

Fft2::~Fft2() {
    std::lock_guard lock(planner_mutex());
    if (plans_->forward) fftw_destroy_plan(plans_->forward);
    if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

void Fft2::forward(std::span<Complex> data) const {
    if (data.size() != size()) throw std::invalid_argument("Fft2::forward: size mismatch");
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plans_->forward, buf, buf);
}

void Fft2::backward(std::span<Complex> data) const {
    if (data.size() != size()) throw std::invalid_argument("Fft2::backward: size mismatch");
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plans_->backward, buf, buf);
}

}  // namespace hpr
