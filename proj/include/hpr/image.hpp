#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hpr {

/// Dense row-major real image. Used for the specimen, the reference and
/// every x-space iterate produced by the solvers.
class ImageGrid {
public:
    ImageGrid() = default;
    ImageGrid(std::size_t rows, std::size_t cols, double fill = 0.0);
    ImageGrid(std::size_t rows, std::size_t cols, std::vector<double> values);

    static ImageGrid square(std::size_t n, double fill = 0.0) { return ImageGrid(n, n, fill); }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    bool same_shape(const ImageGrid& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }

    ImageGrid& operator+=(const ImageGrid& other);
    ImageGrid& operator-=(const ImageGrid& other);
    ImageGrid& operator*=(double s);

    bool operator==(const ImageGrid& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

ImageGrid operator+(ImageGrid a, const ImageGrid& b);
ImageGrid operator-(ImageGrid a, const ImageGrid& b);
ImageGrid operator*(double s, ImageGrid a);

double dot(const ImageGrid& a, const ImageGrid& b);
double norm2(const ImageGrid& a);
double max_abs(const ImageGrid& a);
bool all_finite(const ImageGrid& a);

/// a + s * b
ImageGrid axpy(const ImageGrid& a, double s, const ImageGrid& b);

/// Truncation operator onto the box [0, C].
ImageGrid project_box(ImageGrid x, double upper);
bool within_box(const ImageGrid& x, double upper);

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what);

}  // namespace hpr
