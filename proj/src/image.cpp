#include "hpr/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hpr {

ImageGrid::ImageGrid(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

ImageGrid::ImageGrid(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw std::invalid_argument("ImageGrid: value count does not match shape");
    }
}

ImageGrid& ImageGrid::operator+=(const ImageGrid& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

ImageGrid& ImageGrid::operator-=(const ImageGrid& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

ImageGrid& ImageGrid::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

ImageGrid operator+(ImageGrid a, const ImageGrid& b) { return a += b; }
ImageGrid operator-(ImageGrid a, const ImageGrid& b) { return a -= b; }
ImageGrid operator*(double s, ImageGrid a) { return a *= s; }

double dot(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const ImageGrid& a) { return std::sqrt(dot(a, a)); }

double max_abs(const ImageGrid& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

bool all_finite(const ImageGrid& a) {
    return std::all_of(a.values().begin(), a.values().end(),
                       [](double v) { return std::isfinite(v); });
}

ImageGrid axpy(const ImageGrid& a, double s, const ImageGrid& b) {
    require_same_shape(a, b, "axpy");
    ImageGrid out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + s * b[i];
    return out;
}

ImageGrid project_box(ImageGrid x, double upper) {
    for (double& v : x.values()) v = std::clamp(v, 0.0, upper);
    return x;
}

bool within_box(const ImageGrid& x, double upper) {
    return std::all_of(x.values().begin(), x.values().end(),
                       [upper](double v) { return v >= 0.0 && v <= upper; });
}

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
    }
}

}  // namespace hpr
