#pragma once

#include <filesystem>
#include <string>

#include "hpr/image.hpp"
#include "hpr/measurement.hpp"

namespace hpr {

/// Raw images: ASCII line "HPR1 <rows> <cols>\n" then little-endian float32
/// values in row-major order. Round-trips any float32-representable image.
void write_raw_image(const std::filesystem::path& path, const ImageGrid& img);
ImageGrid read_raw_image(const std::filesystem::path& path);

/// 8-bit binary PGM (P5) scaled so [0, upper] maps to [0, 255].
void write_pgm(const std::filesystem::path& path, const ImageGrid& img, double upper = 1.0);
ImageGrid read_pgm(const std::filesystem::path& path, double upper = 1.0);

/// Measurement files: "HPM1 <M> <sigma> <alpha>\n" then M float32 y then M
/// float32 b_bar, little-endian. `alpha` is the operator gain used to simulate.
struct MeasurementFile {
    MeasurementSet measurements;
    double alpha = 0.0;
};
void write_measurements(const std::filesystem::path& path, const MeasurementSet& meas,
                        double alpha);
MeasurementFile read_measurements(const std::filesystem::path& path);

}  // namespace hpr
