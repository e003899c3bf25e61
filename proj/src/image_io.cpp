#include "hpr/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hpr {
namespace {

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
}

void write_floats(std::ostream& os, std::span<const double> values) {
    std::vector<std::uint32_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        words[i] = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    }
    os.write(reinterpret_cast<const char*>(words.data()),
             static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
}

std::vector<double> read_floats(std::istream& is, std::size_t count, const char* what) {
    std::vector<std::uint32_t> words(count);
    is.read(reinterpret_cast<char*>(words.data()),
            static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
    if (static_cast<std::size_t>(is.gcount()) != count * sizeof(std::uint32_t)) {
        throw std::runtime_error(std::string(what) + ": truncated payload");
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = static_cast<double>(std::bit_cast<float>(to_little(words[i])));
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return is;
}

std::string read_header_line(std::istream& is, const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(std::string(what) + ": missing header");
    return line;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_raw_image(const std::filesystem::path& path, const ImageGrid& img) {
    auto os = open_out(path);
    os << "HPR1 " << img.rows() << ' ' << img.cols() << '\n';
    write_floats(os, img.values());
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

ImageGrid read_raw_image(const std::filesystem::path& path) {
    auto is = open_in(path);
    std::istringstream header(read_header_line(is, "HPR1"));
    std::string magic;
    std::size_t rows = 0, cols = 0;
    header >> magic >> rows >> cols;
    if (magic != "HPR1" || !header || rows == 0 || cols == 0) {
        throw std::runtime_error("HPR1: malformed header in " + path.string());
    }
    return ImageGrid(rows, cols, read_floats(is, rows * cols, "HPR1"));
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& img, double upper) {
    auto os = open_out(path);
    os << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
    std::vector<unsigned char> bytes(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double t = std::clamp(img[i] / upper, 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(255.0 * t));
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ImageGrid read_pgm(const std::filesystem::path& path, double upper) {
    auto is = open_in(path);
    std::string magic;
    is >> magic;
    if (magic != "P5") throw std::runtime_error("PGM: only binary P5 is supported");
    auto next_int = [&is]() {
        int v = 0;
        while (is >> std::ws && is.peek() == '#') {
            std::string comment;
            std::getline(is, comment);
        }
        is >> v;
        return v;
    };
    const int cols = next_int();
    const int rows = next_int();
    const int maxval = next_int();
    if (!is || cols <= 0 || rows <= 0 || maxval <= 0 || maxval > 255) {
        throw std::runtime_error("PGM: malformed header");
    }
    is.get();  // single whitespace before raster
    std::vector<unsigned char> bytes(static_cast<std::size_t>(rows * cols));
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(is.gcount()) != bytes.size()) {
        throw std::runtime_error("PGM: truncated raster");
    }
    ImageGrid img(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img[i] = upper * static_cast<double>(bytes[i]) / static_cast<double>(maxval);
    }
    return img;
}

void write_measurements(const std::filesystem::path& path, const MeasurementSet& meas,
                        double alpha) {
    meas.validate(meas.y.size());
    auto os = open_out(path);
    os << "HPM1 " << meas.y.size() << ' ' << format_real(meas.sigma) << ' ' << format_real(alpha)
       << '\n';
    write_floats(os, meas.y);
    write_floats(os, meas.b_bar);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

MeasurementFile read_measurements(const std::filesystem::path& path) {
    auto is = open_in(path);
    std::istringstream header(read_header_line(is, "HPM1"));
    std::string magic;
    std::size_t m = 0;
    MeasurementFile out;
    header >> magic >> m >> out.measurements.sigma >> out.alpha;
    if (magic != "HPM1" || !header || m == 0) {
        throw std::runtime_error("HPM1: malformed header in " + path.string());
    }
    out.measurements.y = read_floats(is, m, "HPM1");
    out.measurements.b_bar = read_floats(is, m, "HPM1");
    out.measurements.validate(m);
    return out;
}

}  // namespace hpr
