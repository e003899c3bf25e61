#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "hpr/image.hpp"
#include "hpr/image_io.hpp"
#include "hpr/random.hpp"
#include "hpr/synthetic.hpp"

using namespace hpr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hpr_unit_io";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("grid arithmetic") {
    ImageGrid a(2, 3, 1.0), b(2, 3, 2.0);
    CHECK((a + b) == ImageGrid(2, 3, 3.0));
    CHECK((b - a) == ImageGrid(2, 3, 1.0));
    CHECK((2.0 * a) == b);
    CHECK(dot(a, b) == 12.0);
    CHECK(norm2(b) == doctest::Approx(std::sqrt(24.0)));
    CHECK(axpy(a, 0.5, b) == b);
    CHECK_THROWS(a += ImageGrid(3, 2));
    CHECK_THROWS(ImageGrid(2, 2, std::vector<double>{1.0, 2.0}));
    ImageGrid c = a;
    c[0] = std::nan("");
    CHECK_FALSE(all_finite(c));
}

TEST_CASE("box projection clips to [0, C]") {
    ImageGrid x(1, 5, std::vector<double>{-1.0, 0.0, 0.4, 1.0, 3.0});
    const ImageGrid p = project_box(x, 1.0);
    CHECK(p == ImageGrid(1, 5, std::vector<double>{0.0, 0.0, 0.4, 1.0, 1.0}));
    CHECK(within_box(p, 1.0));
    CHECK_FALSE(within_box(x, 1.0));
    CHECK(project_box(p, 1.0) == p);
    CHECK(project_box(x, 2.0)[4] == 2.0);
}

TEST_CASE("raw images round-trip float32 values exactly") {
    Rng rng(5);
    ImageGrid x(7, 9);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.normal());
    const fs::path p = scratch("round.hpr");
    write_raw_image(p, x);
    CHECK(read_raw_image(p) == x);
}

TEST_CASE("pgm round-trip is within one grey level") {
    const ImageGrid x = make_synthetic(SyntheticKind::blobs, 16, 3);
    const fs::path p = scratch("round.pgm");
    write_pgm(p, x, 1.0);
    const ImageGrid back = read_pgm(p, 1.0);
    REQUIRE(back.same_shape(x));
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(back[i] - x[i]));
    CHECK(err <= 0.5 / 255.0 + 1e-12);

    std::ifstream f(p, std::ios::binary);
    std::string magic;
    f >> magic;
    CHECK(magic == "P5");
}

TEST_CASE("measurement files round-trip") {
    MeasurementSet m;
    m.y = {0.0, -1.5, 3.25, 1000.0};
    m.b_bar = {0.1f, 0.1f, 0.2f, 0.0};
    m.sigma = 0.75;
    const fs::path p = scratch("m.hpm");
    write_measurements(p, m, 0.125);
    const MeasurementFile back = read_measurements(p);
    CHECK(back.alpha == 0.125);
    CHECK(back.measurements.sigma == 0.75);
    CHECK(back.measurements.y == m.y);
    CHECK(back.measurements.b_bar == m.b_bar);
}

TEST_CASE("readers reject malformed files") {
    const fs::path p = scratch("bad.hpr");
    {
        std::ofstream f(p, std::ios::binary);
        f << "HPR1 4 4\n" << std::string(10, '\0');
    }
    CHECK_THROWS(read_raw_image(p));
    {
        std::ofstream f(p, std::ios::binary);
        f << "XXXX 1 1\n" << std::string(4, '\0');
    }
    CHECK_THROWS(read_raw_image(p));
    CHECK_THROWS(read_measurements(p));
    CHECK_THROWS(read_raw_image(scratch("missing.hpr")));
}

TEST_CASE("synthetic generators are deterministic and in [0, 1]") {
    for (auto kind : {SyntheticKind::gmm_texture, SyntheticKind::blobs, SyntheticKind::checker}) {
        const ImageGrid a = make_synthetic(kind, 16, 4);
        CHECK(a == make_synthetic(kind, 16, 4));
        CHECK(within_box(a, 1.0));
        CHECK(parse_synthetic_kind(to_string(kind)) == kind);
    }
    CHECK(make_synthetic(SyntheticKind::gmm_texture, 16, 4) != make_synthetic(SyntheticKind::gmm_texture, 16, 5));
    CHECK_THROWS(parse_synthetic_kind("noise"));
}
