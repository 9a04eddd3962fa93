#include <cstdint>
#include <fstream>

#include "doctest.h"
#include "fgwarp/image_io.hpp"
#include "fgwarp/io_util.hpp"
#include "testutil.hpp"

using namespace fgwarp;
using namespace testutil;

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) { return read_file_bytes(p); }

void spit(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_SUITE_BEGIN("imageio");

TEST_CASE("hand-built P6 bytes decode to the expected tensor") {
    TempDir dir("imgio");
    const std::string bytes = std::string("P6\n2 1\n255\n") +
                              std::string({char(0), char(128), char(255),
                                           char(64), char(32), char(16)});
    spit(dir.path / "a.ppm", bytes);
    const Tensor4 img = read_image(dir.path / "a.ppm");
    CHECK(img.shape() == Shape4{1, 3, 1, 2});
    CHECK(img.at(0, 0, 0, 0) == 0.0);
    CHECK(img.at(0, 1, 0, 0) == 128.0 / 255.0);
    CHECK(img.at(0, 2, 0, 0) == 1.0);
    CHECK(img.at(0, 0, 0, 1) == 64.0 / 255.0);
    CHECK(img.at(0, 1, 0, 1) == 32.0 / 255.0);
    CHECK(img.at(0, 2, 0, 1) == 16.0 / 255.0);
}

TEST_CASE("hand-built P5 with comments and a smaller maxval") {
    TempDir dir("imgio");
    const std::string bytes = std::string("P5 # gray\n# a comment line\n3 # width\n1\n128\n") +
                              std::string({char(0), char(64), char(128)});
    spit(dir.path / "g.pgm", bytes);
    const Tensor4 img = read_image(dir.path / "g.pgm");
    CHECK(img.shape() == Shape4{1, 1, 1, 3});
    CHECK(img.at(0, 0, 0, 0) == 0.0);
    CHECK(img.at(0, 0, 0, 1) == 0.5);
    CHECK(img.at(0, 0, 0, 2) == 1.0);
}

TEST_CASE("write quantizes by rounding and clamps out-of-range values") {
    TempDir dir("imgio");
    Tensor4 g = Tensor4::from_data(Shape4{1, 1, 1, 6}, {0.0, 1.0, 0.5, 0.2, -0.5, 1.5});
    write_pgm(dir.path / "q.pgm", g);
    const auto bytes = slurp(dir.path / "q.pgm");
    // header "P5\n6 1\n255\n" is 11 bytes
    REQUIRE(bytes.size() == 11 + 6);
    CHECK(bytes[11] == 0);
    CHECK(bytes[12] == 255);
    CHECK(bytes[13] == 128);  // 0.5 * 255 = 127.5 rounds up
    CHECK(bytes[14] == 51);   // 0.2 * 255 = 51.0
    CHECK(bytes[15] == 0);    // clamped
    CHECK(bytes[16] == 255);  // clamped
}

TEST_CASE("ppm round trip: read(write(x)) quantizes once, then re-write is byte-stable") {
    TempDir dir("imgio");
    Tensor4 img = random_tensor(Shape4{1, 3, 5, 7}, 901, 0.0, 1.0);
    write_ppm(dir.path / "x.ppm", img);
    const Tensor4 back = read_image(dir.path / "x.ppm");
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double q = std::lround(img.data()[i] * 255.0) / 255.0;
        CHECK(back.data()[i] == q);
    }
    write_ppm(dir.path / "y.ppm", back);
    CHECK(slurp(dir.path / "x.ppm") == slurp(dir.path / "y.ppm"));
}

TEST_CASE("pgm round trip is byte-stable and binary masks survive exactly") {
    TempDir dir("imgio");
    Tensor4 mask(1, 1, 4, 4);
    for (int i = 0; i < 8; ++i) mask.data()[i * 2] = 1.0;
    write_pgm(dir.path / "m.pgm", mask);
    const Tensor4 back = read_image(dir.path / "m.pgm");
    for (std::size_t i = 0; i < mask.size(); ++i) CHECK(back.data()[i] == mask.data()[i]);
}

TEST_CASE("malformed files are rejected with path context") {
    TempDir dir("imgio");
    auto expect_throw = [&](const char* name, const std::string& bytes) {
        spit(dir.path / name, bytes);
        CHECK_THROWS_AS(read_image(dir.path / name), IoError);
    };
    expect_throw("ascii.ppm", "P3\n1 1\n255\n0 0 0\n");
    expect_throw("short.ppm", std::string("P6\n2 2\n255\n") + "abc");
    expect_throw("nosep.pgm", "P5\n1 1\n255");
    expect_throw("zero.pgm", std::string("P5\n0 1\n255\n") + std::string(1, '\0'));
    expect_throw("badnum.pgm", "P5\n1x 1\n255\n \n");
    expect_throw("bigmax.pgm", std::string("P5\n1 1\n65535\n") + std::string(2, '\0'));
    CHECK_THROWS_AS(read_image(dir.path / "missing.ppm"), IoError);
}

TEST_CASE("write rejects wrong channel counts") {
    TempDir dir("imgio");
    CHECK_THROWS_AS(write_ppm(dir.path / "bad.ppm", Tensor4(1, 1, 2, 2)), std::invalid_argument);
    CHECK_THROWS_AS(write_pgm(dir.path / "bad.pgm", Tensor4(1, 3, 2, 2)), std::invalid_argument);
}

TEST_SUITE_END();
