#include "fgwarp/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fgwarp/io_util.hpp"

namespace fgwarp {

namespace {

// whitespace/comment-aware PNM header token scanner
struct PnmScanner {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;
    const std::string where;

    PnmScanner(const std::vector<std::uint8_t>& b, std::string path)
        : bytes(b), where(std::move(path)) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw IoError(where + ": " + msg);
    }

    static bool is_space(std::uint8_t c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    }

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            if (is_space(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    }

    std::string token() {
        skip_space_and_comments();
        std::size_t start = pos;
        while (pos < bytes.size() && !is_space(bytes[pos]) && bytes[pos] != '#') ++pos;
        if (pos == start) fail("truncated header");
        return std::string(bytes.begin() + std::ptrdiff_t(start),
                           bytes.begin() + std::ptrdiff_t(pos));
    }

    int number(const char* what, int lo, int hi) {
        const std::string t = token();
        int v = 0;
        for (char ch : t) {
            if (ch < '0' || ch > '9') fail(std::string("bad ") + what + " '" + t + "'");
            if (v > (hi - (ch - '0')) / 10) fail(std::string(what) + " out of range: " + t);
            v = v * 10 + (ch - '0');
        }
        if (v < lo || v > hi)
            fail(std::string(what) + " out of range: " + t);
        return v;
    }
};

std::vector<std::uint8_t> quantize(const Tensor4& img) {
    std::vector<std::uint8_t> out;
    out.reserve(img.size());
    const int h = img.h(), w = img.w(), c = img.c();
    // interleave channels pixel-by-pixel (PNM order) from the planar tensor
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                double v = img.at(0, ch, y, x);
                if (v < 0.0) v = 0.0;
                if (v > 1.0) v = 1.0;
                out.push_back(std::uint8_t(std::lround(v * 255.0)));
            }
    return out;
}

void write_pnm(const std::filesystem::path& path, const Tensor4& img, int channels,
               const char* magic) {
    require(img.n() == 1 && img.c() == channels,
            std::string("write_") + (channels == 3 ? "ppm" : "pgm") +
                ": expected (1," + std::to_string(channels) + ",h,w), got " + img.shape().str());
    const std::string header = std::string(magic) + "\n" + std::to_string(img.w()) + " " +
                               std::to_string(img.h()) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    std::vector<std::uint8_t> pix = quantize(img);
    bytes.insert(bytes.end(), pix.begin(), pix.end());
    atomic_write_file(path, bytes);
}

}  // namespace

Tensor4 read_image(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    PnmScanner sc(bytes, path.string());

    const std::string magic = sc.token();
    int channels = 0;
    if (magic == "P6")
        channels = 3;
    else if (magic == "P5")
        channels = 1;
    else
        sc.fail("unsupported magic '" + magic + "' (need binary P5 or P6)");

    const int w = sc.number("width", 1, 1 << 16);
    const int h = sc.number("height", 1, 1 << 16);
    const int maxval = sc.number("maxval", 1, 255);
    // exactly one whitespace byte separates the header from the raster
    if (sc.pos >= bytes.size() || !PnmScanner::is_space(bytes[sc.pos]))
        sc.fail("missing raster separator");
    ++sc.pos;

    const std::size_t need = std::size_t(w) * h * channels;
    if (bytes.size() - sc.pos < need)
        sc.fail("raster truncated: need " + std::to_string(need) + " bytes, have " +
                std::to_string(bytes.size() - sc.pos));

    Tensor4 img(1, channels, h, w);
    const std::uint8_t* p = bytes.data() + sc.pos;
    // exact division: k/maxval correctly rounded, so test oracles can mirror it
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < channels; ++ch) img.at(0, ch, y, x) = double(*p++) / maxval;
    return img;
}

void write_ppm(const std::filesystem::path& path, const Tensor4& rgb) {
    write_pnm(path, rgb, 3, "P6");
}

void write_pgm(const std::filesystem::path& path, const Tensor4& gray) {
    write_pnm(path, gray, 1, "P5");
}

}  // namespace fgwarp
