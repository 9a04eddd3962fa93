#include "fgwarp/tensor_io.hpp"

#include <bit>
#include <cstring>

#include "fgwarp/io_util.hpp"

namespace fgwarp {

static constexpr char kMagic[4] = {'T', '4', 'v', '1'};

std::vector<std::uint8_t> serialize_t4(const Tensor4& t) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 16 + 8 * t.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, std::uint32_t(t.n()));
    put_u32(out, std::uint32_t(t.c()));
    put_u32(out, std::uint32_t(t.h()));
    put_u32(out, std::uint32_t(t.w()));
    for (std::size_t i = 0; i < t.size(); ++i)
        put_u64(out, std::bit_cast<std::uint64_t>(t.data()[i]));
    return out;
}

Tensor4 deserialize_t4(const std::uint8_t* bytes, std::size_t size) {
    if (size < 20 || std::memcmp(bytes, kMagic, 4) != 0)
        throw IoError("T4v1: bad magic or truncated header");
    std::uint32_t n = get_u32(bytes + 4), c = get_u32(bytes + 8);
    std::uint32_t h = get_u32(bytes + 12), w = get_u32(bytes + 16);
    if (n == 0 || c == 0 || h == 0 || w == 0)
        throw IoError("T4v1: zero dimension in header");
    std::uint64_t count = std::uint64_t(n) * c * h * w;
    if (size != 20 + 8 * count)
        throw IoError("T4v1: payload size mismatch (" + std::to_string(size) + " bytes for " +
                      std::to_string(count) + " values)");
    Tensor4 t{int(n), int(c), int(h), int(w)};
    const std::uint8_t* p = bytes + 20;
    for (std::uint64_t i = 0; i < count; ++i, p += 8)
        t.data()[i] = std::bit_cast<double>(get_u64(p));
    return t;
}

void write_t4(const std::filesystem::path& path, const Tensor4& t) {
    atomic_write_file(path, serialize_t4(t));
}

Tensor4 read_t4(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    try {
        return deserialize_t4(bytes.data(), bytes.size());
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

}  // namespace fgwarp
