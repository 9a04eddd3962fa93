// Small file I/O helpers shared by the serialization code and the CLI.
// Writers stage into a sibling temp file and rename, so failed runs never
// leave partial outputs behind.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fgwarp {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void atomic_write_file(const std::filesystem::path& path, const void* data, std::size_t size);
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::vector<std::uint8_t>& bytes) {
    atomic_write_file(path, bytes.data(), bytes.size());
}
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

// little-endian scalar packing
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 24));
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    put_u32(out, std::uint32_t(v));
    put_u32(out, std::uint32_t(v >> 32));
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
    return std::uint64_t(get_u32(p)) | std::uint64_t(get_u32(p + 4)) << 32;
}

}  // namespace fgwarp
