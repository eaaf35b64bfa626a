#pragma once

// 8-bit raster I/O: binary Netpbm (P5/P6) and PNG.

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mprof {

struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> data;  // row-major, interleaved channels
};

/// Reads .pgm/.ppm/.png (detected from the file signature).
/// Throws MissingFile, Malformed.
Image read_image(const std::filesystem::path& path);

Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

bool is_supported_image(const std::filesystem::path& path);

}  // namespace mprof
