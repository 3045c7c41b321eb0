#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lungseg::io {

/// 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
struct Raster8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;
};

/// Decodes any PNG and converts it to 8-bit grayscale. Throws DecodeError.
Raster8 read_png_gray(const std::filesystem::path& path);

/// Decodes a binary PGM (P5), maxval up to 65535, rescaled to 0..255. Throws DecodeError.
Raster8 read_pgm(const std::filesystem::path& path);

/// Writes gray or RGB PNG. No time chunk is emitted, so output bytes depend only on pixels.
void write_png(const Raster8& raster, const std::filesystem::path& path);

enum class RasterFormat { Png, Pgm, Unknown };

/// Sniffs the magic bytes. Throws FileMissing when the path does not exist.
RasterFormat sniff_format(const std::filesystem::path& path);

}  // namespace lungseg::io
