#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lungseg/image.hpp"
#include "lungseg/png_io.hpp"

namespace lungseg::io {

inline constexpr int kJsrtSide = 2048;
inline constexpr std::uint16_t kJsrtMaxValue = 4095;

struct RawOptions {
    int width = kJsrtSide;
    int height = kJsrtSide;
    /// Map v -> 1 - v after normalization.
    bool invert = false;
};

/// Parses a headerless big-endian 16-bit raster. Words are clamped to 12 bits
/// and divided by 4095. Throws FileMissing or SizeMismatch.
GrayImage read_jsrt_raw(const std::filesystem::path& path, const RawOptions& opts = {});

/// Parses an in-memory raw buffer under the same rules as read_jsrt_raw.
GrayImage decode_jsrt_raw(const std::vector<std::uint8_t>& bytes, const RawOptions& opts = {});

/// Inverse of decode_jsrt_raw for images it produced: v * 4095 rounded,
/// written big-endian. With `invert` the value is flipped first.
std::vector<std::uint8_t> encode_jsrt_raw(const GrayImage& img, bool invert = false);
void write_jsrt_raw(const GrayImage& img, const std::filesystem::path& path, bool invert = false);

/// Reads a grayscale PNG or P5 PGM mask; pixels > 127 are lung.
/// Throws FileMissing, UnsupportedFormat or DecodeError.
BinaryMask read_mask(const std::filesystem::path& path);

/// Reads a PNG or PGM as intensities v / 255.
GrayImage read_gray(const std::filesystem::path& path);

void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path);
void write_gray_png(const GrayImage& img, const std::filesystem::path& path);

/// Bilinear resampling with half-pixel centers (align_corners = false).
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

/// Nearest-neighbor resampling on the same pixel-center grid as
/// resize_bilinear. Equidistant samples resolve to the smaller source index.
BinaryMask resize_nearest(const BinaryMask& mask, int out_w, int out_h);

struct OverlayStyle {
    int gutter = 4;
    std::uint8_t gutter_value = 32;
};

// Superimposition palette.
inline constexpr std::uint8_t kAgreeRgb[3] = {255, 215, 0};
inline constexpr std::uint8_t kTruthOnlyRgb[3] = {0, 200, 0};
inline constexpr std::uint8_t kPredOnlyRgb[3] = {220, 0, 0};

/// Four panels left to right: image, prediction-vs-truth superimposition,
/// predicted mask, disagreement map. Width is 4w + 3 * gutter.
Raster8 render_overlay_panel(const GrayImage& img, const BinaryMask& predicted, const BinaryMask& truth,
                             const OverlayStyle& style = {});

void write_overlay_panel(const GrayImage& img, const BinaryMask& predicted, const BinaryMask& truth,
                         const std::filesystem::path& path, const OverlayStyle& style = {});

}  // namespace lungseg::io
