#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lungseg {

/// Single-channel raster, row-major, intensities normalized to [0, 1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    GrayImage() = default;
    GrayImage(int w, int h, float fill = 0.0f);

    bool empty() const noexcept { return data.empty(); }
    std::size_t size() const noexcept { return data.size(); }

    float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Row-major boolean raster stored one byte per pixel (0 or 1).
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int w, int h, bool fill = false);

    bool empty() const noexcept { return data.empty(); }
    std::size_t size() const noexcept { return data.size(); }
    std::size_t count() const noexcept;

    bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Region labels; 0 is background / unassigned, positive labels are 1..num_labels.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;
    std::int32_t num_labels = 0;

    LabelMap() = default;
    LabelMap(int w, int h);

    std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
};

template <typename A, typename B>
bool same_dims(const A& a, const B& b) noexcept {
    return a.width == b.width && a.height == b.height;
}

BinaryMask complement(const BinaryMask& m);

}  // namespace lungseg
