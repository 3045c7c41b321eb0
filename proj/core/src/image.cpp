#include "lungseg/image.hpp"

#include <algorithm>

namespace lungseg {

GrayImage::GrayImage(int w, int h, float fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

BinaryMask::BinaryMask(int w, int h, bool fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

LabelMap::LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

BinaryMask complement(const BinaryMask& m) {
    BinaryMask out = m;
    for (auto& v : out.data) v = v ? 0 : 1;
    return out;
}

}  // namespace lungseg
