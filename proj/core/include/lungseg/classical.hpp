#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lungseg/image.hpp"

namespace lungseg::classical {

struct Histogram256 {
    std::array<std::uint64_t, 256> bins{};
    std::uint64_t total() const noexcept;
};

/// floor(v * 255), clamped to 0..255. 0.5 lands in bin 127.
int quantize(float v) noexcept;

Histogram256 histogram256(const GrayImage& img);

/// Level t in 0..255 maximizing w0 * w1 * (mu0 - mu1)^2 with class 0 = bins <= t.
/// Ties resolve to the smallest t; an image occupying a single bin returns
/// that bin. Comparisons are exact for images up to 2^18 pixels.
/// Throws EmptyImage.
int otsu_threshold(const GrayImage& img);
int otsu_threshold(const Histogram256& hist);

enum class Polarity { LungsDark, LungsBright };

/// LungsDark: foreground is bin <= t. LungsBright: bin > t.
BinaryMask binarize(const GrayImage& img, int t, Polarity polarity = Polarity::LungsDark);

enum class Connectivity { Four = 4, Eight = 8 };

/// Union-find labeling; labels are numbered 1.. in first-encounter raster order.
LabelMap connected_components(const BinaryMask& mask, Connectivity conn);

/// Pixel count per label, index 0 unused.
std::vector<std::uint64_t> component_sizes(const LabelMap& labels);

/// Flag per label (index 0 unused): does the component reach the image border?
std::vector<bool> touches_border(const LabelMap& labels);

/// Sets every background pixel that cannot reach the border through
/// 4-connected background.
BinaryMask fill_holes(const BinaryMask& mask);

/// Drops labels that touch the border, keeps the `keep` largest of the rest
/// (equal sizes: lower label first), optionally fills the holes of each, and
/// returns their union.
BinaryMask select_interior_components(const LabelMap& labels, std::size_t keep = 2, bool fill = true);

/// The same selection as a label map: kept components renumbered 1..k in
/// their original label order, everything else 0.
LabelMap select_interior_labels(const LabelMap& labels, std::size_t keep = 2);

struct DistanceMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> values;

    std::int32_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t max() const noexcept;
};

/// City-block distance from each pixel to the nearest background pixel, with
/// everything outside the image counting as background. A single row (or
/// column) is treated as a 1-D signal: only its two ends border the outside.
/// Two-pass chamfer.
DistanceMap distance_transform_l1(const BinaryMask& mask);

enum class MorphOp { Erode, Dilate, Open };

/// 3x3 cross structuring element. Outside pixels are background for erosion
/// and ignored for dilation.
BinaryMask morphology(const BinaryMask& mask, MorphOp op);

/// Marker-driven priority flood over 4-neighbors. Marker pixels seed a
/// min-queue keyed by elevation (ties first-in first-out); each popped pixel
/// hands its label to unlabeled neighbors, which are queued at their own
/// elevation. Throws NoMarkers, DimMismatch.
LabelMap watershed(const GrayImage& elevation, const LabelMap& markers);

struct PipelineOptions {
    Connectivity lung_connectivity = Connectivity::Eight;
    double sure_foreground_fraction = 0.4;
    std::size_t keep_components = 2;
};

/// Otsu -> binarize (lungs dark) -> 8-connected components -> drop
/// border-touching components -> two largest -> fill holes.
BinaryMask cca_lung_pipeline(const GrayImage& img, const PipelineOptions& opts = {});

/// Otsu -> binarize -> open -> L1 distance -> markers from distance above a
/// fraction of the maximum, plus a background marker outside the dilated
/// mask -> watershed on the intensity surface (dark = low) -> drop the
/// background basin and border-touching basins -> two largest.
BinaryMask watershed_lung_pipeline(const GrayImage& img, const PipelineOptions& opts = {});

/// The kept watershed regions before they are merged into one mask.
LabelMap watershed_lung_regions(const GrayImage& img, const PipelineOptions& opts = {});

}  // namespace lungseg::classical
