#include <queue>
#include <tuple>

#include "lungseg/classical.hpp"
#include "lungseg/errors.hpp"

namespace lungseg::classical {

namespace {

struct QueueItem {
    float elevation;
    std::uint64_t order;  // insertion counter, FIFO among equal elevations
    std::size_t index;

    bool operator>(const QueueItem& o) const {
        return std::tie(elevation, order) > std::tie(o.elevation, o.order);
    }
};

}  // namespace

LabelMap watershed(const GrayImage& elevation, const LabelMap& markers) {
    if (!same_dims(elevation, markers)) throw DimMismatch("elevation and markers differ in size");
    const int W = markers.width, H = markers.height;

    LabelMap out = markers;
    std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> queue;
    std::uint64_t counter = 0;
    std::int32_t max_label = 0;
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
        if (out.labels[i] > 0) {
            queue.push({elevation.data[i], counter++, i});
            max_label = std::max(max_label, out.labels[i]);
        } else {
            out.labels[i] = 0;
        }
    }
    if (queue.empty()) throw NoMarkers("watershed needs at least one positive marker");

    while (!queue.empty()) {
        const QueueItem cur = queue.top();
        queue.pop();
        const int x = static_cast<int>(cur.index % W), y = static_cast<int>(cur.index / W);
        const std::int32_t label = out.labels[cur.index];
        auto visit = [&](int nx, int ny) {
            const std::size_t n = static_cast<std::size_t>(ny) * W + nx;
            if (out.labels[n] != 0) return;
            out.labels[n] = label;
            queue.push({elevation.data[n], counter++, n});
        };
        if (x > 0) visit(x - 1, y);
        if (x + 1 < W) visit(x + 1, y);
        if (y > 0) visit(x, y - 1);
        if (y + 1 < H) visit(x, y + 1);
    }
    out.num_labels = std::max(markers.num_labels, max_label);
    return out;
}

namespace {

// Flooded regions with the background basin cleared, before selection.
LabelMap flood_regions(const GrayImage& img, const PipelineOptions& opts) {
    const int t = otsu_threshold(img);
    const BinaryMask opened = morphology(binarize(img, t, Polarity::LungsDark), MorphOp::Open);
    const DistanceMap dist = distance_transform_l1(opened);
    const std::int32_t dmax = dist.max();
    if (dmax == 0) return LabelMap(img.width, img.height);

    BinaryMask sure(img.width, img.height);
    const double cut = opts.sure_foreground_fraction * dmax;
    for (std::size_t i = 0; i < sure.size(); ++i) sure.data[i] = dist.values[i] > cut ? 1 : 0;

    LabelMap markers = connected_components(sure, opts.lung_connectivity);
    const std::int32_t background = markers.num_labels + 1;
    const BinaryMask reach = morphology(opened, MorphOp::Dilate);
    bool has_background = false;
    for (std::size_t i = 0; i < reach.size(); ++i) {
        if (!reach.data[i]) {
            markers.labels[i] = background;
            has_background = true;
        }
    }
    if (has_background) markers.num_labels = background;

    // Dark lungs are basins: flood directly on intensity.
    LabelMap regions = watershed(img, markers);
    if (has_background) {
        for (auto& l : regions.labels) {
            if (l == background) l = 0;
        }
        regions.num_labels = background - 1;
    }
    return regions;
}

}  // namespace

BinaryMask watershed_lung_pipeline(const GrayImage& img, const PipelineOptions& opts) {
    return select_interior_components(flood_regions(img, opts), opts.keep_components, false);
}

LabelMap watershed_lung_regions(const GrayImage& img, const PipelineOptions& opts) {
    return select_interior_labels(flood_regions(img, opts), opts.keep_components);
}

}  // namespace lungseg::classical
