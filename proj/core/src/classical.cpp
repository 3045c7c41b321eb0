#include <algorithm>
#include <cmath>
#include <numeric>

#include "lungseg/classical.hpp"
#include "lungseg/errors.hpp"

namespace lungseg::classical {

std::uint64_t Histogram256::total() const noexcept {
    return std::accumulate(bins.begin(), bins.end(), std::uint64_t{0});
}

int quantize(float v) noexcept {
    const double q = std::floor(static_cast<double>(v) * 255.0 + 1e-9);
    return static_cast<int>(std::clamp(q, 0.0, 255.0));
}

Histogram256 histogram256(const GrayImage& img) {
    Histogram256 h;
    for (float v : img.data) ++h.bins[static_cast<std::size_t>(quantize(v))];
    return h;
}

int otsu_threshold(const GrayImage& img) {
    if (img.empty()) throw EmptyImage("otsu_threshold on an empty image");
    return otsu_threshold(histogram256(img));
}

int otsu_threshold(const Histogram256& hist) {
    const std::uint64_t total = hist.total();
    if (total == 0) throw EmptyImage("otsu_threshold on an empty histogram");

    int occupied = 0, only = 0;
    std::uint64_t sum_all = 0;
    for (int b = 0; b < 256; ++b) {
        if (hist.bins[b]) {
            ++occupied;
            only = b;
        }
        sum_all += static_cast<std::uint64_t>(b) * hist.bins[b];
    }
    if (occupied == 1) return only;

    // sigma_b^2(t) = (S0 * N - S * n0)^2 / (N^2 * n0 * n1); the N^2 is common to all t.
    const auto N = static_cast<__int128>(total), S = static_cast<__int128>(sum_all);
    const bool exact = total <= (std::uint64_t{1} << 18);

    int best_t = 0;
    __int128 best_num = 0, best_den = 1;
    long double best_val = 0.0L;
    __int128 n0 = 0, s0 = 0;
    for (int t = 0; t < 255; ++t) {
        n0 += hist.bins[t];
        s0 += static_cast<__int128>(t) * hist.bins[t];
        const __int128 n1 = N - n0;
        if (n0 == 0 || n1 == 0) continue;
        const __int128 d = s0 * N - S * n0;
        if (exact) {
            const __int128 num = d * d, den = n0 * n1;
            if (num * best_den > best_num * den) {
                best_num = num;
                best_den = den;
                best_t = t;
            }
        } else {
            const long double dd = static_cast<long double>(d);
            const long double val = dd * dd / (static_cast<long double>(n0) * static_cast<long double>(n1));
            if (val > best_val) {
                best_val = val;
                best_t = t;
            }
        }
    }
    return best_t;
}

BinaryMask binarize(const GrayImage& img, int t, Polarity polarity) {
    BinaryMask m(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const bool dark = quantize(img.data[i]) <= t;
        m.data[i] = (polarity == Polarity::LungsDark ? dark : !dark) ? 1 : 0;
    }
    return m;
}

namespace {

struct DisjointSet {
    std::vector<std::int32_t> parent;

    std::int32_t make() {
        parent.push_back(static_cast<std::int32_t>(parent.size()));
        return parent.back();
    }
    std::int32_t find(std::int32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[b] = a;
        else parent[a] = b;
    }
};

}  // namespace

LabelMap connected_components(const BinaryMask& mask, Connectivity conn) {
    const int W = mask.width, H = mask.height;
    LabelMap out(W, H);
    std::vector<std::int32_t> provisional(mask.size(), -1);
    DisjointSet ds;

    // Already-visited neighbors in raster order.
    const int offsets4[2][2] = {{-1, 0}, {0, -1}};
    const int offsets8[4][2] = {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
    const bool eight = conn == Connectivity::Eight;

    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (!mask.at(x, y)) continue;
            std::int32_t label = -1;
            const int count = eight ? 4 : 2;
            for (int k = 0; k < count; ++k) {
                const int dx = eight ? offsets8[k][0] : offsets4[k][0];
                const int dy = eight ? offsets8[k][1] : offsets4[k][1];
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= W) continue;
                const std::int32_t nl = provisional[static_cast<std::size_t>(ny) * W + nx];
                if (nl < 0) continue;
                if (label < 0) label = nl;
                else ds.unite(label, nl);
            }
            if (label < 0) label = ds.make();
            provisional[static_cast<std::size_t>(y) * W + x] = label;
        }
    }

    std::vector<std::int32_t> final_label(ds.parent.size(), 0);
    std::int32_t next = 0;
    for (std::size_t i = 0; i < provisional.size(); ++i) {
        if (provisional[i] < 0) continue;
        const std::int32_t root = ds.find(provisional[i]);
        if (final_label[root] == 0) final_label[root] = ++next;
        out.labels[i] = final_label[root];
    }
    out.num_labels = next;
    return out;
}

std::vector<std::uint64_t> component_sizes(const LabelMap& labels) {
    std::vector<std::uint64_t> sizes(static_cast<std::size_t>(labels.num_labels) + 1, 0);
    for (auto l : labels.labels) {
        if (l > 0) ++sizes[static_cast<std::size_t>(l)];
    }
    return sizes;
}

std::vector<bool> touches_border(const LabelMap& labels) {
    std::vector<bool> flags(static_cast<std::size_t>(labels.num_labels) + 1, false);
    const int W = labels.width, H = labels.height;
    auto mark = [&](int x, int y) {
        const auto l = labels.at(x, y);
        if (l > 0) flags[static_cast<std::size_t>(l)] = true;
    };
    for (int x = 0; x < W; ++x) {
        mark(x, 0);
        mark(x, H - 1);
    }
    for (int y = 0; y < H; ++y) {
        mark(0, y);
        mark(W - 1, y);
    }
    return flags;
}

BinaryMask fill_holes(const BinaryMask& mask) {
    const int W = mask.width, H = mask.height;
    // Flood the background from the border; whatever background stays unreached is a hole.
    std::vector<std::uint8_t> outside(mask.size(), 0);
    std::vector<std::size_t> stack;
    auto seed = [&](int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * W + x;
        if (!mask.data[i] && !outside[i]) {
            outside[i] = 1;
            stack.push_back(i);
        }
    };
    for (int x = 0; x < W; ++x) {
        seed(x, 0);
        seed(x, H - 1);
    }
    for (int y = 0; y < H; ++y) {
        seed(0, y);
        seed(W - 1, y);
    }
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int x = static_cast<int>(i % W), y = static_cast<int>(i / W);
        if (x > 0) seed(x - 1, y);
        if (x + 1 < W) seed(x + 1, y);
        if (y > 0) seed(x, y - 1);
        if (y + 1 < H) seed(x, y + 1);
    }
    BinaryMask out(W, H);
    for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] = (mask.data[i] || !outside[i]) ? 1 : 0;
    return out;
}

namespace {

std::vector<std::int32_t> kept_labels(const LabelMap& labels, std::size_t keep) {
    const auto sizes = component_sizes(labels);
    const auto border = touches_border(labels);
    std::vector<std::int32_t> candidates;
    for (std::int32_t l = 1; l <= labels.num_labels; ++l) {
        if (!border[static_cast<std::size_t>(l)]) candidates.push_back(l);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::int32_t a, std::int32_t b) {
        return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)];
    });
    if (candidates.size() > keep) candidates.resize(keep);
    return candidates;
}

}  // namespace

BinaryMask select_interior_components(const LabelMap& labels, std::size_t keep, bool fill) {
    BinaryMask out(labels.width, labels.height);
    for (std::int32_t l : kept_labels(labels, keep)) {
        BinaryMask part(labels.width, labels.height);
        for (std::size_t i = 0; i < part.size(); ++i) part.data[i] = labels.labels[i] == l ? 1 : 0;
        if (fill) part = fill_holes(part);
        for (std::size_t i = 0; i < part.size(); ++i) out.data[i] |= part.data[i];
    }
    return out;
}

LabelMap select_interior_labels(const LabelMap& labels, std::size_t keep) {
    auto kept = kept_labels(labels, keep);
    std::sort(kept.begin(), kept.end());
    std::vector<std::int32_t> remap(static_cast<std::size_t>(labels.num_labels) + 1, 0);
    for (std::size_t i = 0; i < kept.size(); ++i) remap[static_cast<std::size_t>(kept[i])] = static_cast<std::int32_t>(i + 1);
    LabelMap out(labels.width, labels.height);
    for (std::size_t i = 0; i < out.labels.size(); ++i) out.labels[i] = remap[static_cast<std::size_t>(labels.labels[i])];
    out.num_labels = static_cast<std::int32_t>(kept.size());
    return out;
}

std::int32_t DistanceMap::max() const noexcept {
    return values.empty() ? 0 : *std::max_element(values.begin(), values.end());
}

DistanceMap distance_transform_l1(const BinaryMask& mask) {
    const int W = mask.width, H = mask.height;
    DistanceMap d{W, H, std::vector<std::int32_t>(mask.size(), 0)};
    const std::int32_t inf = W + H + 2;
    auto v = [&](int x, int y) -> std::int32_t& { return d.values[static_cast<std::size_t>(y) * W + x]; };
    // Out-of-image neighbors are background at distance 0, except across an
    // axis of length 1: a single row or column is a 1-D signal.
    const std::int32_t edge_x = (W == 1 && H > 1) ? inf : 0;
    const std::int32_t edge_y = (H == 1 && W > 1) ? inf : 0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (!mask.at(x, y)) continue;
            const std::int32_t up = y > 0 ? v(x, y - 1) : edge_y;
            const std::int32_t left = x > 0 ? v(x - 1, y) : edge_x;
            v(x, y) = std::min({inf, up + 1, left + 1});
        }
    }
    for (int y = H - 1; y >= 0; --y) {
        for (int x = W - 1; x >= 0; --x) {
            if (!mask.at(x, y)) continue;
            const std::int32_t down = y + 1 < H ? v(x, y + 1) : edge_y;
            const std::int32_t right = x + 1 < W ? v(x + 1, y) : edge_x;
            v(x, y) = std::min({v(x, y), down + 1, right + 1});
        }
    }
    return d;
}

namespace {

BinaryMask erode(const BinaryMask& m) {
    const int W = m.width, H = m.height;
    BinaryMask out(W, H);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const bool keep = m.at(x, y) && x > 0 && m.at(x - 1, y) && x + 1 < W && m.at(x + 1, y) && y > 0 &&
                              m.at(x, y - 1) && y + 1 < H && m.at(x, y + 1);
            out.set(x, y, keep);
        }
    }
    return out;
}

BinaryMask dilate(const BinaryMask& m) {
    const int W = m.width, H = m.height;
    BinaryMask out(W, H);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const bool any = m.at(x, y) || (x > 0 && m.at(x - 1, y)) || (x + 1 < W && m.at(x + 1, y)) ||
                             (y > 0 && m.at(x, y - 1)) || (y + 1 < H && m.at(x, y + 1));
            out.set(x, y, any);
        }
    }
    return out;
}

}  // namespace

BinaryMask morphology(const BinaryMask& mask, MorphOp op) {
    switch (op) {
        case MorphOp::Erode: return erode(mask);
        case MorphOp::Dilate: return dilate(mask);
        case MorphOp::Open: return dilate(erode(mask));
    }
    return mask;
}

BinaryMask cca_lung_pipeline(const GrayImage& img, const PipelineOptions& opts) {
    const int t = otsu_threshold(img);
    const BinaryMask fg = binarize(img, t, Polarity::LungsDark);
    const LabelMap labels = connected_components(fg, opts.lung_connectivity);
    return select_interior_components(labels, opts.keep_components, true);
}

}  // namespace lungseg::classical
