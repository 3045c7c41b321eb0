#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "lungseg/classical.hpp"
#include "lungseg/errors.hpp"
#include "lungseg/metrics.hpp"
#include "lungseg/phantom.hpp"
#include "support/oracles.hpp"

using namespace lungseg;
using namespace lungseg::classical;

namespace {

BinaryMask mask_from(int w, int h, std::initializer_list<int> bits) {
    BinaryMask m(w, h);
    std::size_t i = 0;
    for (int b : bits) m.data[i++] = static_cast<std::uint8_t>(b);
    return m;
}

GrayImage image_from(int w, int h, std::initializer_list<float> values) {
    GrayImage img(w, h);
    std::copy(values.begin(), values.end(), img.data.begin());
    return img;
}

bool touches_edge(const BinaryMask& m) {
    for (int x = 0; x < m.width; ++x) {
        if (m.at(x, 0) || m.at(x, m.height - 1)) return true;
    }
    for (int y = 0; y < m.height; ++y) {
        if (m.at(0, y) || m.at(m.width - 1, y)) return true;
    }
    return false;
}

bool no_component_touches_border(const BinaryMask& m) {
    const auto flags = touches_border(connected_components(m, Connectivity::Eight));
    return std::none_of(flags.begin() + 1, flags.end(), [](bool b) { return b; });
}

std::vector<std::vector<int>> read_label_rows(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::vector<std::vector<int>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::vector<int> row;
        for (int v; ss >> v;) row.push_back(v);
        if (!row.empty()) rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_SUITE("classical") {

TEST_CASE("quantize and histogram") {
    CHECK(quantize(0.0f) == 0);
    CHECK(quantize(0.5f) == 127);
    CHECK(quantize(1.0f) == 255);
    CHECK(quantize(-0.2f) == 0);
    CHECK(quantize(1.7f) == 255);
    SplitMix64 rng(3);
    const GrayImage img = oracle::random_image(rng, 13, 7);
    const Histogram256 h = histogram256(img);
    CHECK(h.total() == img.size());
    for (float v : img.data) CHECK(quantize(v) == oracle::bin_of(v));
}

TEST_CASE("otsu: symmetric bimodal resolves to the smallest threshold") {
    CHECK(otsu_threshold(image_from(6, 1, {0, 0, 0, 1, 1, 1})) == 0);
}

TEST_CASE("otsu: constant image returns its own bin") {
    CHECK(otsu_threshold(GrayImage(5, 5, 0.5f)) == 127);
    CHECK(otsu_threshold(GrayImage(3, 2, 1.0f)) == 255);
    CHECK(otsu_threshold(GrayImage(3, 2, 0.0f)) == 0);
}

TEST_CASE("otsu: empty image raises EmptyImage") {
    CHECK_THROWS_AS(otsu_threshold(GrayImage()), EmptyImage);
    CHECK_THROWS_AS(otsu_threshold(Histogram256{}), EmptyImage);
}

TEST_CASE("otsu matches the exhaustive 256-threshold scan") {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const GrayImage img = oracle::random_image(rng, 16, 16);
        CHECK(otsu_threshold(img) == oracle::otsu_bruteforce(img));
    }
    // few distinct levels produce plateaus, exercising the tie rule
    for (int trial = 0; trial < 100; ++trial) {
        const GrayImage img = oracle::random_levels_image(rng, 16, 16, 2 + trial % 5);
        CHECK(otsu_threshold(img) == oracle::otsu_bruteforce(img));
    }
}

TEST_CASE("binarize examples") {
    const GrayImage img = image_from(2, 1, {0.1f, 0.9f});
    CHECK(binarize(img, 127) == mask_from(2, 1, {1, 0}));
    SplitMix64 rng(8);
    const GrayImage r = oracle::random_image(rng, 9, 9);
    CHECK(binarize(r, 255).count() == r.size());
    for (int t : {0, 64, 127, 200, 255}) {
        CHECK(binarize(r, t, Polarity::LungsBright) == complement(binarize(r, t, Polarity::LungsDark)));
    }
}

TEST_CASE("connected components examples") {
    const BinaryMask two = mask_from(3, 3, {1, 1, 0, 0, 0, 0, 0, 1, 1});
    const LabelMap l = connected_components(two, Connectivity::Four);
    CHECK(l.num_labels == 2);
    const auto sizes = component_sizes(l);
    CHECK(sizes[1] == 2);
    CHECK(sizes[2] == 2);

    const BinaryMask diag = mask_from(3, 3, {1, 0, 1, 0, 1, 0, 1, 0, 1});
    CHECK(connected_components(diag, Connectivity::Four).num_labels == 5);
    CHECK(connected_components(diag, Connectivity::Eight).num_labels == 1);
    CHECK(oracle::flood_components(diag, 4).num_labels == 5);
    CHECK(oracle::flood_components(diag, 8).num_labels == 1);

    CHECK(connected_components(BinaryMask(4, 4), Connectivity::Eight).num_labels == 0);
}

TEST_CASE("connected components match flood fill on random masks") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const BinaryMask m = oracle::random_mask(rng, 16, 16, 0.2 + 0.06 * (trial % 10));
        for (auto [conn, k] : {std::pair{Connectivity::Four, 4}, std::pair{Connectivity::Eight, 8}}) {
            const LabelMap got = connected_components(m, conn);
            const LabelMap want = oracle::flood_components(m, k);
            CHECK(got.num_labels == want.num_labels);
            CHECK(got.labels == want.labels);
        }
    }
}

TEST_CASE("connected components: rotation invariance and connected classes") {
    SplitMix64 rng(91);
    for (int trial = 0; trial < 40; ++trial) {
        const BinaryMask m = oracle::random_mask(rng, 17, 11, 0.45);
        for (auto [conn, k] : {std::pair{Connectivity::Four, 4}, std::pair{Connectivity::Eight, 8}}) {
            const LabelMap l = connected_components(m, conn);
            const LabelMap rot = connected_components(oracle::rotate180(m), conn);
            CHECK(oracle::canonical(oracle::rotate180(rot)).labels == oracle::canonical(l).labels);

            // labels 1..num_labels, each class one component
            std::set<std::int32_t> seen(l.labels.begin(), l.labels.end());
            seen.erase(0);
            CHECK(seen.size() == static_cast<std::size_t>(l.num_labels));
            if (!seen.empty()) CHECK(*seen.rbegin() == l.num_labels);
            for (std::int32_t c = 1; c <= l.num_labels; ++c) {
                BinaryMask cls(m.width, m.height);
                for (std::size_t i = 0; i < m.size(); ++i) cls.data[i] = l.labels[i] == c;
                CHECK(oracle::flood_components(cls, k).num_labels == 1);
            }
        }
    }
}

TEST_CASE("touches_border, fill_holes and interior selection") {
    const BinaryMask ring = mask_from(5, 5, {0, 0, 0, 0, 0,  //
                                             0, 1, 1, 1, 0,  //
                                             0, 1, 0, 1, 0,  //
                                             0, 1, 1, 1, 0,  //
                                             0, 0, 0, 0, 0});
    BinaryMask filled = ring;
    filled.set(2, 2, true);
    CHECK(fill_holes(ring) == filled);
    CHECK(fill_holes(filled) == filled);

    // three interior blobs of sizes 4, 2, 1 and one border blob
    const BinaryMask m = mask_from(7, 6, {1, 1, 0, 0, 0, 0, 0,  //
                                          0, 0, 0, 1, 1, 0, 0,  //
                                          0, 1, 0, 1, 1, 0, 0,  //
                                          0, 0, 0, 0, 0, 0, 0,  //
                                          0, 0, 1, 1, 0, 0, 0,  //
                                          0, 0, 0, 0, 0, 0, 0});
    const LabelMap l = connected_components(m, Connectivity::Eight);
    const auto border = touches_border(l);
    CHECK(border[1]);
    CHECK_FALSE(border[2]);
    const BinaryMask kept = select_interior_components(l, 2, false);
    CHECK(kept.count() == 6);
    CHECK(kept.at(3, 1));
    CHECK(kept.at(2, 4));
    CHECK_FALSE(kept.at(1, 2));
    CHECK_FALSE(kept.at(0, 0));

    const LabelMap kl = select_interior_labels(l, 2);
    CHECK(kl.num_labels == 2);
    CHECK(kl.at(3, 1) == 1);
    CHECK(kl.at(2, 4) == 2);
}

TEST_CASE("distance transform examples") {
    const DistanceMap d = distance_transform_l1(mask_from(5, 1, {0, 1, 1, 1, 0}));
    CHECK(d.values == std::vector<std::int32_t>{0, 1, 2, 1, 0});
    CHECK(distance_transform_l1(BinaryMask(5, 1, true)).values == std::vector<std::int32_t>{1, 2, 3, 2, 1});
    CHECK(distance_transform_l1(BinaryMask(1, 4, true)).values == std::vector<std::int32_t>{1, 2, 2, 1});
    CHECK(distance_transform_l1(BinaryMask(1, 1, true)).values == std::vector<std::int32_t>{1});
    const DistanceMap z = distance_transform_l1(BinaryMask(6, 4));
    CHECK(std::all_of(z.values.begin(), z.values.end(), [](std::int32_t v) { return v == 0; }));
    // outside counts as background
    const DistanceMap full = distance_transform_l1(BinaryMask(5, 5, true));
    CHECK(full.at(0, 0) == 1);
    CHECK(full.at(2, 2) == 3);
    CHECK(full.max() == 3);
}

TEST_CASE("distance transform matches brute force and is 1-Lipschitz") {
    SplitMix64 rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const BinaryMask m = oracle::random_mask(rng, 16, 16, 0.5 + 0.04 * (trial % 10));
        const DistanceMap d = distance_transform_l1(m);
        CHECK(d.values == oracle::distance_bruteforce(m));
        const BinaryMask row = oracle::random_mask(rng, trial % 3 == 1 ? 1 : 16, trial % 3 == 0 ? 1 : 7, 0.7);
        CHECK(distance_transform_l1(row).values == oracle::distance_bruteforce(row));
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                if (x + 1 < 16) CHECK(std::abs(d.at(x, y) - d.at(x + 1, y)) <= 1);
                if (y + 1 < 16) CHECK(std::abs(d.at(x, y) - d.at(x, y + 1)) <= 1);
            }
        }
    }
}

TEST_CASE("morphology examples") {
    BinaryMask dot(5, 5);
    dot.set(2, 2, true);
    CHECK(morphology(dot, MorphOp::Erode).count() == 0);
    const BinaryMask cross = morphology(dot, MorphOp::Dilate);
    CHECK(cross.count() == 5);
    for (auto [x, y] : {std::pair{2, 2}, {1, 2}, {3, 2}, {2, 1}, {2, 3}}) CHECK(cross.at(x, y));
    CHECK(morphology(dot, MorphOp::Open).count() == 0);
    CHECK(morphology(cross, MorphOp::Open) == cross);

    // erosion treats outside as background; dilation ignores it
    const BinaryMask full(4, 4, true);
    CHECK(morphology(full, MorphOp::Erode).count() == 4);
    CHECK(morphology(full, MorphOp::Dilate) == full);
}

TEST_CASE("morphology duality away from the border") {
    SplitMix64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const BinaryMask m = oracle::random_mask(rng, 16, 16, 0.5);
        const BinaryMask a = morphology(m, MorphOp::Dilate);
        const BinaryMask b = complement(morphology(complement(m), MorphOp::Erode));
        for (int y = 1; y < 15; ++y) {
            for (int x = 1; x < 15; ++x) CHECK(a.at(x, y) == b.at(x, y));
        }
    }
}

TEST_CASE("watershed: single marker floods everything") {
    SplitMix64 rng(6);
    const GrayImage elev = oracle::random_image(rng, 9, 7);
    LabelMap markers(9, 7);
    markers.at(4, 3) = 1;
    markers.num_labels = 1;
    const LabelMap out = watershed(elev, markers);
    CHECK(std::all_of(out.labels.begin(), out.labels.end(), [](std::int32_t v) { return v == 1; }));
}

TEST_CASE("watershed: 3x5 ridge matches the golden labeling") {
    GrayImage elev(5, 3);
    LabelMap markers(5, 3);
    const float row[5] = {0, 1, 5, 1, 0};
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 5; ++x) elev.at(x, y) = row[x];
        markers.at(0, y) = 1;
        markers.at(4, y) = 2;
    }
    markers.num_labels = 2;
    const LabelMap out = watershed(elev, markers);
    const auto golden = read_label_rows(LUNGSEG_GOLDEN_DIR "/watershed_3x5.txt");
    REQUIRE(golden.size() == 3);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 5; ++x) CHECK(out.at(x, y) == golden[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]);
    }
    CHECK(oracle::flood_watershed(elev, markers).labels == out.labels);
}

TEST_CASE("watershed errors") {
    CHECK_THROWS_AS(watershed(GrayImage(3, 3), LabelMap(3, 3)), NoMarkers);
    LabelMap m(4, 3);
    m.at(0, 0) = 1;
    m.num_labels = 1;
    CHECK_THROWS_AS(watershed(GrayImage(3, 3), m), DimMismatch);
}

TEST_CASE("watershed partition properties on random inputs") {
    SplitMix64 rng(555);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 8 + static_cast<int>(rng.next() % 12), h = 8 + static_cast<int>(rng.next() % 12);
        const GrayImage elev = trial % 2 ? oracle::random_image(rng, w, h) : oracle::random_levels_image(rng, w, h, 4);
        LabelMap markers(w, h);
        const int k = 1 + static_cast<int>(rng.next() % 5);
        for (int c = 1; c <= k; ++c) {
            const int n = 1 + static_cast<int>(rng.next() % 3);
            for (int j = 0; j < n; ++j) {
                markers.at(static_cast<int>(rng.next() % static_cast<std::uint64_t>(w)),
                           static_cast<int>(rng.next() % static_cast<std::uint64_t>(h))) = c;
            }
        }
        markers.num_labels = k;
        std::set<std::int32_t> marker_labels(markers.labels.begin(), markers.labels.end());
        marker_labels.erase(0);

        const LabelMap out = watershed(elev, markers);
        std::set<std::int32_t> out_labels(out.labels.begin(), out.labels.end());
        CHECK(out_labels.count(0) == 0);
        CHECK(std::includes(marker_labels.begin(), marker_labels.end(), out_labels.begin(), out_labels.end()));
        CHECK(out_labels.size() <= marker_labels.size());
        for (std::size_t i = 0; i < out.labels.size(); ++i) {
            if (markers.labels[i] > 0) CHECK(out.labels[i] == markers.labels[i]);
        }
        CHECK(out.labels == oracle::flood_watershed(elev, markers).labels);
    }
}

TEST_CASE("cca pipeline recovers phantom lungs") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const Phantom p = generate_phantom(seed);
        const BinaryMask m = cca_lung_pipeline(p.image);
        INFO("seed " << seed);
        CHECK(metrics::dice(m, p.truth) >= 0.9);
        CHECK(no_component_touches_border(m));
    }
}

TEST_CASE("cca pipeline: all-bright image gives an empty mask") {
    CHECK(cca_lung_pipeline(GrayImage(32, 32, 0.9f)).count() == 0);
    CHECK(watershed_lung_pipeline(GrayImage(32, 32, 0.9f)).count() == 0);
}

TEST_CASE("cca pipeline discards a dark frame touching the border") {
    GrayImage img(32, 32, 0.1f);
    for (int y = 6; y < 26; ++y) {
        for (int x = 6; x < 26; ++x) img.at(x, y) = 0.9f;
    }
    CHECK(cca_lung_pipeline(img).count() == 0);

    // a dark blob inside the bright center survives, the frame does not
    for (int y = 12; y < 18; ++y) {
        for (int x = 12; x < 18; ++x) img.at(x, y) = 0.1f;
    }
    const BinaryMask m = cca_lung_pipeline(img);
    CHECK(m.count() == 36);
    CHECK(m.at(14, 14));
    CHECK_FALSE(touches_edge(m));
}

TEST_CASE("watershed pipeline recovers phantom lungs") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const Phantom p = generate_phantom(seed);
        const BinaryMask m = watershed_lung_pipeline(p.image);
        INFO("seed " << seed);
        CHECK(metrics::dice(m, p.truth) >= 0.9);
        CHECK(no_component_touches_border(m));
    }
}

TEST_CASE("watershed separates lungs joined by a thin bridge") {
    const std::vector<Ellipse> lungs{{40, 64, 25, 44}, {88, 64, 25, 44}};
    for (std::uint64_t seed : {1, 2, 3}) {
        const Phantom p = render_phantom(lungs, PhantomConfig{}, seed);
        REQUIRE(connected_components(p.truth, Connectivity::Eight).num_labels == 1);
        const LabelMap r = watershed_lung_regions(p.image);
        REQUIRE(r.num_labels == 2);
        // each region lies almost entirely on one side of the midline
        std::array<std::array<int, 2>, 3> side{};
        for (int y = 0; y < r.height; ++y) {
            for (int x = 0; x < r.width; ++x) {
                if (r.at(x, y) > 0) ++side[static_cast<std::size_t>(r.at(x, y))][x < 64 ? 0 : 1];
            }
        }
        const int major1 = side[1][0] > side[1][1] ? 0 : 1, major2 = side[2][0] > side[2][1] ? 0 : 1;
        CHECK(major1 != major2);
        for (int l = 1; l <= 2; ++l) {
            const auto& s = side[static_cast<std::size_t>(l)];
            CHECK(std::max(s[0], s[1]) >= 0.98 * (s[0] + s[1]));
        }
    }
}

TEST_CASE("pipeline outputs never touch the border") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const GrayImage img = trial % 2 ? oracle::random_image(rng, 24, 24) : generate_phantom(100 + trial).image;
        CHECK(no_component_touches_border(cca_lung_pipeline(img)));
        CHECK(no_component_touches_border(watershed_lung_pipeline(img)));
    }
}

}  // TEST_SUITE
