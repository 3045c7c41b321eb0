#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lungseg/errors.hpp"
#include "lungseg/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace lungseg;
using namespace lungseg::metrics;

namespace {

BinaryMask row_mask(std::initializer_list<int> bits) {
    BinaryMask m(static_cast<int>(bits.size()), 1);
    std::size_t i = 0;
    for (int b : bits) m.data[i++] = static_cast<std::uint8_t>(b);
    return m;
}

PairScore score(double iou, double dice) {
    PairScore s;
    s.iou = iou;
    s.dice = dice;
    return s;
}

std::vector<TableRow> table1_rows() {
    return {{"Connected Component Analysis", 42.6, 46.2},
            {"Watershed Algorithm", 52.8, 59.7},
            {"U-Net Model", 78.4, 82.7}};
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("confusion examples") {
    SplitMix64 rng(1);
    const BinaryMask a = oracle::random_mask(rng, 10, 10, 0.3);
    const std::uint64_t k = a.count();
    CHECK(confusion(a, a) == Confusion{k, 0, 0, 100 - k});
    CHECK(confusion(BinaryMask(10, 10, true), BinaryMask(10, 10)) == Confusion{0, 100, 0, 0});
    CHECK(confusion(row_mask({1, 1, 0, 0}), row_mask({1, 0, 1, 0})) == Confusion{1, 1, 1, 1});
    CHECK_THROWS_AS(confusion(BinaryMask(3, 2), BinaryMask(2, 3)), DimMismatch);
}

TEST_CASE("dice and iou examples") {
    const BinaryMask p = row_mask({1, 1, 0, 0}), t = row_mask({1, 0, 1, 0});
    CHECK(dice(p, t) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(iou(p, t) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(dice(p, p) == 1.0);
    CHECK(iou(p, p) == 1.0);
    CHECK_THROWS_AS(dice(BinaryMask(3, 2), BinaryMask(2, 3)), DimMismatch);
    CHECK_THROWS_AS(iou(BinaryMask(3, 2), BinaryMask(2, 3)), DimMismatch);
}

TEST_CASE("empty-mask conventions") {
    const BinaryMask empty(5, 5), some = row_mask({0, 1, 0, 0, 0});
    CHECK(dice(empty, empty) == 1.0);
    CHECK(iou(empty, empty) == 1.0);
    const BinaryMask some5 = [] {
        BinaryMask m(5, 5);
        m.set(1, 0, true);
        return m;
    }();
    CHECK(dice(empty, some5) == 0.0);
    CHECK(dice(some5, empty) == 0.0);
    CHECK(iou(empty, some5) == 0.0);
    CHECK(iou(some5, empty) == 0.0);
    CHECK(dice(some, some) == 1.0);
}

TEST_CASE("metric identities over random mask pairs") {
    SplitMix64 rng(2718);
    for (int trial = 0; trial < 200; ++trial) {
        const double pa = 0.05 + 0.9 * rng.uniform(0.0, 1.0), pb = 0.05 + 0.9 * rng.uniform(0.0, 1.0);
        const BinaryMask a = oracle::random_mask(rng, 16, 16, pa), b = oracle::random_mask(rng, 16, 16, pb);
        const Confusion c = confusion(a, b);
        CHECK(c.tp + c.fp + c.fn + c.tn == a.size());
        const double d = dice(a, b), j = iou(a, b);
        if (2 * c.tp + c.fp + c.fn > 0) {
            CHECK(d == doctest::Approx(2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn)).epsilon(1e-15));
        }
        CHECK(std::abs(j - d / (2.0 - d)) <= 1e-12);
        CHECK(0.0 <= j);
        CHECK(j <= d);
        CHECK(d <= 1.0);
        CHECK(dice(b, a) == d);
        CHECK(iou(b, a) == j);
        if (a.count() > 0) {
            CHECK(dice(a, a) == 1.0);
            CHECK(iou(a, a) == 1.0);
        }
    }
}

TEST_CASE("score_pair carries counts and both metrics") {
    const PairScore s = score_pair("x1", row_mask({1, 1, 0, 0}), row_mask({1, 0, 1, 0}));
    CHECK(s.entry_id == "x1");
    CHECK(s.counts == Confusion{1, 1, 1, 1});
    CHECK(s.dice == doctest::Approx(0.5));
    CHECK(s.iou == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("aggregate examples") {
    const MethodReport one = aggregate(Method::UNet, {score(0.5, 0.6)});
    CHECK(one.mean_iou_pct == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(one.mean_dice_pct == doctest::Approx(60.0).epsilon(1e-12));
    const MethodReport two = aggregate(Method::CCA, {score(1.0, 1.0), score(0.0, 0.0)});
    CHECK(two.mean_iou_pct == 50.0);
    CHECK(two.mean_dice_pct == 50.0);
    CHECK(two.scores.size() == 2);
    CHECK_THROWS_AS(aggregate(Method::CCA, {}), EmptyScores);
}

TEST_CASE("aggregate is 100x the mean and permutation invariant") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<PairScore> s;
        const std::size_t n = 1 + rng.next() % 40;
        double si = 0.0, sd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = rng.uniform(0.0, 1.0);
            s.push_back(score(d / (2.0 - d), d));
            si += d / (2.0 - d);
            sd += d;
        }
        const MethodReport r = aggregate(Method::Watershed, s);
        CHECK(std::abs(r.mean_iou_pct - 100.0 * si / static_cast<double>(n)) <= 1e-9);
        CHECK(std::abs(r.mean_dice_pct - 100.0 * sd / static_cast<double>(n)) <= 1e-9);
        std::reverse(s.begin(), s.end());
        seeded_shuffle(s, rng.next());
        const MethodReport p = aggregate(Method::Watershed, s);
        CHECK(std::abs(p.mean_iou_pct - r.mean_iou_pct) <= 1e-9);
        CHECK(std::abs(p.mean_dice_pct - r.mean_dice_pct) <= 1e-9);
    }
}

TEST_CASE("method keys and names") {
    for (Method m : {Method::CCA, Method::Watershed, Method::UNet}) CHECK(parse_method(method_key(m)) == m);
    CHECK(method_key(Method::Watershed) == "watershed");
    CHECK(method_display_name(Method::UNet) == "U-Net Model");
    CHECK_THROWS_AS(parse_method("otsu"), UsageError);
}

TEST_CASE("comparison table reproduces the golden markdown") {
    const std::string golden = fixture::read_text(LUNGSEG_GOLDEN_DIR "/table1.md");
    CHECK(render_comparison_table(table1_rows()) == golden);

    std::vector<MethodReport> reports(3);
    reports[0].method = Method::CCA;
    reports[0].mean_iou_pct = 42.6;
    reports[0].mean_dice_pct = 46.2;
    reports[1].method = Method::Watershed;
    reports[1].mean_iou_pct = 52.8;
    reports[1].mean_dice_pct = 59.7;
    reports[2].method = Method::UNet;
    reports[2].mean_iou_pct = 78.4;
    reports[2].mean_dice_pct = 82.7;
    CHECK(render_comparison_table(reports) == golden);
}

TEST_CASE("comparison table with one row and rounding") {
    CHECK(render_comparison_table(std::vector<TableRow>{{"Watershed Algorithm", 52.84, 59.66}}) ==
          "| Name of Approach | IoU Metric | DICE Score |\n|:---:|:---:|:---:|\n| Watershed Algorithm | 52.8 | 59.7 |\n");
}

TEST_CASE("csv outputs") {
    std::vector<MethodReport> reports{aggregate(Method::CCA, {score_pair("a", row_mask({1, 1, 0, 0}), row_mask({1, 0, 1, 0}))}),
                                      aggregate(Method::UNet, {score_pair("a", row_mask({1, 0}), row_mask({1, 0}))})};
    fixture::TempDir dir("metrics-csv");
    write_scores_csv(reports, dir / "scores.csv");
    write_summary_csv(reports, dir / "summary.csv");
    CHECK(fixture::read_text(dir / "scores.csv") ==
          "method,entry_id,iou,dice,tp,fp,fn,tn\n"
          "cca,a,0.33333333333333331,0.5,1,1,1,1\n"
          "unet,a,1,1,1,0,0,1\n");
    CHECK(fixture::read_text(dir / "summary.csv") ==
          "method,mean_iou_pct,mean_dice_pct,n_images\n"
          "cca,33.333333333333329,50,1\n"
          "unet,100,100,1\n");
}

}  // TEST_SUITE
