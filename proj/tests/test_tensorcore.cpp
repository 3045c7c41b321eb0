#include <doctest.h>

#include <cmath>
#include <limits>

#include "lungseg/errors.hpp"
#include "lungseg/gradcheck.hpp"
#include "lungseg/layers.hpp"
#include "lungseg/losses.hpp"
#include "lungseg/optim.hpp"
#include "support/gradient_checks.hpp"
#include "support/oracles.hpp"

using namespace lungseg;
using namespace lungseg::nn;

namespace {

TensorD t3x3() { return TensorD(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}); }

TensorD zeros_bias(std::size_t c) { return TensorD(Shape{c, 1, 1, 1}); }

}  // namespace

TEST_SUITE("tensorcore") {

TEST_CASE("conv2d: delta kernel with padding 1 is the identity") {
    TensorD k(Shape{1, 1, 3, 3});
    k.at(0, 0, 1, 1) = 1;
    CHECK(conv2d(t3x3(), k, zeros_bias(1), 1).data == t3x3().data);

    SplitMix64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = oracle::random_tensor<double>(rng, Shape{2, 1, 1 + rng.below(9), 1 + rng.below(9)});
        CHECK(conv2d(x, k, zeros_bias(1), 1).data == x.data);
    }
}

TEST_CASE("conv2d: all-ones kernel sums the padded neighborhood") {
    const TensorD k(Shape{1, 1, 3, 3}, 1.0);
    const TensorD y = conv2d(t3x3(), k, zeros_bias(1), 1);
    CHECK(y.at(0, 0, 0, 0) == 12.0);
    CHECK(y.at(0, 0, 1, 1) == 45.0);
    CHECK(y.data == oracle::conv2d_loops(t3x3(), k, zeros_bias(1), 1).data);
}

TEST_CASE("conv2d: 1x1 kernel is pointwise affine") {
    SplitMix64 rng(2);
    const auto x = oracle::random_tensor<double>(rng, Shape{2, 1, 5, 4});
    const TensorD y = conv2d(x, TensorD(Shape{1, 1, 1, 1}, 2.0), TensorD(Shape{1, 1, 1, 1}, 1.0), 0);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data[i] == 2 * x.data[i] + 1);
}

TEST_CASE("conv2d: output size law and nested-loop agreement") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t c = 1 + rng.below(4), o = 1 + rng.below(5), h = 1 + rng.below(12), w = 1 + rng.below(12);
        const std::size_t k = rng.below(2) ? 3 : 1;
        const int pad = k == 3 ? static_cast<int>(rng.below(2)) : 0;
        if (h + 2 * pad < k || w + 2 * pad < k) continue;
        const auto x = oracle::random_tensor<double>(rng, Shape{1 + rng.below(2), c, h, w});
        const auto wt = oracle::random_tensor<double>(rng, Shape{o, c, k, k});
        const auto b = oracle::random_tensor<double>(rng, Shape{o, 1, 1, 1});
        const TensorD y = conv2d(x, wt, b, pad);
        const TensorD ref = oracle::conv2d_loops(x, wt, b, pad);
        REQUIRE(y.shape == ref.shape);
        CHECK(y.shape.h == h + 2 * pad - k + 1);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d: larger maps in float agree with the loop oracle") {
    SplitMix64 rng(4);
    const auto x = oracle::random_tensor<float>(rng, Shape{2, 8, 40, 40});
    const auto wt = oracle::random_tensor<float>(rng, Shape{16, 8, 3, 3}, -0.2, 0.2);
    const auto b = oracle::random_tensor<float>(rng, Shape{16, 1, 1, 1});
    const auto y = conv2d(x, wt, b, 1);
    const auto ref = oracle::conv2d_loops(x, wt, b, 1);
    double worst = 0;
    for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(double(y.data[i]) - ref.data[i]));
    CHECK(worst < 1e-4);
}

TEST_CASE("conv2d: channel mismatch raises ShapeMismatch") {
    CHECK_THROWS_AS(conv2d(TensorD(Shape{1, 2, 4, 4}), TensorD(Shape{1, 3, 3, 3}), zeros_bias(1), 1), ShapeMismatch);
    CHECK_THROWS_AS(conv2d(TensorD(Shape{1, 2, 4, 4}), TensorD(Shape{1, 2, 3, 3}), zeros_bias(2), 1), ShapeMismatch);
}

TEST_CASE("conv2d is bitwise deterministic") {
    SplitMix64 rng(5);
    const auto x = oracle::random_tensor<float>(rng, Shape{2, 4, 32, 32});
    const auto wt = oracle::random_tensor<float>(rng, Shape{8, 4, 3, 3});
    const auto b = oracle::random_tensor<float>(rng, Shape{8, 1, 1, 1});
    CHECK(conv2d(x, wt, b, 1).data == conv2d(x, wt, b, 1).data);
}

TEST_CASE("conv_transpose2d: a single pixel broadcasts into its 2x2 block") {
    const TensorD y = conv_transpose2d(TensorD(Shape{1, 1, 1, 1}, 3.0), TensorD(Shape{1, 1, 2, 2}, 1.0));
    CHECK(y.shape == Shape{1, 1, 2, 2});
    CHECK(y.data == std::vector<double>{3, 3, 3, 3});
}

TEST_CASE("conv_transpose2d: top-left kernel places inputs at even coordinates") {
    const TensorD x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    const TensorD k(Shape{1, 1, 2, 2}, {1, 0, 0, 0});
    const TensorD y = conv_transpose2d(x, k);
    REQUIRE(y.shape == Shape{1, 1, 4, 4});
    const std::vector<double> expect{1, 0, 2, 0, 0, 0, 0, 0, 3, 0, 4, 0, 0, 0, 0, 0};
    CHECK(y.data == expect);
    CHECK(y.data == oracle::conv_transpose_scatter(x, k).data);
}

TEST_CASE("conv_transpose2d: doubles H and W and matches the scatter oracle") {
    SplitMix64 rng(6);
    for (int trial = 0; trial < 25; ++trial) {
        const Shape s{1 + rng.below(2), 1 + rng.below(4), 1 + rng.below(9), 1 + rng.below(9)};
        const auto x = oracle::random_tensor<double>(rng, s);
        const auto k = oracle::random_tensor<double>(rng, Shape{s.c, 1 + rng.below(4), 2, 2});
        const TensorD y = conv_transpose2d(x, k);
        CHECK(y.shape == Shape{s.n, k.shape.c, 2 * s.h, 2 * s.w});
        const TensorD ref = oracle::conv_transpose_scatter(x, k);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(conv_transpose2d(TensorD(Shape{1, 2, 2, 2}), TensorD(Shape{3, 1, 2, 2})), ShapeMismatch);
}

TEST_CASE("maxpool2d: block maximum, first-element ties, odd sizes") {
    const auto r = maxpool2d(TensorD(Shape{1, 1, 2, 2}, {1, 2, 3, 4}));
    CHECK(r.output.data == std::vector<double>{4});
    CHECK(r.argmax == std::vector<std::uint32_t>{3});

    const Shape s{1, 2, 4, 6};
    const auto flat = maxpool2d(TensorD(s, 0.5));
    CHECK(std::all_of(flat.output.data.begin(), flat.output.data.end(), [](double v) { return v == 0.5; }));
    const TensorD g = maxpool2d_backward(TensorD(flat.output.shape, 1.0), flat.argmax, s);
    const TensorD x0(s);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 6; ++x) CHECK(g.at(0, c, y, x) == ((y % 2 == 0 && x % 2 == 0) ? 1.0 : 0.0));

    CHECK_THROWS_AS(maxpool2d(TensorD(Shape{1, 1, 3, 4})), OddDimension);
    CHECK_THROWS_AS(maxpool2d(TensorD(Shape{1, 1, 4, 5})), OddDimension);
}

TEST_CASE("maxpool2d matches a brute-force per-window maximum") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Shape s{1 + rng.below(2), 1 + rng.below(3), 2 * (1 + rng.below(5)), 2 * (1 + rng.below(5))};
        const auto x = oracle::random_tensor<double>(rng, s);
        CHECK(maxpool2d(x).output.data == oracle::maxpool_blocks(x).data);
    }
}

TEST_CASE("relu and sigmoid values") {
    const TensorD x(Shape{1, 1, 1, 3}, {-1, 0, 2});
    CHECK(relu(x).data == std::vector<double>{0, 0, 2});
    const TensorD g = relu_backward(x, TensorD(x.shape, 1.0));
    CHECK(g.data == std::vector<double>{0, 0, 1});
    CHECK(sigmoid(TensorD(Shape{1, 1, 1, 1}, 0.0)).data[0] == 0.5);
    CHECK(sigmoid(TensorD(Shape{1, 1, 1, 1}, std::log(3.0))).data[0] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("sigmoid stays strictly inside (0, 1) at extreme inputs") {
    for (double v : {-1e4, -800.0, -100.0, -30.0, 30.0, 100.0, 800.0, 1e4}) {
        const double sd = sigmoid(TensorD(Shape{1, 1, 1, 1}, v)).data[0];
        CHECK(sd > 0.0);
        CHECK(sd < 1.0);
        const float sf = sigmoid(TensorF(Shape{1, 1, 1, 1}, static_cast<float>(v))).data[0];
        CHECK(sf > 0.0f);
        CHECK(sf < 1.0f);
    }
}

TEST_CASE("concat_channels: shape law, round trip, spatial mismatch") {
    SplitMix64 rng(8);
    const auto a = oracle::random_tensor<double>(rng, Shape{1, 4, 16, 16});
    const auto b = oracle::random_tensor<double>(rng, Shape{1, 4, 16, 16});
    const TensorD ab = concat_channels(a, b);
    CHECK(ab.shape == Shape{1, 8, 16, 16});
    CHECK(ab.data == oracle::concat_loops(a, b).data);
    CHECK(slice_channels(ab, 0, 4).data == a.data);
    CHECK(slice_channels(ab, 4, 4).data == b.data);
    const auto [ga, gb] = split_channels(ab, 4);
    CHECK(ga.data == a.data);
    CHECK(gb.data == b.data);

    const auto c = oracle::random_tensor<double>(rng, Shape{2, 3, 5, 7});
    const auto d = oracle::random_tensor<double>(rng, Shape{2, 1, 5, 7});
    const TensorD cd = concat_channels(c, d);
    CHECK(slice_channels(cd, 0, 3).data == c.data);
    CHECK(slice_channels(cd, 3, 1).data == d.data);

    CHECK_THROWS_AS(concat_channels(TensorD(Shape{1, 1, 4, 4}), TensorD(Shape{1, 1, 5, 4})), SpatialMismatch);
    CHECK_THROWS_AS(concat_channels(TensorD(Shape{1, 1, 4, 4}), TensorD(Shape{2, 1, 4, 4})), SpatialMismatch);
}

TEST_CASE("bce_loss values") {
    SplitMix64 rng(9);
    auto target = oracle::random_tensor<double>(rng, Shape{2, 1, 3, 3});
    for (auto& v : target.data) v = v > 0 ? 1 : 0;
    CHECK(bce_loss(TensorD(target.shape, 0.5), target) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(target, target) == doctest::Approx(-std::log(1 - kBceEpsilon)).epsilon(1e-9));
    CHECK(bce_loss(TensorD(Shape{1, 1, 1, 1}, 0.9), TensorD(Shape{1, 1, 1, 1}, 1.0)) ==
          doctest::Approx(0.105360515657826).epsilon(1e-12));
    CHECK_THROWS_AS(bce_loss(TensorD(Shape{1, 1, 1, 2}), TensorD(Shape{1, 1, 2, 1})), ShapeMismatch);
}

TEST_CASE("bce_loss stays finite for predictions at and beyond the clamp") {
    const TensorD pred(Shape{1, 1, 1, 4}, {0.0, 1.0, -3.0, 7.0});
    const TensorD target(Shape{1, 1, 1, 4}, {1.0, 0.0, 1.0, 0.0});
    const double l = bce_loss(pred, target);
    CHECK(std::isfinite(l));
    CHECK(l == doctest::Approx(-std::log(kBceEpsilon)).epsilon(1e-9));
    const TensorD g = bce_loss_backward(pred, target);
    for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("soft_dice_loss values") {
    CHECK(soft_dice_loss(TensorD(Shape{1, 1, 2, 2}, 1.0), TensorD(Shape{1, 1, 2, 2}, 1.0)) == 0.0);
    CHECK(soft_dice_loss(TensorD(Shape{1, 1, 2, 2}), TensorD(Shape{1, 1, 2, 2})) == 0.0);
    CHECK(soft_dice_loss(TensorD(Shape{1, 1, 1, 2}, {1, 0}), TensorD(Shape{1, 1, 1, 2}, {0, 1})) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    // Per-item average: a perfect item and the 2/3 item above.
    const TensorD p(Shape{2, 1, 1, 2}, {1, 1, 1, 0}), y(Shape{2, 1, 1, 2}, {1, 1, 0, 1});
    CHECK(soft_dice_loss(p, y) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(soft_dice_loss(TensorD(Shape{1, 1, 1, 2}), TensorD(Shape{1, 1, 1, 3})), ShapeMismatch);
}

TEST_CASE("mixed_loss blends BCE and soft Dice") {
    SplitMix64 rng(10);
    auto pred = oracle::random_tensor<double>(rng, Shape{2, 1, 4, 4}, 0.05, 0.95);
    auto target = oracle::random_tensor<double>(rng, Shape{2, 1, 4, 4});
    for (auto& v : target.data) v = v > 0 ? 1 : 0;
    const auto m = mixed_loss(pred, target, 0.3);
    CHECK(m.value == doctest::Approx(0.3 * bce_loss(pred, target) + 0.7 * soft_dice_loss(pred, target)).epsilon(1e-12));
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
    Parameter<double> p("w", Shape{1, 1, 2, 2});
    p.value.data = {1, -2, 3, 0.5};
    const auto before = p.value.data;
    adam_step(p);
    CHECK(p.value.data == before);
    CHECK(p.step_count == 1);
}

TEST_CASE("adam: first step on unit gradient moves by the learning rate") {
    Parameter<double> p("w", Shape{1, 1, 1, 1});
    p.grad.data = {1.0};
    adam_step(p, {0.001});
    CHECK(p.value.data[0] == doctest::Approx(-0.001).epsilon(1e-6));
}

TEST_CASE("adam matches a reference implementation over several steps") {
    SplitMix64 rng(12);
    Parameter<double> p("w", Shape{1, 1, 1, 5});
    std::vector<double> theta(5), m(5, 0), v(5, 0);
    for (std::size_t i = 0; i < 5; ++i) p.value.data[i] = theta[i] = rng.uniform(-1, 1);
    const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
    for (int t = 1; t <= 7; ++t) {
        for (std::size_t i = 0; i < 5; ++i) {
            const double g = rng.uniform(-2, 2);
            p.grad.data[i] = g;
            m[i] = 0.9 * m[i] + 0.1 * g;
            v[i] = 0.999 * v[i] + 0.001 * g * g;
            const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
            theta[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
        adam_step(p, cfg);
    }
    for (std::size_t i = 0; i < 5; ++i) CHECK(p.value.data[i] == doctest::Approx(theta[i]).epsilon(1e-12));
    CHECK(p.step_count == 7);
}

TEST_CASE("adam: identical state snapshots give identical updates") {
    Parameter<float> a("w", Shape{1, 1, 1, 3});
    a.value.data = {0.1f, 0.2f, 0.3f};
    a.grad.data = {0.5f, -0.5f, 1.5f};
    adam_step(a);
    Parameter<float> b = a;
    adam_step(a);
    adam_step(b);
    CHECK(a.value.data == b.value.data);
    CHECK(a.adam_v.data == b.adam_v.data);
}

TEST_CASE("adam: an unsized gradient raises MissingGradient") {
    Parameter<float> p("w", Shape{1, 1, 1, 3});
    p.grad = TensorF();
    CHECK_THROWS_AS(adam_step(p), MissingGradient);
}

TEST_CASE("grad_check on theta squared") {
    TensorD theta(Shape{1, 1, 1, 1}, 3.0);
    const TensorD analytic(Shape{1, 1, 1, 1}, 6.0);
    const auto r = grad_check({&theta}, {&analytic}, [&] { return theta.data[0] * theta.data[0]; });
    CHECK(r.coordinates == 1);
    CHECK(r.max_rel_error < 1e-9);
    CHECK(theta.data[0] == 3.0);
    CHECK(relative_error(0.0, 0.0) == 0.0);
    CHECK(relative_error(1.0, 3.0) == doctest::Approx(0.5));
}

TEST_CASE("conv2d followed by sigmoid and BCE on an 8x8 input") {
    const double err = gradcheck::conv_bce_pipeline(1);
    CHECK(err < 1e-4);
}

TEST_CASE("every layer agrees with central differences over 20 seeds") {
    for (const auto& layer : gradcheck::layer_checks()) {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) worst = std::max(worst, layer.run(seed));
        INFO(layer.name);
        CHECK(worst < 1e-4);
    }
}

}  // TEST_SUITE
