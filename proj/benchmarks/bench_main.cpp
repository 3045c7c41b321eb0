#include <benchmark/benchmark.h>

#include "lungseg/classical.hpp"
#include "lungseg/layers.hpp"
#include "lungseg/losses.hpp"
#include "lungseg/optim.hpp"
#include "lungseg/phantom.hpp"
#include "lungseg/rng.hpp"
#include "lungseg/unet.hpp"

namespace {

using lungseg::SplitMix64;
using lungseg::nn::Shape;
using lungseg::nn::Tensor;

Tensor<float> random_tensor(SplitMix64& rng, Shape s) {
    Tensor<float> t(s);
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

// args: channels in, channels out, spatial side
void BM_Conv2dForward(benchmark::State& state) {
    SplitMix64 rng(1);
    const auto ci = static_cast<std::size_t>(state.range(0)), co = static_cast<std::size_t>(state.range(1)),
               s = static_cast<std::size_t>(state.range(2));
    const auto x = random_tensor(rng, {4, ci, s, s});
    const auto w = random_tensor(rng, {co, ci, 3, 3});
    const auto b = random_tensor(rng, {co, 1, 1, 1});
    for (auto _ : state) benchmark::DoNotOptimize(lungseg::nn::conv2d(x, w, b, 1));
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv2dForward)->Args({1, 8, 128})->Args({8, 8, 128})->Args({32, 64, 16})->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
    SplitMix64 rng(2);
    const auto ci = static_cast<std::size_t>(state.range(0)), co = static_cast<std::size_t>(state.range(1)),
               s = static_cast<std::size_t>(state.range(2));
    const auto x = random_tensor(rng, {4, ci, s, s});
    const auto w = random_tensor(rng, {co, ci, 3, 3});
    const auto g = random_tensor(rng, {4, co, s, s});
    for (auto _ : state) benchmark::DoNotOptimize(lungseg::nn::conv2d_backward(x, w, g, 1));
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv2dBackward)->Args({1, 8, 128})->Args({8, 8, 128})->Args({32, 64, 16})->Unit(benchmark::kMicrosecond);

// One optimizer step on a batch of 4 phantoms; arg is the input side.
void BM_UNetTrainStep(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    lungseg::UNetConfig cfg;
    cfg.input_size = side;
    lungseg::Model model(cfg, 42);
    lungseg::PhantomConfig pc;
    pc.size = side;
    std::vector<lungseg::Phantom> ph;
    for (std::uint64_t i = 0; i < 4; ++i) ph.push_back(lungseg::generate_phantom(i, pc));
    std::vector<const lungseg::GrayImage*> imgs;
    std::vector<const lungseg::BinaryMask*> masks;
    for (const auto& p : ph) {
        imgs.push_back(&p.image);
        masks.push_back(&p.truth);
    }
    const auto x = lungseg::images_to_tensor<float>(imgs);
    const auto y = lungseg::masks_to_tensor<float>(masks);
    lungseg::nn::UNet<float>::Cache cache;
    for (auto _ : state) {
        model.zero_grad();
        const auto out = model.forward(x, cache);
        const auto loss = lungseg::nn::mixed_loss(out, y, 0.5);
        model.backward(cache, loss.grad);
        for (auto& p : model.parameters()) lungseg::nn::adam_step(p);
        benchmark::DoNotOptimize(loss.value);
    }
    state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_UNetTrainStep)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_UNetInference(benchmark::State& state) {
    lungseg::UNetConfig cfg;
    const lungseg::Model model(cfg, 42);
    lungseg::PhantomConfig pc;
    const lungseg::Phantom p = lungseg::generate_phantom(1, pc);
    for (auto _ : state) benchmark::DoNotOptimize(lungseg::predict_mask(model, p.image));
}
BENCHMARK(BM_UNetInference)->Unit(benchmark::kMillisecond);

void BM_CcaPipeline(benchmark::State& state) {
    lungseg::PhantomConfig pc;
    pc.size = static_cast<int>(state.range(0));
    const lungseg::Phantom p = lungseg::generate_phantom(3, pc);
    for (auto _ : state) benchmark::DoNotOptimize(lungseg::classical::cca_lung_pipeline(p.image));
}
BENCHMARK(BM_CcaPipeline)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_WatershedPipeline(benchmark::State& state) {
    lungseg::PhantomConfig pc;
    pc.size = static_cast<int>(state.range(0));
    const lungseg::Phantom p = lungseg::generate_phantom(3, pc);
    for (auto _ : state) benchmark::DoNotOptimize(lungseg::classical::watershed_lung_pipeline(p.image));
}
BENCHMARK(BM_WatershedPipeline)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
