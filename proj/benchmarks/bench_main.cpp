#include <benchmark/benchmark.h>

#include <random>

#include "egoseg/flow.hpp"
#include "egoseg/gmm.hpp"
#include "egoseg/mincut.hpp"
#include "egoseg/propagator.hpp"
#include "egoseg/segmenter.hpp"
#include "synthetic.hpp"

using namespace egoseg;
namespace syn = egoseg::testing;

namespace {

Frame noisy_disk(int w, int h, double dx = 0.0) {
    const auto truth = syn::disk_mask(w, h, w / 2.0 + dx, h / 2.0, h / 6.0);
    Frame f = syn::paint(truth, syn::disk_red, syn::backdrop_blue);
    std::mt19937_64 rng(1);
    syn::add_noise(f, 8.0, rng);
    return f;
}

SeedPolygon box_around(int w, int h) {
    const int r = h / 4;
    return SeedPolygon{{{w / 2 - r, h / 2 - r}, {w / 2 + r, h / 2 - r}, {w / 2 + r, h / 2 + r}, {w / 2 - r, h / 2 + r}}};
}

void BM_MincutSolve(benchmark::State& state) {
    const int w = int(state.range(0)), h = w * 3 / 4;
    const Frame f = noisy_disk(w, h);
    const auto seed = rasterize(box_around(w, h), w, h);
    gmm::FitOptions o;
    const auto fg = gmm::fit(gmm::samples(f, seed, true), o), bg = gmm::fit(gmm::samples(f, seed, false), o);
    const auto graph = segmenter::build_graph(f, fg, bg, segmenter::Options{});
    for (auto _ : state) benchmark::DoNotOptimize(mincut::solve(graph));
    state.SetItemsProcessed(state.iterations() * w * h);
}
BENCHMARK(BM_MincutSolve)->Arg(160)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);

void BM_GmmFit(benchmark::State& state) {
    const Frame f = noisy_disk(640, 480);
    const auto all = BinaryMask(640, 480, true);
    const auto pixels = gmm::samples(f, all, true);
    gmm::FitOptions o;
    o.modes = int(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(gmm::fit(pixels, o));
}
BENCHMARK(BM_GmmFit)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_SegmentFromSeed(benchmark::State& state) {
    const int w = int(state.range(0)), h = w * 3 / 4;
    const Frame f = noisy_disk(w, h);
    const auto seed = box_around(w, h);
    for (auto _ : state) benchmark::DoNotOptimize(segmenter::segment_from_seed(f, seed));
}
BENCHMARK(BM_SegmentFromSeed)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);

void BM_HornSchunck(benchmark::State& state) {
    const auto a = syn::texture(256, 256), b = syn::texture(256, 256, 1.0, 0.0);
    flow::FlowParams p;
    p.pyramid_levels = int(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(flow::compute_flow(a, b, p));
}
BENCHMARK(BM_HornSchunck)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_PredictNext(benchmark::State& state) {
    const Frame a = noisy_disk(400, 200), b = noisy_disk(400, 200, 3.0);
    const auto prev = segmenter::segment_from_seed(a, box_around(400, 200));
    for (auto _ : state) benchmark::DoNotOptimize(propagator::predict_next(a, b, prev, 0, {15.0, 200, 3}, {}));
}
BENCHMARK(BM_PredictNext)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
