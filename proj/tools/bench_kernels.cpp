#include <benchmark/benchmark.h>

#include "diffss/common.hpp"
#include "diffss/kernels.hpp"

// Serial reference vs OpenMP entry points on a synthetic 1024x1024 image.
// Run with --benchmark_filter=... to narrow; thread count follows
// OMP_NUM_THREADS.

namespace {

using namespace diffss;

constexpr int kSide = 1024;

ColorImage make_image() {
    Rng rng(7);
    ColorImage img(kSide, kSide);
    for (std::uint8_t& b : img.rgb) b = static_cast<std::uint8_t>(rng.next_below(256));
    return img;
}

BinaryMask make_mask() {
    Rng rng(11);
    BinaryMask mask(kSide, kSide);
    for (std::uint8_t& v : mask.values) v = rng.next_below(4) == 0 ? 1 : 0;
    return mask;
}

const ColorImage& image() {
    static const ColorImage img = make_image();
    return img;
}

const BinaryMask& mask() {
    static const BinaryMask m = make_mask();
    return m;
}

const GrayImage& gray() {
    static const GrayImage g = kernels::serial::luma(image());
    return g;
}

const FeatureMap& features() {
    static const FeatureMap f = kernels::serial::extract_features(image());
    return f;
}

std::vector<double> make_prototype(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> p(kernels::kFeatureChannels);
    for (double& v : p) v = rng.next_signed();
    return p;
}

void bm_luma_serial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::luma(image()));
}
void bm_luma_parallel(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::luma(image()));
}

void bm_gradient_serial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::gradient_magnitude(gray()));
}
void bm_gradient_parallel(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::gradient_magnitude(gray()));
}

void bm_resize_serial(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::serial::resize_bilinear(image(), 640, 480));
}
void bm_resize_parallel(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::resize_bilinear(image(), 640, 480));
}

void bm_features_serial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::extract_features(image()));
}
void bm_features_parallel(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::extract_features(image()));
}

void bm_masked_mean_serial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::masked_mean(features(), mask()));
}
void bm_masked_mean_parallel(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(kernels::masked_mean(features(), mask()));
}

void bm_cosine_serial(benchmark::State& state) {
    std::vector<double> fg = make_prototype(3), bg = make_prototype(5);
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::serial::cosine_predict(features(), fg, bg));
}
void bm_cosine_parallel(benchmark::State& state) {
    std::vector<double> fg = make_prototype(3), bg = make_prototype(5);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::cosine_predict(features(), fg, bg));
}

void bm_iou_serial(benchmark::State& state) {
    BinaryMask other = mask();
    other.values[0] ^= 1;
    for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::iou_counts(mask(), other));
}
void bm_iou_parallel(benchmark::State& state) {
    BinaryMask other = mask();
    other.values[0] ^= 1;
    for (auto _ : state) benchmark::DoNotOptimize(kernels::iou_counts(mask(), other));
}

BENCHMARK(bm_luma_serial);
BENCHMARK(bm_luma_parallel);
BENCHMARK(bm_gradient_serial);
BENCHMARK(bm_gradient_parallel);
BENCHMARK(bm_resize_serial);
BENCHMARK(bm_resize_parallel);
BENCHMARK(bm_features_serial);
BENCHMARK(bm_features_parallel);
BENCHMARK(bm_masked_mean_serial);
BENCHMARK(bm_masked_mean_parallel);
BENCHMARK(bm_cosine_serial);
BENCHMARK(bm_cosine_parallel);
BENCHMARK(bm_iou_serial);
BENCHMARK(bm_iou_parallel);

}  // namespace

BENCHMARK_MAIN();
