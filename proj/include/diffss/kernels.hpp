#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "diffss/featuremap.hpp"
#include "diffss/image.hpp"

// Pixel-level compute core. The default entry points are OpenMP-parallel;
// diffss::kernels::serial holds plain-loop reference implementations that the
// tests check the parallel versions against and the benchmark compares.
//
// All parallel kernels are deterministic independent of thread count: per-pixel
// kernels are pure, floating-point reductions accumulate per-row partials that
// are combined in row order, and integer reductions are associative.
namespace diffss::kernels {

// Integer Rec.601 luma: (299 R + 587 G + 114 B + 500) / 1000.
GrayImage luma(const ColorImage& img);

// Gradient magnitude of halved 3x3 central differences with replicated
// borders, rounded to nearest and clamped to [0,255].
GrayImage gradient_magnitude(const GrayImage& img);

// out(x) = value(x) where mask(x)=1, else 0.
GrayImage mask_filter(const GrayImage& img, const BinaryMask& mask);

// out(x) = 255 if value(x) >= threshold, else 0.
GrayImage threshold_binary(const GrayImage& img, std::uint8_t threshold);

// fg color where mask=1, bg color elsewhere.
ColorImage paint_two_tone(const BinaryMask& mask, Rgb fg, Rgb bg);

// Half-pixel-center bilinear resampling, rounded to nearest.
ColorImage resize_bilinear(const ColorImage& img, int new_width, int new_height);
GrayImage resize_bilinear(const GrayImage& img, int new_width, int new_height);

// Six channels per pixel: R, G, B, luma gradient magnitude, 3x3 window mean
// of luma, 3x3 window population variance of luma. Luma here is the exact
// double 0.299R + 0.587G + 0.114B (no rounding); borders replicate.
inline constexpr int kFeatureChannels = 6;
FeatureMap extract_features(const ColorImage& img);

// Mean feature vector over mask=1 pixels. Throws on an empty mask.
std::vector<double> masked_mean(const FeatureMap& features, const BinaryMask& mask);

struct CosinePrediction {
    BinaryMask mask;
    std::vector<double> scores;  // (cos_fg - cos_bg + 2) / 4, in [0,1]
};

// Per pixel: foreground iff cosine(feature, fg) > cosine(feature, bg); ties go
// to background. Cosine against a zero vector is defined as 0.
CosinePrediction cosine_predict(const FeatureMap& features, const std::vector<double>& fg,
                                const std::vector<double>& bg);

// (intersection, union) pixel counts of two same-sized masks.
std::pair<long long, long long> iou_counts(const BinaryMask& a, const BinaryMask& b);

namespace serial {

GrayImage luma(const ColorImage& img);
GrayImage gradient_magnitude(const GrayImage& img);
GrayImage mask_filter(const GrayImage& img, const BinaryMask& mask);
GrayImage threshold_binary(const GrayImage& img, std::uint8_t threshold);
ColorImage paint_two_tone(const BinaryMask& mask, Rgb fg, Rgb bg);
ColorImage resize_bilinear(const ColorImage& img, int new_width, int new_height);
FeatureMap extract_features(const ColorImage& img);
std::vector<double> masked_mean(const FeatureMap& features, const BinaryMask& mask);
CosinePrediction cosine_predict(const FeatureMap& features, const std::vector<double>& fg,
                                const std::vector<double>& bg);
std::pair<long long, long long> iou_counts(const BinaryMask& a, const BinaryMask& b);

}  // namespace serial

}  // namespace diffss::kernels
