#include "diffss/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace diffss::kernels {

namespace {

inline std::uint8_t luma_u8(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
}

inline double luma_d(const std::uint8_t* px) {
    return (299.0 * px[0] + 587.0 * px[1] + 114.0 * px[2]) / 1000.0;
}

inline int clamp_idx(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline std::uint8_t round_u8(double v) {
    long r = std::lround(v);
    return static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
}

// Shared bilinear sample position convention (half-pixel centers).
inline void bilinear_coeffs(int dst, int dst_size, int src_size, int& i0, int& i1, double& w1) {
    double pos = (dst + 0.5) * static_cast<double>(src_size) / dst_size - 0.5;
    if (pos < 0) pos = 0;
    if (pos > src_size - 1) pos = src_size - 1;
    i0 = static_cast<int>(pos);
    i1 = std::min(i0 + 1, src_size - 1);
    w1 = pos - i0;
}

inline double cosine_or_zero(const double* v, const double* p, double p_norm, int n) {
    double dot = 0.0, v2 = 0.0;
    for (int c = 0; c < n; ++c) {
        dot += v[c] * p[c];
        v2 += v[c] * v[c];
    }
    if (v2 == 0.0 || p_norm == 0.0) return 0.0;
    return dot / (std::sqrt(v2) * p_norm);
}

inline double vec_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

GrayImage luma(const ColorImage& img) {
    require_valid(img, "luma");
    GrayImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        const std::uint8_t* px = img.rgb.data() + i * 3;
        out.values[i] = luma_u8(px[0], px[1], px[2]);
    }
    return out;
}

GrayImage gradient_magnitude(const GrayImage& img) {
    require_valid(img, "gradient_magnitude");
    GrayImage out(img.width, img.height);
    const int w = img.width, h = img.height;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx = (img.at(clamp_idx(x + 1, 0, w - 1), y) - img.at(clamp_idx(x - 1, 0, w - 1), y)) / 2.0;
            double gy = (img.at(x, clamp_idx(y + 1, 0, h - 1)) - img.at(x, clamp_idx(y - 1, 0, h - 1))) / 2.0;
            out.at(x, y) = round_u8(std::sqrt(gx * gx + gy * gy));
        }
    }
    return out;
}

GrayImage mask_filter(const GrayImage& img, const BinaryMask& mask) {
    require_valid(img, "mask_filter");
    require_valid(mask, "mask_filter");
    require_same_dims(img.width, img.height, mask.width, mask.height, "mask_filter");
    GrayImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        out.values[i] = mask.values[i] ? img.values[i] : 0;
    return out;
}

GrayImage threshold_binary(const GrayImage& img, std::uint8_t threshold) {
    require_valid(img, "threshold_binary");
    GrayImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        out.values[i] = img.values[i] >= threshold ? 255 : 0;
    return out;
}

ColorImage paint_two_tone(const BinaryMask& mask, Rgb fg, Rgb bg) {
    require_valid(mask, "paint_two_tone");
    ColorImage out(mask.width, mask.height);
    const std::size_t n = mask.pixel_count();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        const Rgb& c = mask.values[i] ? fg : bg;
        out.rgb[i * 3] = c[0];
        out.rgb[i * 3 + 1] = c[1];
        out.rgb[i * 3 + 2] = c[2];
    }
    return out;
}

ColorImage resize_bilinear(const ColorImage& img, int new_width, int new_height) {
    require_valid(img, "resize_bilinear");
    if (new_width <= 0 || new_height <= 0)
        throw std::invalid_argument("resize_bilinear: target dimensions must be positive");
    if (new_width == img.width && new_height == img.height) return img;
    ColorImage out(new_width, new_height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < new_height; ++y) {
        int y0, y1;
        double wy;
        bilinear_coeffs(y, new_height, img.height, y0, y1, wy);
        for (int x = 0; x < new_width; ++x) {
            int x0, x1;
            double wx;
            bilinear_coeffs(x, new_width, img.width, x0, x1, wx);
            Rgb p00 = img.at(x0, y0), p10 = img.at(x1, y0), p01 = img.at(x0, y1), p11 = img.at(x1, y1);
            Rgb o;
            for (int c = 0; c < 3; ++c) {
                double top = p00[c] * (1.0 - wx) + p10[c] * wx;
                double bot = p01[c] * (1.0 - wx) + p11[c] * wx;
                o[c] = round_u8(top * (1.0 - wy) + bot * wy);
            }
            out.set(x, y, o);
        }
    }
    return out;
}

GrayImage resize_bilinear(const GrayImage& img, int new_width, int new_height) {
    require_valid(img, "resize_bilinear");
    if (new_width <= 0 || new_height <= 0)
        throw std::invalid_argument("resize_bilinear: target dimensions must be positive");
    if (new_width == img.width && new_height == img.height) return img;
    GrayImage out(new_width, new_height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < new_height; ++y) {
        int y0, y1;
        double wy;
        bilinear_coeffs(y, new_height, img.height, y0, y1, wy);
        for (int x = 0; x < new_width; ++x) {
            int x0, x1;
            double wx;
            bilinear_coeffs(x, new_width, img.width, x0, x1, wx);
            double top = img.at(x0, y0) * (1.0 - wx) + img.at(x1, y0) * wx;
            double bot = img.at(x0, y1) * (1.0 - wx) + img.at(x1, y1) * wx;
            out.at(x, y) = round_u8(top * (1.0 - wy) + bot * wy);
        }
    }
    return out;
}

FeatureMap extract_features(const ColorImage& img) {
    require_valid(img, "extract_features");
    const int w = img.width, h = img.height;
    FeatureMap fm;
    fm.width = w;
    fm.height = h;
    fm.channels = kFeatureChannels;
    fm.values.resize(static_cast<std::size_t>(w) * h * kFeatureChannels);

    std::vector<double> lum(static_cast<std::size_t>(w) * h);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(lum.size()); ++i)
        lum[i] = luma_d(img.rgb.data() + i * 3);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double* f = fm.at(x, y);
            Rgb px = img.at(x, y);
            f[0] = px[0];
            f[1] = px[1];
            f[2] = px[2];
            auto L = [&](int xx, int yy) {
                return lum[static_cast<std::size_t>(clamp_idx(yy, 0, h - 1)) * w + clamp_idx(xx, 0, w - 1)];
            };
            double gx = (L(x + 1, y) - L(x - 1, y)) / 2.0;
            double gy = (L(x, y + 1) - L(x, y - 1)) / 2.0;
            f[3] = std::sqrt(gx * gx + gy * gy);
            double sum = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) sum += L(x + dx, y + dy);
            double mean = sum / 9.0;
            double var = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    double d = L(x + dx, y + dy) - mean;
                    var += d * d;
                }
            f[4] = mean;
            f[5] = var / 9.0;
        }
    }
    return fm;
}

std::vector<double> masked_mean(const FeatureMap& features, const BinaryMask& mask) {
    require_valid(mask, "masked_mean");
    require_same_dims(features.width, features.height, mask.width, mask.height, "masked_mean");
    const int w = features.width, h = features.height, C = features.channels;

    // Row partials combined in row order: bit-stable for any thread count.
    std::vector<double> row_sums(static_cast<std::size_t>(h) * C, 0.0);
    std::vector<long long> row_counts(h, 0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        double* rs = row_sums.data() + static_cast<std::size_t>(y) * C;
        long long cnt = 0;
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            const double* f = features.at(x, y);
            for (int c = 0; c < C; ++c) rs[c] += f[c];
            ++cnt;
        }
        row_counts[y] = cnt;
    }

    std::vector<double> total(C, 0.0);
    long long count = 0;
    for (int y = 0; y < h; ++y) {
        const double* rs = row_sums.data() + static_cast<std::size_t>(y) * C;
        for (int c = 0; c < C; ++c) total[c] += rs[c];
        count += row_counts[y];
    }
    if (count == 0) throw std::invalid_argument("masked_mean: mask has no foreground pixels");
    for (int c = 0; c < C; ++c) total[c] /= static_cast<double>(count);
    return total;
}

CosinePrediction cosine_predict(const FeatureMap& features, const std::vector<double>& fg,
                                const std::vector<double>& bg) {
    if (static_cast<int>(fg.size()) != features.channels ||
        static_cast<int>(bg.size()) != features.channels)
        throw std::invalid_argument("cosine_predict: prototype channel count mismatch");
    const int w = features.width, h = features.height, C = features.channels;
    CosinePrediction pred;
    pred.mask = BinaryMask(w, h);
    pred.scores.resize(static_cast<std::size_t>(w) * h);
    const double fg_norm = vec_norm(fg);
    const double bg_norm = vec_norm(bg);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double* f = features.at(x, y);
            double cf = cosine_or_zero(f, fg.data(), fg_norm, C);
            double cb = cosine_or_zero(f, bg.data(), bg_norm, C);
            std::size_t i = static_cast<std::size_t>(y) * w + x;
            pred.mask.values[i] = cf > cb ? 1 : 0;
            pred.scores[i] = (cf - cb + 2.0) / 4.0;
        }
    }
    return pred;
}

std::pair<long long, long long> iou_counts(const BinaryMask& a, const BinaryMask& b) {
    require_valid(a, "iou_counts");
    require_valid(b, "iou_counts");
    require_same_dims(a.width, a.height, b.width, b.height, "iou_counts");
    long long inter = 0, uni = 0;
    const long long n = static_cast<long long>(a.pixel_count());
#pragma omp parallel for schedule(static) reduction(+ : inter, uni)
    for (long long i = 0; i < n; ++i) {
        inter += a.values[i] & b.values[i];
        uni += a.values[i] | b.values[i];
    }
    return {inter, uni};
}

// ---------------------------------------------------------------------------
// Serial reference implementations. Plain loops, kept independent of the
// parallel versions above so the equivalence tests and the benchmark have a
// baseline to compare against.
// ---------------------------------------------------------------------------

namespace serial {

GrayImage luma(const ColorImage& img) {
    require_valid(img, "luma");
    GrayImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const std::uint8_t* px = img.rgb.data() + i * 3;
        out.values[i] = static_cast<std::uint8_t>((299 * px[0] + 587 * px[1] + 114 * px[2] + 500) / 1000);
    }
    return out;
}

GrayImage gradient_magnitude(const GrayImage& img) {
    require_valid(img, "gradient_magnitude");
    GrayImage out(img.width, img.height);
    const int w = img.width, h = img.height;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int xm = x > 0 ? x - 1 : 0, xp = x < w - 1 ? x + 1 : w - 1;
            int ym = y > 0 ? y - 1 : 0, yp = y < h - 1 ? y + 1 : h - 1;
            double gx = (img.at(xp, y) - img.at(xm, y)) / 2.0;
            double gy = (img.at(x, yp) - img.at(x, ym)) / 2.0;
            long v = std::lround(std::sqrt(gx * gx + gy * gy));
            out.at(x, y) = static_cast<std::uint8_t>(v > 255 ? 255 : v);
        }
    }
    return out;
}

GrayImage mask_filter(const GrayImage& img, const BinaryMask& mask) {
    require_valid(img, "mask_filter");
    require_valid(mask, "mask_filter");
    require_same_dims(img.width, img.height, mask.width, mask.height, "mask_filter");
    GrayImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        out.values[i] = static_cast<std::uint8_t>(img.values[i] * mask.values[i]);
    return out;
}

GrayImage threshold_binary(const GrayImage& img, std::uint8_t threshold) {
    require_valid(img, "threshold_binary");
    GrayImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        out.values[i] = img.values[i] >= threshold ? 255 : 0;
    return out;
}

ColorImage paint_two_tone(const BinaryMask& mask, Rgb fg, Rgb bg) {
    require_valid(mask, "paint_two_tone");
    ColorImage out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) out.set(x, y, mask.at(x, y) ? fg : bg);
    return out;
}

ColorImage resize_bilinear(const ColorImage& img, int new_width, int new_height) {
    require_valid(img, "resize_bilinear");
    if (new_width <= 0 || new_height <= 0)
        throw std::invalid_argument("resize_bilinear: target dimensions must be positive");
    if (new_width == img.width && new_height == img.height) return img;
    ColorImage out(new_width, new_height);
    for (int y = 0; y < new_height; ++y) {
        for (int x = 0; x < new_width; ++x) {
            double sy = (y + 0.5) * static_cast<double>(img.height) / new_height - 0.5;
            double sx = (x + 0.5) * static_cast<double>(img.width) / new_width - 0.5;
            sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
            sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
            int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
            int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
            double wy = sy - y0, wx = sx - x0;
            Rgb o;
            for (int c = 0; c < 3; ++c) {
                double top = img.at(x0, y0)[c] * (1.0 - wx) + img.at(x1, y0)[c] * wx;
                double bot = img.at(x0, y1)[c] * (1.0 - wx) + img.at(x1, y1)[c] * wx;
                long v = std::lround(top * (1.0 - wy) + bot * wy);
                o[c] = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
            }
            out.set(x, y, o);
        }
    }
    return out;
}

FeatureMap extract_features(const ColorImage& img) {
    require_valid(img, "extract_features");
    const int w = img.width, h = img.height;
    FeatureMap fm;
    fm.width = w;
    fm.height = h;
    fm.channels = kFeatureChannels;
    fm.values.resize(static_cast<std::size_t>(w) * h * kFeatureChannels);
    auto L = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        Rgb px = img.at(x, y);
        return (299.0 * px[0] + 587.0 * px[1] + 114.0 * px[2]) / 1000.0;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double* f = fm.at(x, y);
            Rgb px = img.at(x, y);
            f[0] = px[0];
            f[1] = px[1];
            f[2] = px[2];
            double gx = (L(x + 1, y) - L(x - 1, y)) / 2.0;
            double gy = (L(x, y + 1) - L(x, y - 1)) / 2.0;
            f[3] = std::sqrt(gx * gx + gy * gy);
            double sum = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) sum += L(x + dx, y + dy);
            double mean = sum / 9.0;
            double var = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    double d = L(x + dx, y + dy) - mean;
                    var += d * d;
                }
            f[4] = mean;
            f[5] = var / 9.0;
        }
    }
    return fm;
}

std::vector<double> masked_mean(const FeatureMap& features, const BinaryMask& mask) {
    require_valid(mask, "masked_mean");
    require_same_dims(features.width, features.height, mask.width, mask.height, "masked_mean");
    const int C = features.channels;
    // Per-row partials combined in row order, matching the parallel version's
    // summation grouping exactly; a single flat chain would round differently.
    std::vector<double> sum(C, 0.0);
    std::vector<double> row(C, 0.0);
    long long count = 0;
    for (int y = 0; y < features.height; ++y) {
        std::fill(row.begin(), row.end(), 0.0);
        for (int x = 0; x < features.width; ++x) {
            if (!mask.at(x, y)) continue;
            const double* f = features.at(x, y);
            for (int c = 0; c < C; ++c) row[c] += f[c];
            ++count;
        }
        for (int c = 0; c < C; ++c) sum[c] += row[c];
    }
    if (count == 0) throw std::invalid_argument("masked_mean: mask has no foreground pixels");
    for (int c = 0; c < C; ++c) sum[c] /= static_cast<double>(count);
    return sum;
}

CosinePrediction cosine_predict(const FeatureMap& features, const std::vector<double>& fg,
                                const std::vector<double>& bg) {
    if (static_cast<int>(fg.size()) != features.channels ||
        static_cast<int>(bg.size()) != features.channels)
        throw std::invalid_argument("cosine_predict: prototype channel count mismatch");
    const int w = features.width, h = features.height, C = features.channels;
    CosinePrediction pred;
    pred.mask = BinaryMask(w, h);
    pred.scores.resize(static_cast<std::size_t>(w) * h);
    double fg2 = 0.0, bg2 = 0.0;
    for (int c = 0; c < C; ++c) {
        fg2 += fg[c] * fg[c];
        bg2 += bg[c] * bg[c];
    }
    const double fg_norm = std::sqrt(fg2), bg_norm = std::sqrt(bg2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double* f = features.at(x, y);
            double dot_f = 0.0, dot_b = 0.0, v2 = 0.0;
            for (int c = 0; c < C; ++c) {
                dot_f += f[c] * fg[c];
                dot_b += f[c] * bg[c];
                v2 += f[c] * f[c];
            }
            double cf = (v2 == 0.0 || fg_norm == 0.0) ? 0.0 : dot_f / (std::sqrt(v2) * fg_norm);
            double cb = (v2 == 0.0 || bg_norm == 0.0) ? 0.0 : dot_b / (std::sqrt(v2) * bg_norm);
            std::size_t i = static_cast<std::size_t>(y) * w + x;
            pred.mask.values[i] = cf > cb ? 1 : 0;
            pred.scores[i] = (cf - cb + 2.0) / 4.0;
        }
    }
    return pred;
}

std::pair<long long, long long> iou_counts(const BinaryMask& a, const BinaryMask& b) {
    require_valid(a, "iou_counts");
    require_valid(b, "iou_counts");
    require_same_dims(a.width, a.height, b.width, b.height, "iou_counts");
    long long inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        if (a.values[i] && b.values[i]) ++inter;
        if (a.values[i] || b.values[i]) ++uni;
    }
    return {inter, uni};
}

}  // namespace serial

}  // namespace diffss::kernels
