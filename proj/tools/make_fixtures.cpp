#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "diffss/common.hpp"
#include "diffss/conditions.hpp"
#include "diffss/episodes.hpp"
#include "diffss/png_io.hpp"

// Regenerates the committed test data under tests/data (or argv[1]). Every
// pixel comes from the pinned Rng, so reruns rewrite identical bytes.
//
//   condset/         12 images + masks across 3 classes, mixed sizes
//   condset_golden/  their control conditions under the default config
//   trend/           2 classes x 24 images, 64x64, for trend experiments

namespace fs = std::filesystem;
using namespace diffss;

namespace {

Rgb random_color(Rng& rng, int lo, int hi) {
    auto c = [&] { return static_cast<std::uint8_t>(lo + rng.next_below(hi - lo + 1)); };
    return {c(), c(), c()};
}

// One strong, one weak, one free channel, in a random order. Foregrounds and
// backgrounds drawn from this shared palette collide in hue often enough that
// single-support background prototypes are unreliable, which is the failure
// mode background-diversifying augmentation repairs.
Rgb saturated_color(Rng& rng) {
    int hi = 170 + static_cast<int>(rng.next_below(70));
    int lo = static_cast<int>(rng.next_below(45));
    int mid = static_cast<int>(rng.next_below(170));
    int v[3] = {0, 0, 0};
    switch (rng.next_below(6)) {
        case 0: v[0] = hi, v[1] = mid, v[2] = lo; break;
        case 1: v[0] = hi, v[1] = lo, v[2] = mid; break;
        case 2: v[0] = mid, v[1] = hi, v[2] = lo; break;
        case 3: v[0] = lo, v[1] = hi, v[2] = mid; break;
        case 4: v[0] = mid, v[1] = lo, v[2] = hi; break;
        default: v[0] = lo, v[1] = mid, v[2] = hi; break;
    }
    return {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
            static_cast<std::uint8_t>(v[2])};
}

ColorImage gradient_background(int w, int h, Rng& rng, bool palette) {
    Rgb c0 = palette ? saturated_color(rng) : random_color(rng, 0, 255);
    Rgb c1 = palette ? saturated_color(rng) : random_color(rng, 0, 255);
    bool vertical = rng.next_below(2) == 1;
    ColorImage img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int pos = vertical ? y : x;
            int span = vertical ? h : w;
            double t = span > 1 ? static_cast<double>(pos) / (span - 1) : 0.0;
            Rgb c;
            for (int ch = 0; ch < 3; ++ch)
                c[ch] = static_cast<std::uint8_t>(std::lround(c0[ch] + (c1[ch] - c0[ch]) * t));
            img.set(x, y, c);
        }
    }
    return img;
}

BinaryMask ellipse_mask(int w, int h, int cx, int cy, int rx, int ry) {
    BinaryMask mask(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double dx = static_cast<double>(x - cx) / rx;
            double dy = static_cast<double>(y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0) mask.at(x, y) = 1;
        }
    return mask;
}

// Diagonal two-tone stripes, period 4. Strong contrast on both axes keeps
// the in-mask gradient magnitude above the scribble threshold.
void paint_striped(ColorImage& img, const BinaryMask& mask, Rgb bright, Rgb dark) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (mask.at(x, y)) img.set(x, y, (x + y) % 4 < 2 ? dark : bright);
}

void paint_speckled(ColorImage& img, const BinaryMask& mask, Rgb base, double amplitude,
                    Rng& rng) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (!mask.at(x, y)) continue;
            Rgb c;
            for (int ch = 0; ch < 3; ++ch) {
                double v = base[ch] + rng.next_signed() * amplitude;
                c[ch] = static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, v))));
            }
            img.set(x, y, c);
        }
}

struct Sample {
    std::string id;
    int class_index = 0;
    std::string class_name;
    ColorImage image;
    BinaryMask mask;
};

enum class Texture { striped, speckled };

struct SampleStyle {
    Texture texture = Texture::striped;
    bool palette_colors = false;
    double speckle_amplitude = 45.0;
};

Sample make_sample(const std::string& id, int class_index, const std::string& class_name, int w,
                   int h, const SampleStyle& style, std::uint64_t seed) {
    Rng rng(seed);
    Sample s;
    s.id = id;
    s.class_index = class_index;
    s.class_name = class_name;
    s.image = gradient_background(w, h, rng, style.palette_colors);
    int jx = static_cast<int>(rng.next_below(11)) - 5;
    int jy = static_cast<int>(rng.next_below(11)) - 5;
    int rmax = std::min(w, h) / 3;
    int rx = rmax / 2 + static_cast<int>(rng.next_below(rmax / 2 + 1));
    int ry = rmax / 2 + static_cast<int>(rng.next_below(rmax / 2 + 1));
    s.mask = ellipse_mask(w, h, w / 2 + jx, h / 2 + jy, rx, ry);
    if (style.texture == Texture::striped) {
        // Diagonal boundaries see gradient magnitude deltaLuma/sqrt(2), so the
        // stripe luma contrast must stay above 128*sqrt(2) ~ 181 for scribbles
        // to survive thresholding on every image.
        Rgb bright = random_color(rng, 225, 250);
        Rgb dark;
        for (int ch = 0; ch < 3; ++ch) dark[ch] = static_cast<std::uint8_t>(bright[ch] / 10);
        paint_striped(s.image, s.mask, bright, dark);
    } else {
        Rgb base = style.palette_colors ? saturated_color(rng) : random_color(rng, 40, 215);
        paint_speckled(s.image, s.mask, base, style.speckle_amplitude, rng);
    }
    return s;
}

void write_set(const fs::path& dir, const std::vector<Sample>& samples) {
    Manifest manifest;
    manifest.root = dir;
    for (const Sample& s : samples) {
        write_png(dir / "images" / (s.id + ".png"), s.image);
        write_png(dir / "masks" / (s.id + ".png"), s.mask);
        ManifestRecord rec;
        rec.id = s.id;
        rec.image_path = "images/" + s.id + ".png";
        rec.mask_path = "masks/" + s.id + ".png";
        rec.class_indices = {s.class_index};
        rec.class_names = {s.class_name};
        rec.size_buckets = {"unknown"};
        manifest.records.push_back(std::move(rec));
    }
    save_manifest(manifest, dir / "manifest.jsonl");
    std::printf("%s: %zu samples\n", dir.string().c_str(), samples.size());
}

std::string two_digits(int n) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d", n);
    return buf;
}

std::vector<Sample> make_condset() {
    const int widths[4] = {48, 64, 57, 64};
    const int heights[4] = {64, 48, 43, 64};
    const char* names[3] = {"kettle", "lamp", "chair"};
    std::vector<Sample> samples;
    for (int i = 0; i < 12; ++i) {
        int cls = i / 4 + 1;
        samples.push_back(make_sample("img" + two_digits(i + 1), cls, names[cls - 1],
                                      widths[i % 4], heights[i % 4], SampleStyle{},
                                      mix_seed(4200, static_cast<std::uint64_t>(i))));
    }
    return samples;
}

std::vector<Sample> make_trend() {
    SampleStyle style{Texture::speckled, true, 45.0};
    std::vector<Sample> samples;
    for (int i = 0; i < 24; ++i)
        samples.push_back(make_sample("a" + two_digits(i + 1), 1, "pebble", 64, 64, style,
                                      mix_seed(7300, static_cast<std::uint64_t>(100 + i))));
    for (int i = 0; i < 24; ++i)
        samples.push_back(make_sample("b" + two_digits(i + 1), 2, "fabric", 64, 64, style,
                                      mix_seed(7300, static_cast<std::uint64_t>(200 + i))));
    return samples;
}

void write_goldens(const fs::path& dir, const std::vector<Sample>& samples) {
    FallbackEdgeDetector detector;
    Palette palette;
    ConditionConfig cfg;
    int count = 0;
    for (const Sample& s : samples) {
        SupportSample support{s.image, s.mask, s.class_index, s.class_name, s.id};
        for (ConditionKind kind :
             {ConditionKind::segmap, ConditionKind::hed, ConditionKind::scribble}) {
            ControlCondition cond = build_condition(support, kind, detector, cfg, palette);
            atomic_write(dir / (s.id + "__" + to_string(kind) + ".png"),
                         encode_condition_png(cond.condition_image));
            ++count;
        }
    }
    std::printf("%s: %d goldens\n", dir.string().c_str(), count);
}

}  // namespace

int main(int argc, char** argv) {
    fs::path out = argc > 1 ? argv[1] : "tests/data";
    std::vector<Sample> condset = make_condset();
    write_set(out / "condset", condset);
    write_goldens(out / "condset_golden", condset);
    write_set(out / "trend", make_trend());
    return 0;
}
