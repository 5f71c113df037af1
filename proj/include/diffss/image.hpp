#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace diffss {

using Rgb = std::array<std::uint8_t, 3>;

// 8-bit single-channel image, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool operator==(const GrayImage&) const = default;
};

// 8-bit RGB image, row-major, interleaved.
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // 3 bytes per pixel

    ColorImage() = default;
    ColorImage(int w, int h, Rgb fill = {0, 0, 0});

    Rgb at(int x, int y) const {
        std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        rgb[i] = c[0];
        rgb[i + 1] = c[1];
        rgb[i + 2] = c[2];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool operator==(const ColorImage&) const = default;
};

// Per-pixel {0,1} mask. On disk these are single-channel PNGs with {0,255}.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;  // strictly 0 or 1

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t foreground_count() const;

    bool operator==(const BinaryMask&) const = default;
};

// Throwing validators used at module boundaries.
void require_valid(const GrayImage& img, const char* what);
void require_valid(const ColorImage& img, const char* what);
void require_valid(const BinaryMask& mask, const char* what);
void require_same_dims(int w1, int h1, int w2, int h2, const char* what);

}  // namespace diffss
