#include "diffss/image.hpp"

#include <string>

namespace diffss {

namespace {

void check_dims(int w, int h, const char* what) {
    if (w <= 0 || h <= 0)
        throw std::invalid_argument(std::string(what) + ": dimensions must be positive, got " +
                                    std::to_string(w) + "x" + std::to_string(h));
}

}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
    check_dims(w, h, "GrayImage");
    values.assign(static_cast<std::size_t>(w) * h, fill);
}

ColorImage::ColorImage(int w, int h, Rgb fill) : width(w), height(h) {
    check_dims(w, h, "ColorImage");
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
        rgb[i] = fill[0];
        rgb[i + 1] = fill[1];
        rgb[i + 2] = fill[2];
    }
}

BinaryMask::BinaryMask(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (fill > 1) throw std::invalid_argument("BinaryMask: fill must be 0 or 1");
    check_dims(w, h, "BinaryMask");
    values.assign(static_cast<std::size_t>(w) * h, fill);
}

std::size_t BinaryMask::foreground_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : values) n += v;
    return n;
}

void require_valid(const GrayImage& img, const char* what) {
    check_dims(img.width, img.height, what);
    if (img.values.size() != img.pixel_count())
        throw std::invalid_argument(std::string(what) + ": buffer size mismatch");
}

void require_valid(const ColorImage& img, const char* what) {
    check_dims(img.width, img.height, what);
    if (img.rgb.size() != img.pixel_count() * 3)
        throw std::invalid_argument(std::string(what) + ": buffer size mismatch");
}

void require_valid(const BinaryMask& mask, const char* what) {
    check_dims(mask.width, mask.height, what);
    if (mask.values.size() != mask.pixel_count())
        throw std::invalid_argument(std::string(what) + ": buffer size mismatch");
    for (std::uint8_t v : mask.values)
        if (v > 1) throw std::invalid_argument(std::string(what) + ": mask values must be 0 or 1");
}

void require_same_dims(int w1, int h1, int w2, int h2, const char* what) {
    if (w1 != w2 || h1 != h2)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch " + std::to_string(w1) +
                                    "x" + std::to_string(h1) + " vs " + std::to_string(w2) + "x" +
                                    std::to_string(h2));
}

}  // namespace diffss
