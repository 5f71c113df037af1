#include "diffss/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <stdexcept>

#include "diffss/common.hpp"

namespace diffss {

namespace {

struct MemReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

void mem_read(png_structp png, png_bytep out, png_size_t count) {
    auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
    if (r->pos + count > r->size) png_error(png, "png: truncated stream");
    std::memcpy(out, r->data + r->pos, count);
    r->pos += count;
}

void mem_write(png_structp png, png_bytep data, png_size_t count) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + count);
}

void mem_flush(png_structp) {}

// Decodes any PNG into 8-bit rows with `channels` channels (1 = gray, 3 = rgb).
std::vector<std::uint8_t> decode_rows(const std::vector<std::uint8_t>& bytes, int channels, int& w,
                                      int& h) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
        throw std::runtime_error("png: not a PNG stream");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: read struct alloc failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png: info struct alloc failed");
    }

    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> row_ptrs;
    MemReader reader{bytes.data(), bytes.size(), 0};

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: decode failed");
    }

    png_set_read_fn(png, &reader, mem_read);
    png_read_info(png, info);

    png_uint_32 width = png_get_image_width(png, info);
    png_uint_32 height = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (channels == 3) {
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
    } else {
        if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
            color_type == PNG_COLOR_TYPE_PALETTE)
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    w = static_cast<int>(width);
    h = static_cast<int>(height);
    std::size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<std::size_t>(w) * channels) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: unexpected row stride after conversion");
    }

    pixels.resize(stride * height);
    row_ptrs.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = pixels.data() + y * stride;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

std::vector<std::uint8_t> encode_rows(const std::uint8_t* pixels, int w, int h, int channels) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: write struct alloc failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png: info struct alloc failed");
    }

    std::vector<std::uint8_t> out;
    std::vector<png_bytep> row_ptrs(h);
    std::size_t stride = static_cast<std::size_t>(w) * channels;
    for (int y = 0; y < h; ++y)
        row_ptrs[y] = const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * stride);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: encode failed");
    }

    png_set_write_fn(png, &out, mem_write, mem_flush);
    // Pinned encoder settings: byte-stable output for equal pixels.
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, w, h, 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ColorImage& img) {
    require_valid(img, "encode_png");
    return encode_rows(img.rgb.data(), img.width, img.height, 3);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    require_valid(img, "encode_png");
    return encode_rows(img.values.data(), img.width, img.height, 1);
}

std::vector<std::uint8_t> encode_png(const BinaryMask& mask) {
    require_valid(mask, "encode_png");
    std::vector<std::uint8_t> bytes(mask.values.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.values[i] ? 255 : 0;
    return encode_rows(bytes.data(), mask.width, mask.height, 1);
}

ColorImage decode_color_png(const std::vector<std::uint8_t>& bytes) {
    ColorImage img;
    img.rgb = decode_rows(bytes, 3, img.width, img.height);
    return img;
}

GrayImage decode_gray_png(const std::vector<std::uint8_t>& bytes) {
    GrayImage img;
    img.values = decode_rows(bytes, 1, img.width, img.height);
    return img;
}

BinaryMask decode_mask_png(const std::vector<std::uint8_t>& bytes) {
    GrayImage g = decode_gray_png(bytes);
    BinaryMask mask;
    mask.width = g.width;
    mask.height = g.height;
    mask.values.resize(g.values.size());
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        if (g.values[i] == 0)
            mask.values[i] = 0;
        else if (g.values[i] == 255)
            mask.values[i] = 1;
        else
            throw std::runtime_error("mask png: pixel value " + std::to_string(g.values[i]) +
                                     " is neither 0 nor 255");
    }
    return mask;
}

ColorImage read_color_png(const std::filesystem::path& path) {
    return decode_color_png(read_binary_file(path));
}

GrayImage read_gray_png(const std::filesystem::path& path) {
    return decode_gray_png(read_binary_file(path));
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
    try {
        return decode_mask_png(read_binary_file(path));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void write_png(const std::filesystem::path& path, const ColorImage& img) {
    atomic_write(path, encode_png(img));
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
    atomic_write(path, encode_png(img));
}

void write_png(const std::filesystem::path& path, const BinaryMask& mask) {
    atomic_write(path, encode_png(mask));
}

}  // namespace diffss
