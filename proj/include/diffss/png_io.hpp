#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "diffss/image.hpp"

namespace diffss {

// Encoders use pinned settings (fixed filter + compression level), so equal
// pixels always produce equal file bytes.
std::vector<std::uint8_t> encode_png(const ColorImage& img);
std::vector<std::uint8_t> encode_png(const GrayImage& img);
std::vector<std::uint8_t> encode_png(const BinaryMask& mask);  // {0,1} -> {0,255} gray

ColorImage decode_color_png(const std::vector<std::uint8_t>& bytes);
GrayImage decode_gray_png(const std::vector<std::uint8_t>& bytes);
// Requires a single-channel image with values exactly {0,255}.
BinaryMask decode_mask_png(const std::vector<std::uint8_t>& bytes);

ColorImage read_color_png(const std::filesystem::path& path);
GrayImage read_gray_png(const std::filesystem::path& path);
BinaryMask read_mask_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const ColorImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_png(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace diffss
