#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "imil/image.hpp"

namespace imil {

/// Decodes a PNG (gray, gray+alpha, RGB, RGBA; 8 or 16 bit) into [0,1] values.
/// Alpha is dropped. `channels` of 0 keeps the native count; 1 or 3 converts.
Image decode_png(std::span<const std::uint8_t> bytes, int channels = 0);
Image read_png(const std::filesystem::path& path, int channels = 0);

/// 8-bit interleaved pixels to PNG bytes. `channels` is 1 (gray) or 3 (RGB).
std::vector<std::uint8_t> encode_png(std::span<const std::uint8_t> pixels, int width, int height,
                                     int channels);

/// Quantizes an image to 8 bits (round(v*255), clamped) and encodes it.
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Interleaved (HWC) 8-bit quantization used by the encoders.
std::vector<std::uint8_t> quantize8(const Image& image);

Image resize_bilinear(const Image& image, int height, int width);

/// RGB -> luminance (ITU-R BT.601 weights), gray -> replicated RGB.
Image convert_channels(const Image& image, int channels);

}  // namespace imil
