#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jga/core/types.hpp"

namespace jga {

// 8-bit RGB (color type 2). Values clamp to [0,1] and quantize to one byte.
std::string png_bytes(const Image& img);
Image parse_png_rgb(const std::string& bytes);
void write_png(const Image& img, const std::string& path);
Image read_png_rgb(const std::string& path);

// 16-bit grayscale (color type 0), the carrier for depth maps.
std::string png_bytes_u16(const std::vector<std::uint16_t>& samples, int width, int height);
std::vector<std::uint16_t> parse_png_u16(const std::string& bytes, int& width, int& height);

// Depth in world units maps to round(depth * scale), clamped to u16 range;
// zero stays the no-measurement marker.
void write_depth_png(const DepthMap& depth, double scale, const std::string& path);
DepthMap read_depth_png(const std::string& path, double scale);

} // namespace jga
