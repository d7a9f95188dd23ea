#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sparsesplat/image.hpp"

namespace sparsesplat::io {

// 8-bit PNG. Values map to [0, 1] by /255 with no gamma transform; loading
// always yields three channels.
Image load_png(const std::filesystem::path& path);
// Writes 1- or 3-channel images, clamped to [0, 1] and rounded to 8 bits.
void save_png(const std::filesystem::path& path, const Image& img);

// Portable float map (1 or 3 channels). Rows are stored bottom to top and
// written little-endian; big-endian files are read too.
Image parse_pfm(std::string_view bytes);
std::string serialize_pfm(const Image& img);
Image load_pfm(const std::filesystem::path& path);
void save_pfm(const std::filesystem::path& path, const Image& img);

}  // namespace sparsesplat::io
