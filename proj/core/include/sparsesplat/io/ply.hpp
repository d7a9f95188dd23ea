#pragma once

#include <filesystem>
#include <string_view>
#include <variant>

#include "sparsesplat/gaussian.hpp"

namespace sparsesplat::io {

enum class PlyFormat { Ascii, BinaryLittleEndian };

// A file carrying every Gaussian property loads as a GaussianSet, anything
// else with x, y, z as a PointCloud. Malformed content throws ParseError.
using PlyContent = std::variant<PointCloud, GaussianSet>;
PlyContent parse_ply(std::string_view bytes);
PlyContent load_ply(const std::filesystem::path& path);

PointCloud load_point_cloud(const std::filesystem::path& path);
GaussianSet load_gaussians(const std::filesystem::path& path);

// Colors are written as 8-bit red/green/blue.
std::string serialize_point_cloud(const PointCloud& pc, PlyFormat format);
// Every field is written as a double, so binary files round-trip exactly.
std::string serialize_gaussians(const GaussianSet& scene, PlyFormat format);

void save_point_cloud(const std::filesystem::path& path, const PointCloud& pc,
                      PlyFormat format = PlyFormat::BinaryLittleEndian);
void save_gaussians(const std::filesystem::path& path, const GaussianSet& scene,
                    PlyFormat format = PlyFormat::BinaryLittleEndian);

}  // namespace sparsesplat::io
