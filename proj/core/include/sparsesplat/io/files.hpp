#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sparsesplat::io {

// Whole-file helpers that throw IoError naming the path.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace sparsesplat::io
