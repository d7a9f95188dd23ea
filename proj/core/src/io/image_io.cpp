#include "sparsesplat/io/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <vector>

#include "sparsesplat/error.hpp"
#include "sparsesplat/io/files.hpp"

namespace sparsesplat::io {

Image load_png(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw ParseError(path.string() + ": " + png.message, 0);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw ParseError(path.string() + ": " + msg, 0);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height), 3);
  auto d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = buffer[i] / 255.0;
  return img;
}

void save_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) throw InvalidArgument("save_png: need 1 or 3 channels");
  std::vector<std::uint8_t> buffer(img.size());
  const auto d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double v = std::isfinite(d[i]) ? std::clamp(d[i], 0.0, 1.0) : 0.0;
    buffer[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, buffer.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + png.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, buffer.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + png.message);
  }
  out.resize(size);
  write_file(path, out);
}

Image parse_pfm(std::string_view bytes) {
  // Header: magic, dimensions and scale as three whitespace-terminated lines.
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError("PFM header is truncated", pos);
    return std::string(bytes.substr(start, pos - start));
  };
  const std::string magic = next_token();
  int channels = 0;
  if (magic == "Pf") channels = 1;
  else if (magic == "PF") channels = 3;
  else throw ParseError("not a PFM file", 0);

  const std::size_t dims_at = pos;
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    scale = std::stod(next_token());
  } catch (const std::logic_error&) {
    throw ParseError("malformed PFM header", dims_at);
  }
  if (w <= 0 || h <= 0 || scale == 0.0 || !std::isfinite(scale)) throw ParseError("malformed PFM header", dims_at);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("PFM header is truncated", pos);
  }
  ++pos;  // single whitespace byte before the raster

  const std::size_t need = static_cast<std::size_t>(w) * h * channels * 4;
  if (bytes.size() - pos < need) throw ParseError("PFM raster is truncated", bytes.size());
  const bool swap = (scale < 0.0) != (std::endian::native == std::endian::little);
  Image img(w, h, channels);
  const char* p = bytes.data() + pos;
  for (int row = 0; row < h; ++row) {
    const int y = h - 1 - row;
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits;
        std::memcpy(&bits, p, 4);
        p += 4;
        if (swap) bits = __builtin_bswap32(bits);
        img.at(x, y, c) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  }
  return img;
}

std::string serialize_pfm(const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) throw InvalidArgument("save_pfm: need 1 or 3 channels");
  std::ostringstream head;
  head << (img.channels() == 1 ? "Pf" : "PF") << '\n' << img.width() << ' ' << img.height() << "\n-1.0\n";
  std::string out = head.str();
  out.reserve(out.size() + img.size() * 4);
  for (int row = 0; row < img.height(); ++row) {
    const int y = img.height() - 1 - row;
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(img.at(x, y, c)));
        if constexpr (std::endian::native != std::endian::little) bits = __builtin_bswap32(bits);
        char buf[4];
        std::memcpy(buf, &bits, 4);
        out.append(buf, 4);
      }
    }
  }
  return out;
}

Image load_pfm(const std::filesystem::path& path) {
  try {
    return parse_pfm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.reason(), e.offset());
  }
}

void save_pfm(const std::filesystem::path& path, const Image& img) { write_file(path, serialize_pfm(img)); }

}  // namespace sparsesplat::io
