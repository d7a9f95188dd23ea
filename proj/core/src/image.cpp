#include "sparsesplat/image.hpp"

#include <algorithm>

#include "sparsesplat/error.hpp"

namespace sparsesplat {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels < 0) throw InvalidArgument("negative image dimension");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image Image::channel(int c) const {
  Image out(width_, height_, 1);
  const std::size_t n = pixel_count();
  for (std::size_t i = 0; i < n; ++i) out.data_[i] = data_[i * channels_ + c];
  return out;
}

void Image::set_channel(int c, const Image& plane) {
  const std::size_t n = pixel_count();
  for (std::size_t i = 0; i < n; ++i) data_[i * channels_ + c] = plane.data_[i];
}

void Image::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

}  // namespace sparsesplat
