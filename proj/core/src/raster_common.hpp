#pragma once

// Shared by the forward renderer and the backward pass so both evaluate the
// compositing kernel with the same floating-point operations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sparsesplat/renderer.hpp"

namespace sparsesplat::detail {

struct SplatSample {
  bool active = false;   // inside the cutoff ellipse
  bool clamped = false;  // opacity * falloff exceeded alpha_max
  double falloff = 0.0;  // exp(-power)
  double alpha = 0.0;
  double dx = 0.0, dy = 0.0;
};

inline SplatSample sample_splat(const Splat2D& s, double px, double py, const RenderSettings& settings) {
  SplatSample out;
  out.dx = px - s.center_px.x();
  out.dy = py - s.center_px.y();
  const double power =
      0.5 * (s.conic.x() * out.dx * out.dx + s.conic.z() * out.dy * out.dy) + s.conic.y() * out.dx * out.dy;
  if (!(power <= settings.cutoff_power)) return out;
  out.active = true;
  out.falloff = std::exp(-power);
  const double raw = s.opacity * out.falloff;
  out.clamped = raw > settings.alpha_max;
  out.alpha = out.clamped ? settings.alpha_max : raw;
  return out;
}

struct PixelResult {
  double r = 0.0, g = 0.0, b = 0.0;
  double depth_acc = 0.0;
  double transmittance = 1.0;
};

template <typename SplatRange>
PixelResult composite_pixel(const SplatRange& ordered, double px, double py, const RenderSettings& settings) {
  PixelResult out;
  for (const Splat2D* s : ordered) {
    const SplatSample smp = sample_splat(*s, px, py, settings);
    if (!smp.active) continue;
    const double w = smp.alpha * out.transmittance;
    out.r += w * s->color.x();
    out.g += w * s->color.y();
    out.b += w * s->color.z();
    out.depth_acc += w * s->depth;
    out.transmittance *= 1.0 - smp.alpha;
  }
  return out;
}

inline void store_pixel(RenderOutput& out, int x, int y, const PixelResult& p, const RenderSettings& settings) {
  out.rgb.at(x, y, 0) = p.r;
  out.rgb.at(x, y, 1) = p.g;
  out.rgb.at(x, y, 2) = p.b;
  const double alpha = 1.0 - p.transmittance;
  out.alpha.at(x, y) = alpha;
  out.depth.at(x, y) = alpha > settings.depth_alpha_floor ? p.depth_acc / alpha : 0.0;
}

// Per-tile splat lists in global front-to-back order.
struct TileBins {
  int tiles_x = 0;
  int tiles_y = 0;
  int tile_size = 16;
  std::vector<std::vector<std::size_t>> lists;  // indices into the sorted splat vector

  std::size_t tile_count() const { return lists.size(); }
};

inline TileBins bin_splats(const std::vector<Splat2D>& splats, int width, int height, int tile_size) {
  TileBins bins;
  bins.tile_size = tile_size;
  bins.tiles_x = (width + tile_size - 1) / tile_size;
  bins.tiles_y = (height + tile_size - 1) / tile_size;
  bins.lists.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);
  for (std::size_t i = 0; i < splats.size(); ++i) {
    const Splat2D& s = splats[i];
    if (s.x_min > s.x_max || s.y_min > s.y_max) continue;
    const int tx0 = s.x_min / tile_size, tx1 = s.x_max / tile_size;
    const int ty0 = s.y_min / tile_size, ty1 = s.y_max / tile_size;
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) bins.lists[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(i);
    }
  }
  return bins;
}

}  // namespace sparsesplat::detail
