#include "sparsesplat/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "raster_common.hpp"
#include "sparsesplat/parallel.hpp"

namespace sparsesplat {

namespace {

Eigen::Matrix<double, 2, 3> projection_jacobian(const Intrinsics& k, const Eigen::Vector3d& p) {
  const double inv_z = 1.0 / p.z();
  const double inv_z2 = inv_z * inv_z;
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx * inv_z, 0.0, -k.fx * p.x() * inv_z2,
       0.0, k.fy * inv_z, -k.fy * p.y() * inv_z2;
  return j;
}

RenderOutput blank_output(const CameraView& view) {
  return {Image(view.width(), view.height(), 3), Image(view.width(), view.height(), 1),
          Image(view.width(), view.height(), 1)};
}

}  // namespace

std::optional<Eigen::Matrix2d> project_covariance(const Eigen::Matrix3d& sigma, const CameraView& view,
                                                  const Eigen::Vector3d& mu, const RenderSettings& settings) {
  const Eigen::Vector3d p = view.pose.apply(mu);
  if (!(p.z() > settings.near_plane)) return std::nullopt;
  const Eigen::Matrix<double, 2, 3> t = projection_jacobian(view.intrinsics, p) * view.pose.rotation_matrix();
  Eigen::Matrix2d cov = t * sigma * t.transpose();
  cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
  cov.diagonal().array() += settings.dilation;
  return cov;
}

std::vector<Splat2D> project_splats(const GaussianSet& scene, const CameraView& view,
                                    const RenderSettings& settings) {
  const Intrinsics& k = view.intrinsics;
  const Eigen::Matrix3d w = view.pose.rotation_matrix();
  std::vector<Splat2D> splats;
  splats.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Gaussian& g = scene[i];
    const Eigen::Vector3d p = w * g.mu + view.pose.translation();
    if (!(p.z() > settings.near_plane)) continue;

    const Eigen::Matrix<double, 2, 3> t = projection_jacobian(k, p) * w;
    Eigen::Matrix2d cov = t * g.covariance() * t.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov.diagonal().array() += settings.dilation;
    const double det = cov.determinant();
    if (!(det > 0.0) || !cov.allFinite()) continue;

    Splat2D s;
    s.center_px = {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
    if (!s.center_px.allFinite()) continue;
    s.cov2d = cov;
    s.conic = {cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det};
    s.depth = p.z();
    s.color = g.color;
    s.opacity = g.opacity();
    s.source_index = i;

    // Axis-aligned bounds of the cutoff ellipse, padded by one pixel.
    const double reach = std::sqrt(2.0 * settings.cutoff_power);
    const double ex = reach * std::sqrt(cov(0, 0));
    const double ey = reach * std::sqrt(cov(1, 1));
    const double lo_x = std::floor(s.center_px.x() - ex) - 1.0;
    const double hi_x = std::ceil(s.center_px.x() + ex) + 1.0;
    const double lo_y = std::floor(s.center_px.y() - ey) - 1.0;
    const double hi_y = std::ceil(s.center_px.y() + ey) + 1.0;
    // Off-screen splats keep an empty box; the reference path still visits them.
    if (!(hi_x < 0.0 || hi_y < 0.0 || lo_x > k.width - 1 || lo_y > k.height - 1)) {
      s.x_min = static_cast<int>(std::max(0.0, lo_x));
      s.x_max = static_cast<int>(std::min<double>(k.width - 1, hi_x));
      s.y_min = static_cast<int>(std::max(0.0, lo_y));
      s.y_max = static_cast<int>(std::min<double>(k.height - 1, hi_y));
    }
    splats.push_back(s);
  }
  std::sort(splats.begin(), splats.end(), [](const Splat2D& a, const Splat2D& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.source_index < b.source_index;
  });
  return splats;
}

RenderOutput render(const GaussianSet& scene, const CameraView& view, const RenderSettings& settings) {
  RenderOutput out = blank_output(view);
  const std::vector<Splat2D> splats = project_splats(scene, view, settings);
  if (splats.empty()) return out;

  const detail::TileBins bins = detail::bin_splats(splats, view.width(), view.height(), settings.tile_size);
  parallel_for(bins.tile_count(), [&](std::size_t tile) {
    const auto& list = bins.lists[tile];
    if (list.empty()) return;
    std::vector<const Splat2D*> ordered;
    ordered.reserve(list.size());
    for (std::size_t idx : list) ordered.push_back(&splats[idx]);

    const int tx = static_cast<int>(tile % bins.tiles_x), ty = static_cast<int>(tile / bins.tiles_x);
    const int x_end = std::min(view.width(), (tx + 1) * bins.tile_size);
    const int y_end = std::min(view.height(), (ty + 1) * bins.tile_size);
    for (int y = ty * bins.tile_size; y < y_end; ++y) {
      for (int x = tx * bins.tile_size; x < x_end; ++x) {
        detail::store_pixel(out, x, y, detail::composite_pixel(ordered, x, y, settings), settings);
      }
    }
  });
  return out;
}

RenderOutput render_reference(const GaussianSet& scene, const CameraView& view, const RenderSettings& settings) {
  RenderOutput out = blank_output(view);
  const std::vector<Splat2D> splats = project_splats(scene, view, settings);
  std::vector<const Splat2D*> ordered;
  ordered.reserve(splats.size());
  for (const auto& s : splats) ordered.push_back(&s);
  for (int y = 0; y < view.height(); ++y) {
    for (int x = 0; x < view.width(); ++x) {
      detail::store_pixel(out, x, y, detail::composite_pixel(ordered, x, y, settings), settings);
    }
  }
  return out;
}

Image render_pointmap(const PointCloud& pc, const CameraView& view, double near_plane) {
  Image img(view.width(), view.height(), 3);
  std::vector<double> zbuf(img.pixel_count(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Projection pr = project_point(view, pc.points[i]);
    if (!(pr.z > near_plane)) continue;
    const double xr = std::round(pr.u), yr = std::round(pr.v);
    if (!(xr >= 0.0 && yr >= 0.0 && xr < view.width() && yr < view.height())) continue;
    const int x = static_cast<int>(xr), y = static_cast<int>(yr);
    double& z = zbuf[static_cast<std::size_t>(y) * view.width() + x];
    if (pr.z < z) {
      z = pr.z;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = pc.colors[i][c];
    }
  }
  return img;
}

}  // namespace sparsesplat
