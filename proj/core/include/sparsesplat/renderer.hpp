#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <vector>

#include "sparsesplat/gaussian.hpp"
#include "sparsesplat/geometry.hpp"
#include "sparsesplat/image.hpp"

namespace sparsesplat {

struct RenderSettings {
  double near_plane = 0.01;
  // Added to the diagonal of every projected covariance (px^2).
  double dilation = 0.3;
  double alpha_max = 0.99;
  // Splats stop contributing where 1/2 d^T cov2d^-1 d exceeds this (3 sigma).
  double cutoff_power = 4.5;
  // Depth is normalized by accumulated alpha only above this value.
  double depth_alpha_floor = 1e-4;
  int tile_size = 16;
};

// A Gaussian projected to the image plane.
struct Splat2D {
  Eigen::Vector2d center_px = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
  Eigen::Vector3d conic = Eigen::Vector3d::Zero();  // (a, b, c) of cov2d^-1 = [[a, b], [b, c]]
  double depth = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double opacity = 0.0;
  std::size_t source_index = 0;
  // Inclusive pixel bounds of the cutoff ellipse; empty when x_min > x_max.
  int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

struct RenderOutput {
  Image rgb;    // H x W x 3
  Image depth;  // H x W, alpha-normalized camera depth
  Image alpha;  // H x W, accumulated opacity
};

// J W Sigma W^T J^T plus the dilation floor, or nullopt when mu lies at or
// in front of the near plane.
std::optional<Eigen::Matrix2d> project_covariance(const Eigen::Matrix3d& sigma, const CameraView& view,
                                                  const Eigen::Vector3d& mu,
                                                  const RenderSettings& settings = {});

// Visible splats sorted front to back, ties broken by source index.
std::vector<Splat2D> project_splats(const GaussianSet& scene, const CameraView& view,
                                    const RenderSettings& settings = {});

// Tiled front-to-back compositing.
RenderOutput render(const GaussianSet& scene, const CameraView& view, const RenderSettings& settings = {});

// Per-pixel compositing over the full depth-sorted splat list, without tiles
// or bounding boxes. Oracle for render().
RenderOutput render_reference(const GaussianSet& scene, const CameraView& view,
                              const RenderSettings& settings = {});

// Z-buffered one-pixel point splats on a black background.
Image render_pointmap(const PointCloud& pc, const CameraView& view, double near_plane = 0.01);

}  // namespace sparsesplat
