#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sparsesplat/gaussian.hpp"
#include "sparsesplat/geometry.hpp"
#include "sparsesplat/image.hpp"
#include "sparsesplat/renderer.hpp"

namespace sparsesplat {

// Loss gradients per Gaussian parameter. Quaternion gradients are (w, x, y, z)
// and lie in the tangent space of the stored unit quaternion.
struct GaussianGrads {
  std::vector<Eigen::Vector3d> d_mu;
  std::vector<Eigen::Vector4d> d_rot;
  std::vector<Eigen::Vector3d> d_log_scale;
  std::vector<double> d_opacity_logit;
  std::vector<Eigen::Vector3d> d_color;
  // Screen-space gradient of the projected center, for densification.
  std::vector<Eigen::Vector2d> d_center_px;
  // 1 when the Gaussian touched at least one pixel of the view.
  std::vector<std::uint8_t> visible;

  static GaussianGrads zeros(std::size_t n);
  std::size_t size() const noexcept { return d_mu.size(); }
  bool all_finite() const;
};

// Gradient of  sum_p <d_rgb_p, C_p> + sum_p d_depth_p * D_p  for the render
// `out` of (scene, view). d_rgb is H x W x 3 and d_depth H x W x 1.
GaussianGrads backward(const GaussianSet& scene, const CameraView& view, const RenderOutput& out,
                       const Image& d_rgb, const Image& d_depth, const RenderSettings& settings = {});

// Scene parameters as a flat vector: per Gaussian mu(3), rot w,x,y,z (4),
// log_scale(3), opacity_logit(1), color(3).
inline constexpr int kParamsPerGaussian = 14;
std::vector<double> flatten_parameters(const GaussianSet& scene);
void unflatten_parameters(std::span<const double> theta, GaussianSet& scene);
std::vector<double> flatten_gradients(const GaussianGrads& grads);
std::string parameter_name(std::size_t flat_index);

// Hash of every discrete decision the forward model makes for a view: which
// splats fall inside the cutoff at each pixel, which hit the opacity clamp,
// and which pixels pass the depth alpha floor.
std::uint64_t activation_signature(const GaussianSet& scene, const CameraView& view,
                                   const RenderSettings& settings = {});

struct GradCheckOptions {
  double min_gradient = 1e-6;  // parameters with smaller |analytic| are not compared
  // Restrict the check to these flat indices; empty means all parameters.
  std::vector<std::size_t> indices;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  // Parameters whose +-h probe crossed a discontinuity (cutoff edge, clamp
  // boundary, or a kink of the loss) and were excluded.
  std::size_t skipped = 0;
};

// Central differences (f(x+h) - f(x-h)) / 2h against `analytic`. When
// `signature` is given, a parameter whose probes change the signature is
// skipped. Relative error is |a - n| / max(|a|, |n|).
GradCheckReport check_gradient(std::span<const double> theta, std::span<const double> analytic,
                               const std::function<double(std::span<const double>)>& objective, double h,
                               const GradCheckOptions& options = {},
                               const std::function<std::uint64_t(std::span<const double>)>& signature = {});

// Loss evaluated on a render, with its gradient with respect to the render.
struct LossEvaluation {
  double value = 0.0;
  Image d_rgb;
  Image d_depth;
  // Identifies which branch of every non-smooth operation the loss took.
  std::uint64_t kink_signature = 0;
};
using RenderLoss = std::function<LossEvaluation(const RenderOutput&)>;

// Compares backward() through `loss` with central differences on every
// scene parameter.
GradCheckReport finite_difference_check(const GaussianSet& scene, const CameraView& view, const RenderLoss& loss,
                                        double h, const GradCheckOptions& options = {},
                                        const RenderSettings& settings = {});

}  // namespace sparsesplat
