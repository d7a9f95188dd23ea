#include "sparsesplat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "sparsesplat/error.hpp"
#include "sparsesplat/geometry.hpp"
#include "sparsesplat/renderer.hpp"

namespace sparsesplat {

namespace {

ViewData render_view(const GaussianSet& gt, const CameraView& cam, bool with_depth) {
  const RenderSettings settings;
  const RenderOutput out = render_reference(gt, cam, settings);
  ViewData v{cam, out.rgb, std::nullopt, std::nullopt, std::nullopt};
  if (with_depth) {
    Image depth = out.depth;
    for (int y = 0; y < depth.height(); ++y) {
      for (int x = 0; x < depth.width(); ++x) {
        if (!(out.alpha.at(x, y) > settings.depth_alpha_floor)) depth.at(x, y) = std::numeric_limits<double>::infinity();
      }
    }
    v.depth = std::move(depth);
  }
  return v;
}

}  // namespace

SyntheticScene generate_synthetic(const SyntheticOptions& o) {
  if (o.train_views < 2) throw InvalidArgument("synthetic: at least two training views are required");
  if (o.gaussians < 1) throw InvalidArgument("synthetic: at least one Gaussian is required");
  if (o.pseudo_per_pair != 0 && o.pseudo_per_pair < 2) {
    throw InvalidArgument("synthetic: pseudo views per pair must be 0 or at least 2");
  }
  if (o.eval_per_pair < 0 || !(o.noise >= 0.0) || !(o.keep_fraction > 0.0 && o.keep_fraction <= 1.0)) {
    throw InvalidArgument("synthetic: invalid eval count, noise or keep fraction");
  }
  const Intrinsics k{o.focal, o.focal, (o.width - 1) / 2.0, (o.height - 1) / 2.0, o.width, o.height};
  k.validate();

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticScene s;
  const double log_lo = std::log(0.04), log_hi = std::log(0.15);
  for (int i = 0; i < o.gaussians; ++i) {
    Gaussian g;
    g.mu = {unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5};
    Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
    q.normalize();
    g.rot = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    for (int a = 0; a < 3; ++a) g.log_scale[a] = log_lo + (log_hi - log_lo) * unit(rng);
    g.opacity_logit = logit(0.6 + 0.35 * unit(rng));
    g.color = {unit(rng), unit(rng), unit(rng)};
    s.ground_truth.gaussians.push_back(g);
  }

  // Initial cloud: subsample, then jitter the surviving centers.
  std::vector<std::size_t> order(s.ground_truth.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (o.keep_fraction < 1.0) {
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(o.keep_fraction * order.size()))));
    std::sort(order.begin(), order.end());
  }
  for (std::size_t i : order) {
    const Gaussian& g = s.ground_truth[i];
    Eigen::Vector3d p = g.mu;
    if (o.noise > 0.0) p += o.noise * Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    s.initial.points.push_back(p);
    s.initial.colors.push_back(g.color);
  }

  std::vector<CameraView> train_cams;
  const double span = o.arc_degrees * std::numbers::pi / 180.0;
  for (int v = 0; v < o.train_views; ++v) {
    const double theta = -0.5 * span + span * v / (o.train_views - 1);
    const Eigen::Vector3d eye(o.radius * std::sin(theta), 0.0, -o.radius * std::cos(theta));
    train_cams.push_back({k, Pose::look_at(eye, Eigen::Vector3d::Zero()), "train_" + std::to_string(v)});
  }
  for (const auto& cam : train_cams) s.train.views.push_back(render_view(s.ground_truth, cam, false));

  s.pseudo.provenance = "synthetic-oracle";
  s.eval.provenance = "synthetic-oracle";
  for (int pair = 0; pair + 1 < o.train_views; ++pair) {
    const Pose& a = train_cams[pair].pose;
    const Pose& b = train_cams[pair + 1].pose;
    if (o.pseudo_per_pair > 0) {
      const auto poses = interpolate_trajectory(a, b, o.pseudo_per_pair);
      for (std::size_t j = 0; j < poses.size(); ++j) {
        const CameraView cam{k, poses[j], "pseudo_" + std::to_string(pair) + "_" + std::to_string(j)};
        ViewData v = render_view(s.ground_truth, cam, true);
        v.pointmap = render_pointmap(s.initial, cam);
        s.pseudo.views.push_back(std::move(v));
      }
    }
    if (o.eval_per_pair > 0) {
      // Odd samples of a twice-as-fine trajectory sit between the pseudo poses.
      const auto poses = interpolate_trajectory(a, b, 2 * o.eval_per_pair + 1);
      for (int j = 0; j < o.eval_per_pair; ++j) {
        const CameraView cam{k, poses[2 * j + 1], "eval_" + std::to_string(pair) + "_" + std::to_string(j)};
        s.eval.views.push_back(render_view(s.ground_truth, cam, true));
      }
    }
  }
  return s;
}

}  // namespace sparsesplat
