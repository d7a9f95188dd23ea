#pragma once

#include <cstdint>

#include "sparsesplat/gaussian.hpp"
#include "sparsesplat/view_set.hpp"

namespace sparsesplat {

struct SyntheticOptions {
  std::uint64_t seed = 1;
  int gaussians = 300;
  int train_views = 2;
  int pseudo_per_pair = 5;  // interpolated poses per consecutive train pair, endpoints included
  int eval_per_pair = 4;    // held-out poses between pseudo poses
  double noise = 0.01;      // positional noise of the initial point cloud
  double keep_fraction = 1.0;
  int width = 64;
  int height = 64;
  double focal = 80.0;
  double radius = 2.5;       // camera distance from the origin
  double arc_degrees = 50.0; // span of the camera arc
};

struct SyntheticScene {
  GaussianSet ground_truth;
  PointCloud initial;  // jittered, subsampled ground-truth centers
  ViewSet train;
  PseudoViewBundle pseudo;
  ViewSet eval;
};

// Random Gaussians in [-0.5, 0.5]^3 seen by cameras on a horizontal arc that
// look at the origin. Images and depths are ground-truth renders; the
// reference depth is +inf where nothing was rendered. A pure function of the
// options.
SyntheticScene generate_synthetic(const SyntheticOptions& options);

}  // namespace sparsesplat
