#pragma once

#include <cstdint>
#include <vector>

#include "sparsesplat/image.hpp"

namespace sparsesplat {

// Band-pass levels L(0)..L(K-1) and the low-pass residual I(K).
struct LaplacianPyramid {
  std::vector<Image> levels;
  Image top;

  int num_levels() const noexcept { return static_cast<int>(levels.size()); }
};

// 5-tap binomial blur ([1 4 6 4 1] / 16, separable, reflect-101 borders)
// followed by keeping every second row and column. Output is ceil(W/2) x ceil(H/2).
Image blur_downsample(const Image& img);

// Bilinear upsampling; fine pixel x samples the coarse grid at x / 2, which
// is where blur_downsample took coarse pixel x / 2 from.
Image upsample_bilinear(const Image& coarse, int width, int height);

// Transposes of the two linear operators above, for backpropagation.
Image blur_downsample_adjoint(const Image& grad_coarse, int width, int height);
Image upsample_bilinear_adjoint(const Image& grad_fine, int coarse_width, int coarse_height);

// Throws InvalidArgument when min(W, H) < 2^num_levels or num_levels < 1.
LaplacianPyramid laplacian_decompose(const Image& img, int num_levels);
Image laplacian_reconstruct(const LaplacianPyramid& pyramid);

struct MlcrConfig {
  std::vector<double> level_weights{1.0, 1.0, 1.0};  // one per band-pass level
  // Weight of the low-pass residual; 0 leaves only the band-pass sum.
  double top_weight = 1.0;

  int num_levels() const noexcept { return static_cast<int>(level_weights.size()); }
  void validate() const;
};

// Weighted per-level mean absolute difference of the two pyramids.
double mlcr_loss(const Image& rendered, const Image& synthesized, const MlcrConfig& config = {});

struct MlcrResult {
  double value = 0.0;
  Image d_rendered;
  std::uint64_t kink_signature = 0;  // sign pattern of the compared coefficients
};
MlcrResult mlcr_loss_with_grad(const Image& rendered, const Image& synthesized, const MlcrConfig& config = {});

}  // namespace sparsesplat
