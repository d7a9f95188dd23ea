#pragma once

#include <optional>
#include <vector>

#include "sparsesplat/image.hpp"

namespace sparsesplat {

// Rendered and reference depth for one view. valid marks pixels where the
// reference is finite and the render accumulated enough opacity.
struct DepthPair {
  Image rendered;
  Image reference;
  Mask valid;

  static DepthPair from_render(const Image& rendered_depth, const Image& rendered_alpha, const Image& reference,
                               double alpha_floor = 1e-4);
  void validate() const;
};

struct ScheduleConfig {
  double alpha = 0.3;  // fraction of training before the masked term switches on
  double beta = 1.0;   // masked term weight after the switch
  long total_iters = 6000;
  // Downsample factors, each a power of 1/2.
  std::vector<double> scales{1.0, 0.5, 0.25};
  std::vector<double> scale_weights{1.0, 1.0, 1.0};
  double mask_threshold = 0.4;

  double onset() const noexcept { return alpha * static_cast<double>(total_iters); }
  void validate() const;
};

// Sample Pearson correlation over the valid pixels, or nullopt when fewer
// than two pixels are valid or either map is flat over them.
std::optional<double> pearson_corr(const Image& a, const Image& b, const Mask& valid);

// Repeated 2x area-mean pooling down to `scale`. Invalid pixels are left out
// of every mean; a pooled pixel is valid when any of its children is.
DepthPair downsample_pair(const DepthPair& pair, double scale);

// Majority pooling of a region mask (ties count as inside).
Mask downsample_mask(const Mask& mask, double scale);

// 1 - corr at one scale, in [0, 2]; 0 for degenerate input. A region, when
// given, is a full-resolution mask further restricting the valid pixels.
double depth_corr_loss_per_scale(const DepthPair& pair, double scale, const Mask* region = nullptr);

double multiscale_depth_loss(const DepthPair& pair, const ScheduleConfig& cfg);

// Pixels whose min-max normalized finite reference depth is below threshold.
// A constant map yields an all-true mask. Throws when no pixel is finite.
Mask spatial_mask(const Image& reference, double threshold);

// multiscale_depth_loss restricted to `region`. Without a region the mask is
// computed from the reference depth and cfg.mask_threshold.
double masked_multiscale_depth_loss(const DepthPair& pair, const ScheduleConfig& cfg,
                                    const Mask* region = nullptr);

// Decay of the masked term: 1 at the onset, down to a floor of 0.5.
double eta(double t, const ScheduleConfig& cfg);

struct AsmgResult {
  double value = 0.0;
  double depth_term = 0.0;
  double masked_term = 0.0;
  double masked_weight = 0.0;  // beta * eta, or 0 before the onset
  Image d_rendered;            // gradient of value with respect to pair.rendered
};

// depth term + masked_weight * masked term, with gradient.
AsmgResult asmg_with_grad(const DepthPair& pair, double t, const ScheduleConfig& cfg, const Mask* region = nullptr);
double asmg_total(const DepthPair& pair, double t, const ScheduleConfig& cfg, const Mask* region = nullptr);

}  // namespace sparsesplat
