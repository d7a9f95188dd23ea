#pragma once

#include <cstdint>

#include "sparsesplat/depth_reg.hpp"
#include "sparsesplat/image.hpp"
#include "sparsesplat/pyramid.hpp"
#include "sparsesplat/renderer.hpp"

namespace sparsesplat {

// A scalar loss and its gradient with respect to the first argument.
struct LossGrad {
  double value = 0.0;
  Image grad;
  std::uint64_t kink_signature = 0;
};

double l1_loss(const Image& a, const Image& b);
LossGrad l1_loss_with_grad(const Image& a, const Image& b);

// Mean SSIM, 11x11 Gaussian window (sigma 1.5), valid windows only,
// C1 = 0.01^2, C2 = 0.03^2, averaged over channels. Needs min(W, H) >= 11.
double ssim(const Image& a, const Image& b);
LossGrad ssim_with_grad(const Image& a, const Image& b);

// 10 log10(1 / MSE); +inf for identical images.
double psnr(const Image& a, const Image& b);

struct LossWeights {
  double lambda1 = 0.8;  // L1 vs D-SSIM balance
  double lambda2 = 1.0;  // MLCR
  double lambda3 = 0.5;  // ASMG

  void validate() const;
};

struct LossBreakdown {
  double l1 = 0.0;
  double ssim_term = 0.0;    // 1 - SSIM
  double mlcr = 0.0;
  double asmg = 0.0;
  double asmg_masked = 0.0;  // masked part of asmg, already weighted by beta * eta
  double total = 0.0;
};

struct LossOptions {
  LossWeights weights;
  ScheduleConfig schedule;
  MlcrConfig mlcr;
  // Apply MLCR and ASMG to real training views as well.
  bool regularize_real_views = false;
};

// What the objective knows about the view being trained on.
struct LossContext {
  bool pseudo_view = false;
  const Image* reference_depth = nullptr;  // enables ASMG
  const Mask* region = nullptr;            // cached spatial mask for reference_depth
  double iteration = 0.0;
};

struct TotalLoss {
  LossBreakdown breakdown;
  Image d_rgb;
  Image d_depth;
  std::uint64_t kink_signature = 0;
};

TotalLoss total_loss_with_grad(const RenderOutput& rendered, const Image& target, const LossContext& context,
                               const LossOptions& options = {});
LossBreakdown total_loss(const RenderOutput& rendered, const Image& target, const LossContext& context,
                         const LossOptions& options = {});

}  // namespace sparsesplat
