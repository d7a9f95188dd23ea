#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sparsesplat/gaussian.hpp"
#include "sparsesplat/losses.hpp"
#include "sparsesplat/renderer.hpp"
#include "sparsesplat/view_set.hpp"

namespace sparsesplat {

enum class Optimizer { Adam, Momentum };

struct LearningRates {
  double mu = 1.6e-4;        // initial position rate
  double mu_final = 1.6e-6;  // reached at the last iteration, exponential decay
  double rot = 1e-3;
  double log_scale = 5e-3;
  double opacity = 5e-2;
  double color = 2.5e-3;

  void validate() const;
};

struct DensifyConfig {
  bool enabled = true;
  long interval = 100;
  long start_iter = 500;
  double stop_fraction = 0.5;  // densification ends at stop_fraction * T
  // Mean screen-space center gradient (per pixel) that triggers cloning.
  double grad_threshold = 2e-4;
  // Gaussians whose largest scale exceeds this fraction of the scene extent
  // are split, smaller ones are cloned.
  double split_fraction = 0.05;
  double split_scale_divisor = 1.6;
  double min_opacity = 0.005;
  std::size_t max_count = 150000;
};

struct TrainConfig {
  long total_iters = 6000;
  Optimizer optimizer = Optimizer::Adam;
  double momentum = 0.9;  // momentum optimizer only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-15;
  LearningRates lr;
  // Weights, MLCR levels and the ASMG schedule. The schedule's total_iters
  // is replaced by total_iters above during training.
  LossOptions loss;
  DensifyConfig densify;
  RenderSettings render;
  // Views taken from each list per round-robin cycle.
  int real_weight = 1;
  int pseudo_weight = 1;
  long eval_interval = 1000;  // 0 disables intermediate evaluation
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationRecord {
  long iteration = 0;
  std::string view_id;
  bool pseudo = false;
  LossBreakdown loss;
  std::size_t gaussian_count = 0;
};

struct EvalRecord {
  long iteration = 0;
  double psnr = 0.0;  // mean over views
  double ssim = 0.0;
  std::vector<double> view_psnr;
};

struct TrainLog {
  std::vector<IterationRecord> iterations;
  std::vector<EvalRecord> evals;

  // One JSON object per line, iterations and evaluations in order.
  std::string to_jsonl() const;
};

struct TrainResult {
  GaussianSet scene;
  TrainLog log;
};

struct TrainHooks {
  // Called after each evaluation with the current scene.
  std::function<void(long iteration, const GaussianSet&)> checkpoint;
  // Called after every iteration; useful for progress reporting.
  std::function<void(const IterationRecord&)> progress;
};

TrainResult train(const GaussianSet& initial, std::span<const ViewData> train_views,
                  std::span<const ViewData> pseudo_views, const TrainConfig& cfg,
                  std::span<const ViewData> eval_views = {}, const TrainHooks& hooks = {});

struct DensifyResult {
  GaussianSet scene;
  // Index of each output Gaussian in the input, or kNewGaussian for one
  // created by cloning or splitting.
  std::vector<std::size_t> origin;
  std::size_t cloned = 0, split = 0, pruned = 0;
};
inline constexpr std::size_t kNewGaussian = std::numeric_limits<std::size_t>::max();

// mean_grad holds the mean screen-space center gradient norm of each
// Gaussian; extent is the scene radius used by the split test.
DensifyResult densify_and_prune(const GaussianSet& scene, std::span<const double> mean_grad,
                                const DensifyConfig& cfg, double extent, std::uint64_t seed);

// Mean PSNR and SSIM of renders against the views' images.
EvalRecord evaluate(const GaussianSet& scene, std::span<const ViewData> views, const RenderSettings& settings = {});

}  // namespace sparsesplat
