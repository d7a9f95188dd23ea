#include "sparsesplat/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>

#include "sparsesplat/error.hpp"
#include "sparsesplat/gradients.hpp"

namespace sparsesplat {

void LearningRates::validate() const {
  for (double r : {mu, mu_final, rot, log_scale, opacity, color}) {
    if (!(r > 0.0)) throw InvalidArgument("learning rates must be positive");
  }
}

void TrainConfig::validate() const {
  if (total_iters < 0) throw InvalidArgument("total_iters must be non-negative");
  lr.validate();
  loss.weights.validate();
  loss.mlcr.validate();
  ScheduleConfig s = loss.schedule;
  s.total_iters = std::max<long>(total_iters, 1);
  s.validate();
  if (real_weight < 1 || pseudo_weight < 0) throw InvalidArgument("view weights must be positive");
  if (densify.interval < 1) throw InvalidArgument("densify interval must be positive");
  if (densify.max_count < 1) throw InvalidArgument("max Gaussian count must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (eval_interval < 0) throw InvalidArgument("eval interval must be non-negative");
}

std::string TrainLog::to_jsonl() const {
  using nlohmann::json;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  std::string out;
  std::size_t e = 0;
  auto emit_eval = [&](const EvalRecord& r) {
    json j{{"type", "eval"}, {"iter", r.iteration}, {"psnr", finite_or_null(r.psnr)}, {"ssim", r.ssim}};
    json views = json::array();
    for (double p : r.view_psnr) views.push_back(finite_or_null(p));
    j["view_psnr"] = std::move(views);
    out += j.dump() + "\n";
  };
  for (const IterationRecord& r : iterations) {
    json j{{"type", "iter"},
           {"iter", r.iteration},
           {"view", r.view_id},
           {"pseudo", r.pseudo},
           {"l1", r.loss.l1},
           {"ssim_term", r.loss.ssim_term},
           {"mlcr", r.loss.mlcr},
           {"asmg", r.loss.asmg},
           {"asmg_masked", r.loss.asmg_masked},
           {"total", r.loss.total},
           {"gaussians", r.gaussian_count}};
    out += j.dump() + "\n";
    while (e < evals.size() && evals[e].iteration <= r.iteration) emit_eval(evals[e++]);
  }
  while (e < evals.size()) emit_eval(evals[e++]);
  return out;
}

DensifyResult densify_and_prune(const GaussianSet& scene, std::span<const double> mean_grad,
                                const DensifyConfig& cfg, double extent, std::uint64_t seed) {
  if (mean_grad.size() != scene.size()) throw InvalidArgument("densify: one gradient statistic per Gaussian");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto sample_offset = [&](const Gaussian& g) {
    const Eigen::Vector3d n(normal(rng), normal(rng), normal(rng));
    return Eigen::Vector3d(g.rot.normalized() * g.scale().cwiseProduct(n));
  };

  DensifyResult r;
  std::vector<Gaussian> grown;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Gaussian& g = scene[i];
    if (!(mean_grad[i] > cfg.grad_threshold)) {
      r.scene.gaussians.push_back(g);
      r.origin.push_back(i);
      continue;
    }
    if (g.scale().maxCoeff() > cfg.split_fraction * extent) {
      for (int k = 0; k < 2; ++k) {
        Gaussian child = g;
        child.mu = g.mu + sample_offset(g);
        child.log_scale = g.log_scale.array() - std::log(cfg.split_scale_divisor);
        grown.push_back(child);
      }
      ++r.split;
    } else {
      r.scene.gaussians.push_back(g);
      r.origin.push_back(i);
      Gaussian copy = g;
      copy.mu = g.mu + 0.5 * sample_offset(g);
      grown.push_back(copy);
      ++r.cloned;
    }
  }
  for (const Gaussian& g : grown) {
    r.scene.gaussians.push_back(g);
    r.origin.push_back(kNewGaussian);
  }

  // Opacity floor, then the count cap by dropping the faintest.
  std::vector<std::size_t> keep;
  keep.reserve(r.scene.size());
  for (std::size_t i = 0; i < r.scene.size(); ++i) {
    if (r.scene[i].opacity() >= cfg.min_opacity) keep.push_back(i);
  }
  if (keep.size() > cfg.max_count) {
    std::vector<std::size_t> by_opacity = keep;
    std::stable_sort(by_opacity.begin(), by_opacity.end(), [&](std::size_t a, std::size_t b) {
      return r.scene[a].opacity_logit < r.scene[b].opacity_logit;
    });
    std::vector<char> drop(r.scene.size(), 0);
    for (std::size_t k = 0; k < keep.size() - cfg.max_count; ++k) drop[by_opacity[k]] = 1;
    std::erase_if(keep, [&](std::size_t i) { return drop[i] != 0; });
  }
  if (keep.size() != r.scene.size()) {
    GaussianSet kept;
    std::vector<std::size_t> origin;
    for (std::size_t i : keep) {
      kept.gaussians.push_back(r.scene[i]);
      origin.push_back(r.origin[i]);
    }
    r.pruned = r.scene.size() - keep.size();
    r.scene = std::move(kept);
    r.origin = std::move(origin);
  }
  return r;
}

EvalRecord evaluate(const GaussianSet& scene, std::span<const ViewData> views, const RenderSettings& settings) {
  EvalRecord rec;
  if (views.empty()) return rec;
  for (const ViewData& v : views) {
    const RenderOutput out = render(scene, v.camera, settings);
    const double p = psnr(out.rgb, v.image);
    rec.view_psnr.push_back(p);
    rec.psnr += p;
    rec.ssim += ssim(out.rgb, v.image);
  }
  rec.psnr /= static_cast<double>(views.size());
  rec.ssim /= static_cast<double>(views.size());
  return rec;
}

namespace {

using ParamBlock = std::array<double, kParamsPerGaussian>;

struct ViewRef {
  const ViewData* data = nullptr;
  bool pseudo = false;
  std::optional<Mask> region;
  bool has_depth = false;
};

// Learning rate for each slot of a per-Gaussian parameter block.
ParamBlock slot_rates(const LearningRates& lr, double mu_rate) {
  ParamBlock r{};
  for (int k = 0; k < 3; ++k) r[k] = mu_rate;
  for (int k = 3; k < 7; ++k) r[k] = lr.rot;
  for (int k = 7; k < 10; ++k) r[k] = lr.log_scale;
  r[10] = lr.opacity;
  for (int k = 11; k < 14; ++k) r[k] = lr.color;
  return r;
}

ParamBlock pack(const Gaussian& g) {
  return {g.mu.x(), g.mu.y(), g.mu.z(), g.rot.w(), g.rot.x(), g.rot.y(), g.rot.z(),
          g.log_scale.x(), g.log_scale.y(), g.log_scale.z(), g.opacity_logit,
          g.color.x(), g.color.y(), g.color.z()};
}

void unpack(const ParamBlock& p, Gaussian& g) {
  g.mu = {p[0], p[1], p[2]};
  g.rot = Eigen::Quaterniond(p[3], p[4], p[5], p[6]).normalized();
  g.log_scale = {p[7], p[8], p[9]};
  g.opacity_logit = p[10];
  g.color = Eigen::Vector3d(p[11], p[12], p[13]).cwiseMax(0.0).cwiseMin(1.0);
}

double scene_extent(const GaussianSet& scene) {
  if (scene.empty()) return 1.0;
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& g : scene.gaussians) c += g.mu;
  c /= static_cast<double>(scene.size());
  double r = 0.0;
  for (const auto& g : scene.gaussians) r = std::max(r, (g.mu - c).norm());
  return r > 0.0 ? r : 1.0;
}

void check_finite(const LossBreakdown& b, long t, const std::string& view) {
  const std::pair<const char*, double> terms[] = {
      {"l1", b.l1}, {"ssim", b.ssim_term}, {"mlcr", b.mlcr}, {"asmg", b.asmg}, {"total", b.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw NumericError(std::string("loss term '") + name + "' is not finite at iteration " + std::to_string(t) +
                         " (view " + view + ")");
    }
  }
}

}  // namespace

TrainResult train(const GaussianSet& initial, std::span<const ViewData> train_views,
                  std::span<const ViewData> pseudo_views, const TrainConfig& cfg,
                  std::span<const ViewData> eval_views, const TrainHooks& hooks) {
  cfg.validate();
  if (train_views.empty()) throw InvalidArgument("train: at least one training view is required");
  TrainResult result{initial, {}};
  const long T = cfg.total_iters;
  if (T == 0) return result;

  LossOptions loss_options = cfg.loss;
  loss_options.schedule.total_iters = T;

  auto make_refs = [&](std::span<const ViewData> views, bool pseudo) {
    std::vector<ViewRef> refs;
    for (const ViewData& v : views) {
      ViewRef r{&v, pseudo, std::nullopt, false};
      const bool regularized = pseudo || loss_options.regularize_real_views;
      if (regularized && v.depth) {
        const bool any_finite = std::any_of(v.depth->data().begin(), v.depth->data().end(),
                                            [](double d) { return std::isfinite(d); });
        if (any_finite) {
          r.has_depth = true;
          r.region = spatial_mask(*v.depth, loss_options.schedule.mask_threshold);
        }
      }
      refs.push_back(std::move(r));
    }
    return refs;
  };
  const std::vector<ViewRef> real = make_refs(train_views, false);
  const std::vector<ViewRef> pseudo = make_refs(pseudo_views, true);

  // Round-robin: real_weight real views, then pseudo_weight pseudo views.
  std::vector<const ViewRef*> cycle;
  if (pseudo.empty() || cfg.pseudo_weight == 0) {
    for (const auto& r : real) cycle.push_back(&r);
  } else {
    const std::size_t rw = static_cast<std::size_t>(cfg.real_weight);
    const std::size_t pw = static_cast<std::size_t>(cfg.pseudo_weight);
    const std::size_t rounds = std::max((real.size() + rw - 1) / rw, (pseudo.size() + pw - 1) / pw);
    std::size_t ri = 0, pi = 0;
    for (std::size_t round = 0; round < rounds; ++round) {
      for (std::size_t k = 0; k < rw; ++k) cycle.push_back(&real[ri++ % real.size()]);
      for (std::size_t k = 0; k < pw; ++k) cycle.push_back(&pseudo[pi++ % pseudo.size()]);
    }
  }

  GaussianSet& scene = result.scene;
  std::vector<ParamBlock> m1(scene.size(), ParamBlock{}), m2(scene.size(), ParamBlock{});
  std::vector<double> grad_sum(scene.size(), 0.0);
  std::vector<int> grad_count(scene.size(), 0);
  const double extent = scene_extent(initial);
  const long densify_stop = static_cast<long>(cfg.densify.stop_fraction * static_cast<double>(T));

  for (long t = 0; t < T; ++t) {
    const ViewRef& view = *cycle[static_cast<std::size_t>(t) % cycle.size()];
    const CameraView& cam = view.data->camera;

    const RenderOutput out = render(scene, cam, cfg.render);
    LossContext ctx;
    ctx.pseudo_view = view.pseudo;
    ctx.iteration = static_cast<double>(t);
    if (view.has_depth) {
      ctx.reference_depth = &*view.data->depth;
      ctx.region = &*view.region;
    }
    const TotalLoss loss = total_loss_with_grad(out, view.data->image, ctx, loss_options);
    check_finite(loss.breakdown, t, cam.id);

    const GaussianGrads grads = backward(scene, cam, out, loss.d_rgb, loss.d_depth, cfg.render);
    if (!grads.all_finite()) {
      throw NumericError("gradient is not finite at iteration " + std::to_string(t) + " (view " + cam.id + ")");
    }
    const std::vector<double> flat = flatten_gradients(grads);

    for (std::size_t i = 0; i < scene.size(); ++i) {
      if (!grads.visible[i]) continue;
      grad_sum[i] += grads.d_center_px[i].norm();
      grad_count[i] += 1;
    }

    // Parameter update.
    const double r = static_cast<double>(t) / static_cast<double>(std::max<long>(T - 1, 1));
    const double mu_rate = std::exp(std::log(cfg.lr.mu) * (1.0 - r) + std::log(cfg.lr.mu_final) * r);
    const ParamBlock rates = slot_rates(cfg.lr, mu_rate);
    const double step = static_cast<double>(t + 1);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, step);
    for (std::size_t i = 0; i < scene.size(); ++i) {
      ParamBlock p = pack(scene[i]);
      const double* g = flat.data() + i * kParamsPerGaussian;
      for (int k = 0; k < kParamsPerGaussian; ++k) {
        if (cfg.optimizer == Optimizer::Adam) {
          m1[i][k] = cfg.adam_beta1 * m1[i][k] + (1.0 - cfg.adam_beta1) * g[k];
          m2[i][k] = cfg.adam_beta2 * m2[i][k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
          const double mhat = m1[i][k] / bc1, vhat = m2[i][k] / bc2;
          p[k] -= rates[k] * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
        } else {
          m1[i][k] = cfg.momentum * m1[i][k] + g[k];
          p[k] -= rates[k] * m1[i][k];
        }
      }
      unpack(p, scene[i]);
    }

    IterationRecord rec{t, cam.id, view.pseudo, loss.breakdown, scene.size()};
    if (hooks.progress) hooks.progress(rec);
    result.log.iterations.push_back(std::move(rec));

    const long done = t + 1;
    if (cfg.densify.enabled && done >= cfg.densify.start_iter && done <= densify_stop &&
        done % cfg.densify.interval == 0) {
      std::vector<double> mean(scene.size(), 0.0);
      for (std::size_t i = 0; i < scene.size(); ++i) {
        if (grad_count[i] > 0) mean[i] = grad_sum[i] / grad_count[i];
      }
      DensifyResult d = densify_and_prune(scene, mean, cfg.densify, extent,
                                          cfg.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(done));
      std::vector<ParamBlock> n1(d.scene.size(), ParamBlock{}), n2(d.scene.size(), ParamBlock{});
      for (std::size_t i = 0; i < d.scene.size(); ++i) {
        if (d.origin[i] == kNewGaussian) continue;
        n1[i] = m1[d.origin[i]];
        n2[i] = m2[d.origin[i]];
      }
      scene = std::move(d.scene);
      m1 = std::move(n1);
      m2 = std::move(n2);
      grad_sum.assign(scene.size(), 0.0);
      grad_count.assign(scene.size(), 0);
    }

    const bool at_eval = (cfg.eval_interval > 0 && done % cfg.eval_interval == 0) || done == T;
    if (at_eval) {
      if (!eval_views.empty()) {
        EvalRecord e = evaluate(scene, eval_views, cfg.render);
        e.iteration = t;
        result.log.evals.push_back(std::move(e));
      }
      if (hooks.checkpoint) hooks.checkpoint(t, scene);
    }
  }
  return result;
}

}  // namespace sparsesplat
