#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <variant>

#include "sparsesplat/error.hpp"
#include "sparsesplat/io/config.hpp"
#include "sparsesplat/io/files.hpp"
#include "sparsesplat/io/image_io.hpp"
#include "sparsesplat/io/ply.hpp"
#include "sparsesplat/io/views.hpp"
#include "sparsesplat/losses.hpp"
#include "sparsesplat/pyramid.hpp"
#include "sparsesplat/renderer.hpp"
#include "sparsesplat/synthetic.hpp"
#include "sparsesplat/trainer.hpp"

namespace sparsesplat::cli {

namespace fs = std::filesystem;

namespace {

GaussianSet load_scene_or_init(const fs::path& path) {
  io::PlyContent content = io::load_ply(path);
  if (auto* scene = std::get_if<GaussianSet>(&content)) return std::move(*scene);
  return init_from_pointcloud(std::get<PointCloud>(content));
}

std::string format_db(double v) {
  char buf[32];
  if (std::isinf(v)) return "inf";
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

void run_init(const InitArgs& a) {
  const PointCloud pc = io::load_point_cloud(a.ply);
  const GaussianSet scene = init_from_pointcloud(pc);
  io::save_gaussians(a.out, scene, a.ascii ? io::PlyFormat::Ascii : io::PlyFormat::BinaryLittleEndian);
  std::printf("%zu Gaussians written to %s\n", scene.size(), a.out.string().c_str());
}

void run_interp(const InterpArgs& a) {
  if (a.count < 2) throw InvalidArgument("--count must be at least 2");
  const std::vector<CameraView> keys = io::load_pose_file(a.poses);
  if (keys.size() < 2) throw InvalidArgument("pose file needs at least two views");
  std::vector<CameraView> out;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    const auto poses = interpolate_trajectory(keys[i].pose, keys[i + 1].pose, a.count);
    for (std::size_t k = 0; k < poses.size(); ++k) {
      out.push_back({keys[i].intrinsics, poses[k], keys[i].id + "-" + keys[i + 1].id + "-" + std::to_string(k)});
    }
  }
  fs::create_directories(a.out);
  io::save_pose_file(a.out / "poses.txt", out);
  std::printf("%zu poses written to %s\n", out.size(), (a.out / "poses.txt").string().c_str());
}

void run_synth(const SynthArgs& a) {
  SyntheticOptions o;
  o.seed = a.seed;
  o.gaussians = a.gaussians;
  o.train_views = a.train_views;
  o.pseudo_per_pair = a.pseudo;
  o.eval_per_pair = a.eval_per_pair;
  o.noise = a.noise;
  o.keep_fraction = a.keep;
  o.width = o.height = a.size;
  o.focal = a.focal;
  const SyntheticScene s = generate_synthetic(o);
  fs::create_directories(a.out);
  io::save_point_cloud(a.out / "init.ply", s.initial);
  io::save_gaussians(a.out / "gt_scene.ply", s.ground_truth);
  io::save_views(a.out / "train", s.train);
  io::save_bundle(a.out / "pseudo", s.pseudo);
  io::save_views(a.out / "eval", s.eval);
  std::printf("synthetic scene: %zu Gaussians, %zu train, %zu pseudo, %zu eval views in %s\n",
              s.ground_truth.size(), s.train.views.size(), s.pseudo.views.size(), s.eval.views.size(),
              a.out.string().c_str());
}

void run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : io::load_config(a.config);
  if (a.iters) {
    cfg.total_iters = *a.iters;
    cfg.validate();
  }
  const GaussianSet initial = load_scene_or_init(a.scene);
  const ViewSet views = io::load_views(a.views);
  const PseudoViewBundle bundle = a.bundle.empty() ? PseudoViewBundle{} : io::load_bundle(a.bundle);
  const ViewSet eval = a.eval.empty() ? ViewSet{} : io::load_views(a.eval);

  fs::create_directories(a.out / "checkpoints");
  io::write_file(a.out / "config.txt", io::format_config(cfg));

  TrainHooks hooks;
  hooks.checkpoint = [&](long t, const GaussianSet& scene) {
    char name[64];
    std::snprintf(name, sizeof(name), "iter_%06ld.ply", t + 1);
    io::save_gaussians(a.out / "checkpoints" / name, scene);
  };
  if (!a.quiet) {
    hooks.progress = [&](const IterationRecord& r) {
      if ((r.iteration + 1) % 500 == 0 || r.iteration + 1 == cfg.total_iters) {
        std::fprintf(stderr, "iter %ld/%ld loss %.5f gaussians %zu\n", r.iteration + 1, cfg.total_iters,
                     r.loss.total, r.gaussian_count);
      }
    };
  }
  const TrainResult result = train(initial, views.views, bundle.views, cfg, eval.views, hooks);
  io::save_gaussians(a.out / "scene.ply", result.scene);
  io::write_file(a.out / "train_log.jsonl", result.log.to_jsonl());
  if (!result.log.evals.empty()) {
    const EvalRecord& e = result.log.evals.back();
    std::printf("final eval: psnr %s ssim %.4f\n", format_db(e.psnr).c_str(), e.ssim);
  }
  std::printf("%zu Gaussians written to %s\n", result.scene.size(), (a.out / "scene.ply").string().c_str());
}

void run_render(const RenderArgs& a) {
  const GaussianSet scene = io::load_gaussians(a.scene);
  const std::vector<CameraView> views = io::load_pose_file(a.pose);
  if (views.empty()) throw InvalidArgument("pose file has no views");
  const CameraView* view = &views.front();
  if (!a.view.empty()) {
    view = nullptr;
    for (const auto& v : views) {
      if (v.id == a.view) view = &v;
    }
    if (!view) throw InvalidArgument("no view '" + a.view + "' in " + a.pose.string());
  }
  const RenderOutput out = render(scene, *view);
  io::save_png(a.out, out.rgb);
  if (!a.depth.empty()) io::save_pfm(a.depth, out.depth);
}

void run_eval(const EvalArgs& a) {
  const GaussianSet scene = io::load_gaussians(a.scene);
  const ViewSet views = io::load_views(a.views);
  if (views.views.empty()) throw InvalidArgument("view directory has no views");
  const EvalRecord rec = evaluate(scene, views.views);
  std::printf("%-24s %10s %8s\n", "view", "psnr", "ssim");
  for (std::size_t i = 0; i < views.views.size(); ++i) {
    const RenderOutput out = render(scene, views.views[i].camera);
    std::printf("%-24s %10s %8.4f\n", views.views[i].camera.id.c_str(), format_db(rec.view_psnr[i]).c_str(),
                ssim(out.rgb, views.views[i].image));
  }
  std::printf("%-24s %10s %8.4f\n", "mean", format_db(rec.psnr).c_str(), rec.ssim);
}

void run_pyr(const PyrArgs& a) {
  const Image img = io::load_png(a.image);
  const LaplacianPyramid pyr = laplacian_decompose(img, a.levels);
  fs::create_directories(a.out);
  for (int i = 0; i < pyr.num_levels(); ++i) {
    const std::string stem = "level_" + std::to_string(i);
    io::save_pfm(a.out / (stem + ".pfm"), pyr.levels[i]);
    Image preview = pyr.levels[i];
    for (double& v : preview.data()) v += 0.5;
    io::save_png(a.out / (stem + ".png"), preview);
  }
  io::save_pfm(a.out / "top.pfm", pyr.top);
  io::save_png(a.out / "top.png", pyr.top);
  std::printf("%d band-pass levels and the residual written to %s\n", pyr.num_levels(), a.out.string().c_str());
}

}  // namespace sparsesplat::cli
