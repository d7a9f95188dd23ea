#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "sparsesplat/gradients.hpp"
#include "sparsesplat/losses.hpp"
#include "sparsesplat/parallel.hpp"
#include "sparsesplat/pyramid.hpp"
#include "sparsesplat/renderer.hpp"
#include "sparsesplat/synthetic.hpp"
#include "sparsesplat/trainer.hpp"

using namespace sparsesplat;

namespace {

GaussianSet bench_scene(int n, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sym(-0.5, 0.5), unit(0.0, 1.0);
  GaussianSet s;
  for (int i = 0; i < n; ++i) {
    Gaussian g;
    g.mu = {sym(rng), sym(rng), sym(rng)};
    g.rot = Eigen::Quaterniond(unit(rng), sym(rng), sym(rng), sym(rng)).normalized();
    g.log_scale = Eigen::Vector3d::Constant(std::log(0.02 + 0.06 * unit(rng)));
    g.opacity_logit = 2.0 * sym(rng);
    g.color = {unit(rng), unit(rng), unit(rng)};
    s.gaussians.push_back(g);
  }
  return s;
}

CameraView bench_view(int size) {
  const double f = 1.25 * size;
  return {{f, f, (size - 1) / 2.0, (size - 1) / 2.0, size, size},
          Pose::look_at({0.3, -0.2, -2.5}, Eigen::Vector3d::Zero()), "bench"};
}

Image random_image(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(w, h, c);
  for (double& v : img.data()) v = unit(rng);
  return img;
}

void apply_threads(const benchmark::State& state, int arg_index) {
  set_thread_count(static_cast<int>(state.range(arg_index)));
}

}  // namespace

// Args: Gaussian count, image size, threads.
static void BM_Render(benchmark::State& state) {
  apply_threads(state, 2);
  const GaussianSet scene = bench_scene(static_cast<int>(state.range(0)));
  const CameraView view = bench_view(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(render(scene, view));
  state.SetItemsProcessed(state.iterations() * view.width() * view.height());
}
BENCHMARK(BM_Render)->Args({300, 64, 1})->Args({1000, 128, 1})->Args({1000, 128, 0})->Unit(benchmark::kMillisecond);

static void BM_RenderReference(benchmark::State& state) {
  const GaussianSet scene = bench_scene(static_cast<int>(state.range(0)));
  const CameraView view = bench_view(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(render_reference(scene, view));
}
BENCHMARK(BM_RenderReference)->Args({300, 64})->Unit(benchmark::kMillisecond);

static void BM_Backward(benchmark::State& state) {
  apply_threads(state, 2);
  const GaussianSet scene = bench_scene(static_cast<int>(state.range(0)));
  const CameraView view = bench_view(static_cast<int>(state.range(1)));
  const RenderOutput out = render(scene, view);
  const Image d_rgb = random_image(view.width(), view.height(), 3, 2);
  const Image d_depth = random_image(view.width(), view.height(), 1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(backward(scene, view, out, d_rgb, d_depth));
}
BENCHMARK(BM_Backward)->Args({300, 64, 1})->Args({1000, 128, 1})->Args({1000, 128, 0})->Unit(benchmark::kMillisecond);

static void BM_TotalLoss(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RenderOutput out{random_image(n, n, 3, 4), random_image(n, n, 1, 5), random_image(n, n, 1, 6)};
  const Image target = random_image(n, n, 3, 7), ref = random_image(n, n, 1, 8);
  const LossContext ctx{true, &ref, nullptr, 3000.0};
  for (auto _ : state) benchmark::DoNotOptimize(total_loss_with_grad(out, target, ctx));
}
BENCHMARK(BM_TotalLoss)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_LaplacianDecompose(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Image img = random_image(n, n, 3, 9);
  for (auto _ : state) benchmark::DoNotOptimize(laplacian_decompose(img, 3));
}
BENCHMARK(BM_LaplacianDecompose)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

// A short training run on the default synthetic scene, per iteration.
static void BM_TrainIterations(benchmark::State& state) {
  set_thread_count(1);
  const SyntheticScene s = generate_synthetic(SyntheticOptions{});
  const GaussianSet init = init_from_pointcloud(s.initial);
  TrainConfig cfg;
  cfg.total_iters = state.range(0);
  cfg.eval_interval = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train(init, s.train.views, s.pseudo.views, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.total_iters);
}
BENCHMARK(BM_TrainIterations)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
