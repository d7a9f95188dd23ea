#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace sparsesplat::cli {

struct InitArgs {
  std::filesystem::path ply, out;
  bool ascii = false;
};

struct InterpArgs {
  std::filesystem::path poses, out;
  int count = 5;
};

struct SynthArgs {
  std::uint64_t seed = 1;
  int gaussians = 300;
  int train_views = 2;
  int pseudo = 5;
  int eval_per_pair = 4;
  double noise = 0.01;
  double keep = 1.0;
  int size = 64;
  double focal = 80.0;
  std::filesystem::path out;
};

struct TrainArgs {
  std::filesystem::path scene, views, bundle, config, out, eval;
  std::optional<long> iters;
  bool quiet = false;
};

struct RenderArgs {
  std::filesystem::path scene, pose, out, depth;
  std::string view;
};

struct EvalArgs {
  std::filesystem::path scene, views;
};

struct PyrArgs {
  std::filesystem::path image, out;
  int levels = 3;
};

void run_init(const InitArgs& a);
void run_interp(const InterpArgs& a);
void run_synth(const SynthArgs& a);
void run_train(const TrainArgs& a);
void run_render(const RenderArgs& a);
void run_eval(const EvalArgs& a);
void run_pyr(const PyrArgs& a);

}  // namespace sparsesplat::cli
