#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "commands.hpp"
#include "sparsesplat/error.hpp"
#include "sparsesplat/parallel.hpp"

namespace cli = sparsesplat::cli;

namespace {

int fail(const std::string& category, const std::string& message) {
  std::fprintf(stderr, "error:%s: %s\n", category.c_str(), message.c_str());
  return category == "config" || category == "argument" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-view Gaussian splatting: synthesis, training, rendering and evaluation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  cli::InitArgs init;
  auto* c_init = app.add_subcommand("init", "Initialize Gaussians from a point cloud");
  c_init->add_option("--ply", init.ply, "Input point cloud")->required();
  c_init->add_option("--out", init.out, "Output scene PLY")->required();
  c_init->add_flag("--ascii", init.ascii, "Write ASCII PLY");

  cli::InterpArgs interp;
  auto* c_interp = app.add_subcommand("interp-poses", "Interpolate poses between consecutive views");
  c_interp->add_option("--poses", interp.poses, "Pose file")->required();
  c_interp->add_option("--count", interp.count, "Poses per pair, endpoints included")->required();
  c_interp->add_option("--out", interp.out, "Output directory")->required();

  cli::SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--gaussians", synth.gaussians, "Ground-truth Gaussian count");
  c_synth->add_option("--train-views", synth.train_views, "Training views on the arc");
  c_synth->add_option("--pseudo", synth.pseudo, "Pseudo views per training pair (0 disables)");
  c_synth->add_option("--eval-views", synth.eval_per_pair, "Held-out views per training pair");
  c_synth->add_option("--noise", synth.noise, "Positional noise of the initial point cloud");
  c_synth->add_option("--keep", synth.keep, "Fraction of points kept in the initial cloud");
  c_synth->add_option("--size", synth.size, "Image width and height");
  c_synth->add_option("--focal", synth.focal, "Focal length in pixels");
  c_synth->add_option("--out", synth.out, "Output directory")->required();

  cli::TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Optimize a scene");
  c_train->add_option("--scene", train.scene, "Initial scene or point cloud PLY")->required();
  c_train->add_option("--views", train.views, "Training view directory")->required();
  c_train->add_option("--bundle", train.bundle, "Pseudo-view bundle directory");
  c_train->add_option("--config", train.config, "Config file");
  c_train->add_option("--eval", train.eval, "Held-out view directory for periodic evaluation");
  c_train->add_option("--iters", train.iters, "Override total_iters");
  c_train->add_flag("--quiet", train.quiet, "No progress output");
  c_train->add_option("--out", train.out, "Output directory")->required();

  cli::RenderArgs render;
  auto* c_render = app.add_subcommand("render", "Render a scene from a pose file");
  c_render->add_option("--scene", render.scene, "Scene PLY")->required();
  c_render->add_option("--pose", render.pose, "Pose file")->required();
  c_render->add_option("--view", render.view, "View id (default: first line)");
  c_render->add_option("--out", render.out, "Output PNG")->required();
  c_render->add_option("--depth", render.depth, "Output depth PFM");

  cli::EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "PSNR and SSIM against a view directory");
  c_eval->add_option("--scene", eval.scene, "Scene PLY")->required();
  c_eval->add_option("--views", eval.views, "View directory")->required();

  cli::PyrArgs pyr;
  auto* c_pyr = app.add_subcommand("pyr", "Write the Laplacian pyramid of an image");
  c_pyr->add_option("--image", pyr.image, "Input PNG")->required();
  c_pyr->add_option("--levels", pyr.levels, "Band-pass levels")->required();
  c_pyr->add_option("--out", pyr.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("argument", e.what());
  }

  try {
    sparsesplat::set_thread_count(threads);
    if (*c_init) cli::run_init(init);
    else if (*c_interp) cli::run_interp(interp);
    else if (*c_synth) cli::run_synth(synth);
    else if (*c_train) cli::run_train(train);
    else if (*c_render) cli::run_render(render);
    else if (*c_eval) cli::run_eval(eval);
    else if (*c_pyr) cli::run_pyr(pyr);
  } catch (const sparsesplat::Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
