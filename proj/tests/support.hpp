#pragma once

// Random fixtures shared by the unit and acceptance tests.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "sparsesplat/gaussian.hpp"
#include "sparsesplat/geometry.hpp"
#include "sparsesplat/image.hpp"

namespace sparsesplat::testkit {

inline GaussianSet random_scene(std::mt19937_64& rng, int n, double box = 0.4) {
  std::uniform_real_distribution<double> sym(-1.0, 1.0), unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  GaussianSet s;
  for (int i = 0; i < n; ++i) {
    Gaussian g;
    g.mu = {box * sym(rng), box * sym(rng), box * sym(rng)};
    Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
    q.normalize();
    g.rot = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    for (int a = 0; a < 3; ++a) g.log_scale[a] = std::log(0.04 + 0.1 * unit(rng));
    g.opacity_logit = 2.0 * sym(rng);
    g.color = {unit(rng), unit(rng), unit(rng)};
    s.gaussians.push_back(g);
  }
  return s;
}

// Camera at distance ~2 looking at the origin from a random direction in
// front of the scene.
inline CameraView random_view(std::mt19937_64& rng, int size, const std::string& id = "view") {
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const Eigen::Vector3d eye(0.6 * sym(rng), 0.4 * sym(rng), -2.0 - 0.3 * sym(rng));
  const double f = 1.25 * size;
  return {{f, f, (size - 1) / 2.0, (size - 1) / 2.0, size, size}, Pose::look_at(eye, Eigen::Vector3d::Zero()), id};
}

inline Image random_image(std::mt19937_64& rng, int w, int h, int c) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(w, h, c);
  for (double& v : img.data()) v = unit(rng);
  return img;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (name + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace sparsesplat::testkit
