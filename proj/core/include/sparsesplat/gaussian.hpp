#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstddef>
#include <vector>

namespace sparsesplat {

// One 3D Gaussian primitive. Scale and opacity are stored in unconstrained
// form; the accessors apply exp and sigmoid.
struct Gaussian {
  Eigen::Vector3d mu = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rot = Eigen::Quaterniond::Identity();
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  double opacity_logit = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();

  Eigen::Vector3d scale() const { return log_scale.array().exp(); }
  double opacity() const;
  Eigen::Matrix3d covariance() const;
};

struct GaussianSet {
  std::vector<Gaussian> gaussians;

  std::size_t size() const noexcept { return gaussians.size(); }
  bool empty() const noexcept { return gaussians.empty(); }
  Gaussian& operator[](std::size_t i) { return gaussians[i]; }
  const Gaussian& operator[](std::size_t i) const { return gaussians[i]; }
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;  // RGB in [0, 1], same length as points

  std::size_t size() const noexcept { return points.size(); }
  void validate() const;
};

struct InitOptions {
  double initial_opacity = 0.1;
  int neighbors = 3;
  double min_scale = 1e-4;
  double max_scale = 1e2;
};

double sigmoid(double x);
double logit(double p);

// R S S^T R^T for S = diag(scale). The quaternion is normalized first.
Eigen::Matrix3d covariance_from_rs(const Eigen::Quaterniond& rot, const Eigen::Vector3d& scale);

// exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)). Throws NumericError when the
// covariance condition number exceeds 1e12.
double evaluate_gaussian(const Gaussian& g, const Eigen::Vector3d& x);

// One isotropic Gaussian per point, sized by the mean distance to its
// nearest neighbors.
GaussianSet init_from_pointcloud(const PointCloud& pc, const InitOptions& options = {});

}  // namespace sparsesplat
