#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <span>
#include <string>
#include <vector>

namespace sparsesplat {

// Pinhole intrinsics in pixels. Pixel (x, y) has its center at the integer
// coordinate (x, y).
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Throws InvalidArgument when any invariant is violated.
  void validate() const;

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

// Rigid world-to-camera transform: x_cam = R * x_world + t.
// The quaternion is kept unit-norm by every constructor.
class Pose {
 public:
  Pose() = default;
  Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation);

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t) { return {Eigen::Quaterniond::Identity(), t}; }

  // Camera at `eye` looking at `target`; camera +z is the viewing direction,
  // +y points down in the image.
  static Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                      const Eigen::Vector3d& world_up = Eigen::Vector3d::UnitY());

  const Eigen::Quaterniond& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation_ * x + translation_; }
  Eigen::Vector3d camera_center() const { return -(rotation_.conjugate() * translation_); }

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.rotation_.coeffs() == b.rotation_.coeffs() && a.translation_ == b.translation_;
  }

 private:
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

struct CameraView {
  Intrinsics intrinsics;
  Pose pose;
  std::string id;

  int width() const noexcept { return intrinsics.width; }
  int height() const noexcept { return intrinsics.height; }
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;  // camera-frame depth; <= 0 behind the camera
};

Projection project_point(const CameraView& view, const Eigen::Vector3d& x);

// a ∘ b: applies b first, then a.
Pose compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& p);

// Geodesic angle (radians) of the relative rotation between two quaternions.
double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b);

// Spherical interpolation along the shorter arc; antipodal inputs describe the
// same rotation and give the same result.
Eigen::Quaterniond slerp(Eigen::Quaterniond a, const Eigen::Quaterniond& b, double t);

// Clamped uniform B-spline of degree min(3, n-1) through `controls`,
// evaluated at u in [0, 1]. Passes through the first and last control point.
Eigen::Vector3d clamped_bspline(std::span<const Eigen::Vector3d> controls, double u);

// `count` poses along a smooth path through `keys` with uniform parameter
// spacing. The world-to-camera translations follow the clamped B-spline of
// the key translations, rotations are piecewise SLERP between consecutive
// keys. The first and last output pose equal the first and last key exactly.
std::vector<Pose> sample_trajectory(std::span<const Pose> keys, int count);

// `count` poses from a to b, both endpoints included.
std::vector<Pose> interpolate_trajectory(const Pose& a, const Pose& b, int count);

}  // namespace sparsesplat
