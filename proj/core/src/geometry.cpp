#include "sparsesplat/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "sparsesplat/error.hpp"

namespace sparsesplat {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidArgument("principal point outside the image");
  }
}

Pose::Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation.normalized()), translation_(translation) {
  const double n = rotation.norm();
  if (!(n > 1e-12) || !std::isfinite(n) || !translation.allFinite()) {
    throw InvalidArgument("pose needs a finite translation and a finite, non-zero quaternion");
  }
}

Pose Pose::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                   const Eigen::Vector3d& world_up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(world_up);
  if (right.norm() < 1e-12) throw InvalidArgument("look_at: up vector parallel to view direction");
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  return {Eigen::Quaterniond(r), -(r * eye)};
}

Projection project_point(const CameraView& view, const Eigen::Vector3d& x) {
  const Eigen::Vector3d p = view.pose.apply(x);
  const auto& k = view.intrinsics;
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy, p.z()};
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

Pose pose_inverse(const Pose& p) {
  const Eigen::Quaterniond inv = p.rotation().conjugate();
  return {inv, -(inv * p.translation())};
}

double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const double d = std::abs(a.normalized().dot(b.normalized()));
  // atan2 form stays accurate near zero angle where acos loses precision.
  const Eigen::Quaterniond rel = a.normalized().conjugate() * b.normalized();
  return 2.0 * std::atan2(rel.vec().norm(), std::min(1.0, d));
}

Eigen::Quaterniond slerp(Eigen::Quaterniond a, const Eigen::Quaterniond& b, double t) {
  a.normalize();
  Eigen::Quaterniond bb = b.normalized();
  if (a.dot(bb) < 0.0) bb.coeffs() = -bb.coeffs();
  return a.slerp(t, bb).normalized();
}

Eigen::Vector3d clamped_bspline(std::span<const Eigen::Vector3d> controls, double u) {
  const int n = static_cast<int>(controls.size());
  if (n == 0) throw InvalidArgument("clamped_bspline: no control points");
  if (n == 1) return controls[0];
  u = std::clamp(u, 0.0, 1.0);
  if (u >= 1.0) return controls[n - 1];

  const int degree = std::min(3, n - 1);
  // Clamped uniform knots: degree+1 zeros, uniform interior, degree+1 ones.
  const int num_knots = n + degree + 1;
  std::vector<double> knots(num_knots);
  const int interior = n - degree - 1;
  for (int i = 0; i < num_knots; ++i) {
    if (i <= degree) {
      knots[i] = 0.0;
    } else if (i >= n) {
      knots[i] = 1.0;
    } else {
      knots[i] = static_cast<double>(i - degree) / (interior + 1);
    }
  }
  int span = degree;
  while (span < n - 1 && u >= knots[span + 1]) ++span;

  // de Boor recursion.
  std::vector<Eigen::Vector3d> d(degree + 1);
  for (int j = 0; j <= degree; ++j) d[j] = controls[j + span - degree];
  for (int r = 1; r <= degree; ++r) {
    for (int j = degree; j >= r; --j) {
      const int i = j + span - degree;
      const double denom = knots[i + degree - r + 1] - knots[i];
      const double alpha = denom > 0.0 ? (u - knots[i]) / denom : 0.0;
      d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
    }
  }
  return d[degree];
}

std::vector<Pose> sample_trajectory(std::span<const Pose> keys, int count) {
  if (count < 2) throw InvalidArgument("trajectory needs at least 2 samples");
  if (keys.size() < 2) throw InvalidArgument("trajectory needs at least 2 key poses");

  std::vector<Eigen::Vector3d> translations;
  translations.reserve(keys.size());
  for (const auto& k : keys) translations.push_back(k.translation());

  const int segments = static_cast<int>(keys.size()) - 1;
  std::vector<Pose> out;
  out.reserve(count);
  out.push_back(keys.front());
  for (int i = 1; i < count - 1; ++i) {
    const double u = static_cast<double>(i) / (count - 1);
    const double s = u * segments;
    const int seg = std::min(segments - 1, static_cast<int>(std::floor(s)));
    const Eigen::Quaterniond q = slerp(keys[seg].rotation(), keys[seg + 1].rotation(), s - seg);
    out.emplace_back(q, clamped_bspline(translations, u));
  }
  out.push_back(keys.back());
  return out;
}

std::vector<Pose> interpolate_trajectory(const Pose& a, const Pose& b, int count) {
  const Pose keys[] = {a, b};
  return sample_trajectory(keys, count);
}

}  // namespace sparsesplat
