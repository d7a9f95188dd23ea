#include "sparsesplat/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "sparsesplat/error.hpp"

namespace sparsesplat {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double Gaussian::opacity() const { return sigmoid(opacity_logit); }

Eigen::Matrix3d Gaussian::covariance() const { return covariance_from_rs(rot, scale()); }

void PointCloud::validate() const {
  if (points.size() != colors.size()) throw InvalidArgument("point cloud: points/colors length mismatch");
  for (const auto& p : points) {
    if (!p.allFinite()) throw InvalidArgument("point cloud: non-finite coordinate");
  }
}

Eigen::Matrix3d covariance_from_rs(const Eigen::Quaterniond& rot, const Eigen::Vector3d& scale) {
  const Eigen::Matrix3d m = rot.normalized().toRotationMatrix() * scale.asDiagonal();
  return m * m.transpose();
}

double evaluate_gaussian(const Gaussian& g, const Eigen::Vector3d& x) {
  const Eigen::Vector3d s = g.scale();
  const double cond = (s.maxCoeff() * s.maxCoeff()) / (s.minCoeff() * s.minCoeff());
  if (!(cond <= 1e12)) throw NumericError("evaluate_gaussian: covariance condition number exceeds 1e12");
  // Sigma^-1 = R S^-2 R^T, so the Mahalanobis term is |S^-1 R^T (x - mu)|^2.
  const Eigen::Vector3d local = g.rot.normalized().conjugate() * (x - g.mu);
  const double m2 = local.cwiseQuotient(s).squaredNorm();
  return std::exp(-0.5 * m2);
}

namespace {

// Uniform hash grid for k-nearest-neighbor queries on a point set.
class NeighborGrid {
 public:
  explicit NeighborGrid(const std::vector<Eigen::Vector3d>& points) : points_(points) {
    Eigen::Vector3d lo = points[0], hi = points[0];
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    origin_ = lo;
    const double extent = std::max((hi - lo).maxCoeff(), 1e-9);
    const double cells_per_axis = std::max(1.0, std::cbrt(static_cast<double>(points.size()) / 2.0));
    cell_ = extent / cells_per_axis;
    max_ring_ = static_cast<int>(std::ceil(cells_per_axis)) + 1;
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(cell_of(points[i]))].push_back(i);
  }

  // Mean distance from point i to its k nearest other points; 0 if it has none.
  double mean_knn_distance(std::size_t i, int k) const {
    const Eigen::Vector3d& p = points_[i];
    const Eigen::Vector3i c = cell_of(p);
    std::vector<double> best;  // sorted ascending squared distances, size <= k
    for (int ring = 0; ring <= max_ring_; ++ring) {
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const std::int64_t cell_key = key(c + Eigen::Vector3i(dx, dy, dz));
            if (cell_key < 0) continue;
            const auto it = cells_.find(cell_key);
            if (it == cells_.end()) continue;
            for (std::size_t j : it->second) {
              if (j == i) continue;
              const double d2 = (points_[j] - p).squaredNorm();
              if (static_cast<int>(best.size()) < k || d2 < best.back()) {
                best.insert(std::upper_bound(best.begin(), best.end(), d2), d2);
                if (static_cast<int>(best.size()) > k) best.pop_back();
              }
            }
          }
        }
      }
      // Every point not yet visited is at least ring * cell_ away.
      const double reach = ring * cell_;
      if (static_cast<int>(best.size()) == k && best.back() <= reach * reach) break;
    }
    if (best.empty()) return 0.0;
    double sum = 0.0;
    for (double d2 : best) sum += std::sqrt(d2);
    return sum / static_cast<double>(best.size());
  }

 private:
  Eigen::Vector3i cell_of(const Eigen::Vector3d& p) const {
    return ((p - origin_) / cell_).array().floor().cast<int>();
  }
  // Exact cell index; -1 for cells outside the grid.
  std::int64_t key(const Eigen::Vector3i& c) const {
    const std::int64_t n = max_ring_ + 1;
    if ((c.array() < 0).any() || (c.array() >= n).any()) return -1;
    return (static_cast<std::int64_t>(c.x()) * n + c.y()) * n + c.z();
  }
  const std::vector<Eigen::Vector3d>& points_;
  Eigen::Vector3d origin_;
  double cell_ = 1.0;
  int max_ring_ = 1;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

GaussianSet init_from_pointcloud(const PointCloud& pc, const InitOptions& options) {
  if (pc.points.empty()) throw InvalidArgument("init_from_pointcloud: empty point cloud");
  pc.validate();

  const NeighborGrid grid(pc.points);
  GaussianSet set;
  set.gaussians.reserve(pc.size());
  const double opacity_logit = logit(options.initial_opacity);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double d = grid.mean_knn_distance(i, options.neighbors);
    const double s = std::clamp(d, options.min_scale, options.max_scale);
    Gaussian g;
    g.mu = pc.points[i];
    g.color = pc.colors[i];
    g.log_scale = Eigen::Vector3d::Constant(std::log(s));
    g.opacity_logit = opacity_logit;
    set.gaussians.push_back(g);
  }
  return set;
}

}  // namespace sparsesplat
