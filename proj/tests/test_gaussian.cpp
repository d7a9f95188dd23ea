#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sparsesplat/error.hpp"
#include "sparsesplat/gaussian.hpp"
#include "support.hpp"

using namespace sparsesplat;

TEST(Covariance, IdentityRotationUnitScale) {
  EXPECT_TRUE(covariance_from_rs(Eigen::Quaterniond::Identity(), {1, 1, 1}).isApprox(Eigen::Matrix3d::Identity()));
}

TEST(Covariance, AxisScale) {
  const Eigen::Matrix3d s = covariance_from_rs(Eigen::Quaterniond::Identity(), {2, 1, 1});
  EXPECT_TRUE(s.isApprox(Eigen::Vector3d(4, 1, 1).asDiagonal().toDenseMatrix()));
}

TEST(Covariance, RotatedAboutZ) {
  // Explicit conjugation R diag(4,1,1) R^T with R = 90 degrees about z.
  Eigen::Matrix3d r;
  r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d expected = r * Eigen::Vector3d(4, 1, 1).asDiagonal() * r.transpose();
  const Eigen::Quaterniond q(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()));
  const Eigen::Matrix3d s = covariance_from_rs(q, {2, 1, 1});
  EXPECT_LT((s - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(s(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(s(1, 1), 4.0, 1e-12);
}

TEST(Covariance, RandomProperties) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    const Eigen::Vector3d s(u(rng), u(rng), u(rng));
    const Eigen::Matrix3d c = covariance_from_rs(q, s);
    EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
    std::array<double, 3> ev{es.eigenvalues()[0], es.eigenvalues()[1], es.eigenvalues()[2]};
    std::array<double, 3> sq{s[0] * s[0], s[1] * s[1], s[2] * s[2]};
    std::sort(ev.begin(), ev.end());
    std::sort(sq.begin(), sq.end());
    EXPECT_GE(ev[0], -1e-12);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(ev[k], sq[k], 1e-9 * std::max(1.0, sq[k]));
    const double det = std::pow(s[0] * s[1] * s[2], 2);
    EXPECT_NEAR(c.determinant() / det, 1.0, 1e-9);
  }
}

TEST(Evaluate, PeakAtCenter) {
  Gaussian g;
  g.mu = {1, 2, 3};
  EXPECT_DOUBLE_EQ(evaluate_gaussian(g, g.mu), 1.0);
}

TEST(Evaluate, UnitDistanceIdentityCovariance) {
  Gaussian g;
  EXPECT_NEAR(evaluate_gaussian(g, {0, 1, 0}), std::exp(-0.5), 1e-15);
}

TEST(Evaluate, MahalanobisAgainstExplicitInverse) {
  Gaussian g;
  g.log_scale = {std::log(2.0), 0, 0};
  const Eigen::Vector3d d(2, 0, 0);
  const Eigen::Matrix3d inv = Eigen::Vector3d(4, 1, 1).asDiagonal().inverse();
  EXPECT_NEAR(evaluate_gaussian(g, d), std::exp(-0.5 * d.dot(inv * d)), 1e-15);
  EXPECT_NEAR(evaluate_gaussian(g, d), 0.6065306597126334, 1e-15);
}

TEST(Evaluate, DecreasesAlongRays) {
  std::mt19937_64 rng(12);
  const GaussianSet s = testkit::random_scene(rng, 20);
  std::normal_distribution<double> n(0.0, 1.0);
  for (const Gaussian& g : s.gaussians) {
    const Eigen::Vector3d dir = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    double prev = evaluate_gaussian(g, g.mu);
    EXPECT_DOUBLE_EQ(prev, 1.0);
    for (int k = 1; k < 20; ++k) {
      const double v = evaluate_gaussian(g, g.mu + 0.02 * k * dir);
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
}

TEST(Evaluate, IllConditionedThrows) {
  Gaussian g;
  g.log_scale = {std::log(1e-7), 0, 0};
  EXPECT_THROW(evaluate_gaussian(g, {0, 0, 0}), NumericError);
}

TEST(Activations, Ranges) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(logit(0.1)), 0.1, 1e-15);
  Gaussian g;
  g.opacity_logit = 30.0;
  EXPECT_LE(g.opacity(), 1.0);
  g.opacity_logit = -30.0;
  EXPECT_GT(g.opacity(), 0.0);
}

TEST(Init, SinglePointClampsScale) {
  PointCloud pc{{{1, 2, 3}}, {{0.2, 0.4, 0.6}}};
  const GaussianSet s = init_from_pointcloud(pc);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_TRUE(s[0].scale().isApprox(Eigen::Vector3d::Constant(1e-4)));
  EXPECT_EQ(s[0].mu, pc.points[0]);
  EXPECT_EQ(s[0].color, pc.colors[0]);
  EXPECT_NEAR(s[0].opacity(), 0.1, 1e-12);
  EXPECT_TRUE(s[0].rot.coeffs().isApprox(Eigen::Quaterniond::Identity().coeffs()));
}

TEST(Init, TetrahedronUsesEdgeLength) {
  const double e = 0.7;
  PointCloud pc;
  pc.points = {{0, 0, 0}, {e, 0, 0}, {e / 2, e * std::sqrt(3.0) / 2, 0},
               {e / 2, e * std::sqrt(3.0) / 6, e * std::sqrt(2.0 / 3.0)}};
  pc.colors.assign(4, Eigen::Vector3d(0.5, 0.5, 0.5));
  const GaussianSet s = init_from_pointcloud(pc);
  for (const Gaussian& g : s.gaussians) {
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(g.scale()[a], e, 1e-12);
  }
}

TEST(Init, MatchesBruteForceNeighbors) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud pc;
  for (int i = 0; i < 400; ++i) {
    pc.points.emplace_back(u(rng), u(rng), 0.3 * u(rng));
    pc.colors.emplace_back(0.5, 0.5, 0.5);
  }
  // Duplicate points exercise zero distances.
  pc.points.push_back(pc.points[0]);
  pc.colors.emplace_back(0.1, 0.2, 0.3);
  const GaussianSet s = init_from_pointcloud(pc);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < pc.size(); ++j) {
      if (j != i) d.push_back((pc.points[i] - pc.points[j]).norm());
    }
    std::sort(d.begin(), d.end());
    const double expected = std::clamp((d[0] + d[1] + d[2]) / 3.0, 1e-4, 1e2);
    EXPECT_NEAR(s[i].scale().x(), expected, 1e-12) << "point " << i;
  }
  EXPECT_EQ(s[pc.size() - 1].color, Eigen::Vector3d(0.1, 0.2, 0.3));
}

TEST(Init, EmptyCloudThrows) {
  EXPECT_THROW(init_from_pointcloud(PointCloud{}), InvalidArgument);
}

TEST(PointCloud, ValidateLengths) {
  PointCloud pc{{{0, 0, 0}}, {}};
  EXPECT_THROW(pc.validate(), InvalidArgument);
}
