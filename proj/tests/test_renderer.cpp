#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>

#include "sparsesplat/parallel.hpp"
#include "sparsesplat/renderer.hpp"
#include "support.hpp"

using namespace sparsesplat;

namespace {

CameraView unit_view(double f = 1.0, int size = 32) {
  return {{f, f, (size - 1) / 2.0, (size - 1) / 2.0, size, size}, Pose::identity(), "v"};
}

// Gaussian whose projection under unit_view(40) sits at the image center.
Gaussian centered(double opacity, const Eigen::Vector3d& color, double z = 2.0, double scale = 0.05) {
  Gaussian g;
  g.mu = {0, 0, z};
  g.log_scale = Eigen::Vector3d::Constant(std::log(scale));
  g.opacity_logit = logit(opacity);
  g.color = color;
  return g;
}

}  // namespace

TEST(ProjectCovariance, UnitDepth) {
  const RenderSettings s;
  const auto c = project_covariance(Eigen::Matrix3d::Identity(), unit_view(), {0, 0, 1}, s);
  ASSERT_TRUE(c.has_value());
  EXPECT_NEAR((*c - Eigen::Matrix2d::Identity() * (1.0 + s.dilation)).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(ProjectCovariance, DepthTwoScalesByQuarter) {
  const RenderSettings s;
  const auto c = project_covariance(Eigen::Matrix3d::Identity(), unit_view(), {0, 0, 2}, s);
  ASSERT_TRUE(c.has_value());
  EXPECT_NEAR((*c - Eigen::Matrix2d::Identity() * (0.25 + s.dilation)).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(ProjectCovariance, BehindNearPlaneIsCulled) {
  EXPECT_FALSE(project_covariance(Eigen::Matrix3d::Identity(), unit_view(), {0, 0, 0.005}).has_value());
  EXPECT_FALSE(project_covariance(Eigen::Matrix3d::Identity(), unit_view(), {0, 0, -1}).has_value());
}

TEST(ProjectCovariance, RollPreservesEigenvalues) {
  const Eigen::Matrix3d sigma = covariance_from_rs(Eigen::Quaterniond(0.9, 0.1, 0.3, -0.2), {0.3, 0.1, 0.05});
  CameraView v = unit_view(50.0);
  const auto a = project_covariance(sigma, v, {0, 0, 2});
  // Rolling camera and point together leaves the point on the optical axis.
  v.pose = Pose(Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ())),
                Eigen::Vector3d::Zero());
  const auto b = project_covariance(sigma, v, {0, 0, 2});
  ASSERT_TRUE(a && b);
  const Eigen::Vector2d ea = a->selfadjointView<Eigen::Lower>().eigenvalues();
  const Eigen::Vector2d eb = b->selfadjointView<Eigen::Lower>().eigenvalues();
  EXPECT_NEAR((ea - eb).norm(), 0.0, 1e-12);
}

TEST(Render, EmptyScene) {
  const RenderOutput out = render(GaussianSet{}, unit_view());
  for (double v : out.rgb.data()) EXPECT_EQ(v, 0.0);
  for (double v : out.alpha.data()) EXPECT_EQ(v, 0.0);
  for (double v : out.depth.data()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(render_reference(GaussianSet{}, unit_view()).rgb == out.rgb);
}

TEST(Render, SingleClampedSplatAtCenterPixel) {
  CameraView v = unit_view(40.0, 33);  // principal point on pixel (16, 16)
  GaussianSet s{{centered(0.999999, {1, 0, 0})}};
  const RenderOutput out = render(s, v);
  EXPECT_DOUBLE_EQ(out.rgb.at(16, 16, 0), 0.99);
  EXPECT_DOUBLE_EQ(out.rgb.at(16, 16, 1), 0.0);
  EXPECT_DOUBLE_EQ(out.alpha.at(16, 16), 0.99);
  EXPECT_NEAR(out.depth.at(16, 16), 2.0, 1e-12);
}

TEST(Render, TwoCoincidentHalfAlphaSplats) {
  CameraView v = unit_view(40.0, 33);
  // Same footprint; the first in index order is treated as nearer.
  GaussianSet s{{centered(0.5, {1, 0, 0}), centered(0.5, {0, 0, 1})}};
  const RenderOutput out = render(s, v);
  EXPECT_NEAR(out.rgb.at(16, 16, 0), 0.5, 1e-15);
  EXPECT_NEAR(out.rgb.at(16, 16, 2), 0.25, 1e-15);
  EXPECT_NEAR(out.alpha.at(16, 16), 0.75, 1e-15);
}

TEST(Render, FrontToBackOrderFollowsDepth) {
  CameraView v = unit_view(40.0, 33);
  GaussianSet s{{centered(0.5, {0, 0, 1}, 3.0, 0.075), centered(0.5, {1, 0, 0}, 2.0, 0.05)}};
  const RenderOutput out = render(s, v);
  EXPECT_NEAR(out.rgb.at(16, 16, 0), 0.5, 1e-12);
  EXPECT_NEAR(out.rgb.at(16, 16, 2), 0.25, 1e-12);
}

TEST(Render, SplatBehindCameraIsInvisible) {
  GaussianSet s{{centered(0.9, {1, 1, 1}, -2.0)}};
  const RenderOutput out = render(s, unit_view(40.0));
  for (double a : out.alpha.data()) EXPECT_EQ(a, 0.0);
}

TEST(Render, SingleOpaqueSplatDepthWhereAlphaHigh) {
  CameraView v = unit_view(40.0, 33);
  GaussianSet s{{centered(0.999, {1, 1, 1}, 1.7, 0.2)}};
  const RenderOutput out = render(s, v);
  int checked = 0;
  for (int y = 0; y < 33; ++y) {
    for (int x = 0; x < 33; ++x) {
      if (out.alpha.at(x, y) > 0.5) {
        EXPECT_NEAR(out.depth.at(x, y), 1.7, 1e-6);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 10);
}

TEST(Render, OutputInvariants) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const GaussianSet s = testkit::random_scene(rng, 60);
    const CameraView v = testkit::random_view(rng, 48);
    const RenderOutput out = render(s, v);
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        const double a = out.alpha.at(x, y);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
        for (int c = 0; c < 3; ++c) EXPECT_LE(out.rgb.at(x, y, c), a + 1e-6);
      }
    }
  }
}

TEST(Render, AddingGaussianNeverLowersAlpha) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    GaussianSet s = testkit::random_scene(rng, 30);
    const CameraView v = testkit::random_view(rng, 40);
    const RenderOutput before = render(s, v);
    s.gaussians.push_back(testkit::random_scene(rng, 1)[0]);
    const RenderOutput after = render(s, v);
    for (std::size_t i = 0; i < before.alpha.size(); ++i) {
      EXPECT_GE(after.alpha.data()[i], before.alpha.data()[i] - 1e-15);
    }
  }
}

TEST(Render, MatchesReference) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const GaussianSet s = testkit::random_scene(rng, 10);
    const CameraView v = testkit::random_view(rng, 32);
    const RenderOutput a = render(s, v), b = render_reference(s, v);
    EXPECT_LT(testkit::max_abs_diff(a.rgb, b.rgb), 1e-5);
    EXPECT_LT(testkit::max_abs_diff(a.depth, b.depth), 1e-5);
    EXPECT_LT(testkit::max_abs_diff(a.alpha, b.alpha), 1e-5);
  }
}

TEST(Render, SingleSplatBitIdenticalToReference) {
  std::mt19937_64 rng(24);
  const GaussianSet s = testkit::random_scene(rng, 1, 0.1);
  const CameraView v = testkit::random_view(rng, 64);
  const RenderOutput a = render(s, v), b = render_reference(s, v);
  EXPECT_TRUE(a.rgb == b.rgb);
  EXPECT_TRUE(a.depth == b.depth);
  EXPECT_TRUE(a.alpha == b.alpha);
}

TEST(Render, ThreadCountDoesNotChangeOutput) {
  std::mt19937_64 rng(25);
  const GaussianSet s = testkit::random_scene(rng, 80);
  const CameraView v = testkit::random_view(rng, 64);
  set_thread_count(1);
  const RenderOutput a = render(s, v);
  set_thread_count(4);
  const RenderOutput b = render(s, v);
  set_thread_count(0);
  EXPECT_TRUE(a.rgb == b.rgb);
  EXPECT_TRUE(a.depth == b.depth);
}

TEST(Pointmap, SinglePointOnAxis) {
  CameraView v = unit_view(40.0, 33);
  PointCloud pc{{{0, 0, 2}}, {{0.2, 0.4, 0.6}}};
  const Image img = render_pointmap(pc, v);
  int lit = 0;
  for (int y = 0; y < 33; ++y) {
    for (int x = 0; x < 33; ++x) lit += img.at(x, y, 0) != 0.0;
  }
  EXPECT_EQ(lit, 1);
  EXPECT_DOUBLE_EQ(img.at(16, 16, 1), 0.4);
}

TEST(Pointmap, NearerPointWins) {
  CameraView v = unit_view(40.0, 33);
  PointCloud pc{{{0, 0, 3}, {0, 0, 2}, {0, 0, 4}}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  const Image img = render_pointmap(pc, v);
  EXPECT_DOUBLE_EQ(img.at(16, 16, 1), 1.0);
  EXPECT_DOUBLE_EQ(img.at(16, 16, 0), 0.0);
}

TEST(Pointmap, PointBehindCameraIgnored) {
  PointCloud pc{{{0, 0, -2}}, {{1, 1, 1}}};
  const Image img = render_pointmap(pc, unit_view(40.0, 33));
  for (double v : img.data()) EXPECT_EQ(v, 0.0);
}
