#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sparsesplat/error.hpp"
#include "sparsesplat/losses.hpp"
#include "support.hpp"

using namespace sparsesplat;

namespace {

// Mean SSIM by direct summation over every full 11x11 window.
double naive_ssim(const Image& a, const Image& b) {
  double win[11][11], total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0.0;
  int count = 0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y + 11 <= a.height(); ++y) {
      for (int x = 0; x + 11 <= a.width(); ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = win[i][j] / total, va = a.at(x + j, y + i, c), vb = b.at(x + j, y + i, c);
            ma += w * va, mb += w * vb;
            saa += w * va * va, sbb += w * vb * vb, sab += w * va * vb;
          }
        saa -= ma * ma, sbb -= mb * mb, sab -= ma * mb;
        sum += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (saa + sbb + c2));
        ++count;
      }
    }
  }
  return sum / count;
}

RenderOutput as_render(const Image& rgb, const Image& depth) {
  Image alpha(rgb.width(), rgb.height(), 1);
  for (double& v : alpha.data()) v = 1.0;
  return {rgb, depth, alpha};
}

}  // namespace

TEST(L1, MatchesDirectMean) {
  std::mt19937_64 rng(1);
  const Image a = testkit::random_image(rng, 9, 7, 3), b = testkit::random_image(rng, 9, 7, 3);
  double expected = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) expected += std::abs(a.data()[i] - b.data()[i]);
  expected /= static_cast<double>(a.size());
  EXPECT_NEAR(l1_loss(a, b), expected, 1e-15);
  EXPECT_EQ(l1_loss(a, a), 0.0);
  EXPECT_THROW(l1_loss(a, Image(9, 7, 1)), InvalidArgument);
}

TEST(Psnr, Examples) {
  Image a(4, 4, 3), b(4, 4, 3);
  EXPECT_TRUE(std::isinf(psnr(a, b)));
  for (double& v : b.data()) v = 0.1;  // MSE 0.01
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-12);
}

TEST(Ssim, MatchesNaiveWindowSum) {
  std::mt19937_64 rng(2);
  const Image a = testkit::random_image(rng, 20, 16, 3), b = testkit::random_image(rng, 20, 16, 3);
  EXPECT_NEAR(ssim(a, b), naive_ssim(a, b), 1e-12);
  Image blurry = a;
  for (double& v : blurry.data()) v = 0.7 * v + 0.1;
  EXPECT_NEAR(ssim(a, blurry), naive_ssim(a, blurry), 1e-12);
}

TEST(Ssim, IdentitySymmetryAndInversion) {
  std::mt19937_64 rng(3);
  const Image a = testkit::random_image(rng, 24, 24, 3), b = testkit::random_image(rng, 24, 24, 3);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-14);
  Image inv = a;
  for (double& v : inv.data()) v = 1.0 - v;
  EXPECT_LT(ssim(a, inv), 0.0);
  EXPECT_THROW(ssim(Image(10, 10, 3), Image(10, 10, 3)), InvalidArgument);
}

TEST(Ssim, GradientMatchesValue) {
  std::mt19937_64 rng(4);
  const Image a = testkit::random_image(rng, 14, 13, 2), b = testkit::random_image(rng, 14, 13, 2);
  const LossGrad g = ssim_with_grad(a, b);
  EXPECT_DOUBLE_EQ(g.value, ssim(a, b));
  const double h = 1e-6;
  for (std::size_t i = 0; i < a.size(); i += 13) {
    Image p = a, m = a;
    p.data()[i] += h;
    m.data()[i] -= h;
    EXPECT_NEAR((ssim(p, b) - ssim(m, b)) / (2 * h), g.grad.data()[i], 1e-8);
  }
}

TEST(LossWeights, DefaultsAndValidation) {
  const LossWeights w;
  EXPECT_EQ(w.lambda1, 0.8);
  EXPECT_EQ(w.lambda2, 1.0);
  EXPECT_EQ(w.lambda3, 0.5);
  LossWeights bad;
  bad.lambda1 = 1.5;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = {};
  bad.lambda3 = -0.1;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(TotalLoss, BreakdownIdentity) {
  std::mt19937_64 rng(5);
  const Image rgb = testkit::random_image(rng, 32, 32, 3), target = testkit::random_image(rng, 32, 32, 3);
  Image depth = testkit::random_image(rng, 32, 32, 1), ref = testkit::random_image(rng, 32, 32, 1);
  for (double& v : depth.data()) v += 1.0;
  for (double& v : ref.data()) v += 1.0;
  const LossOptions opts;
  const auto& w = opts.weights;
  for (double t : {0.0, 4000.0}) {
    LossContext ctx{true, &ref, nullptr, t};
    const LossBreakdown b = total_loss(as_render(rgb, depth), target, ctx, opts);
    EXPECT_GT(b.mlcr, 0.0);
    EXPECT_GT(b.asmg, 0.0);
    EXPECT_NEAR(b.total, w.lambda1 * b.l1 + (1 - w.lambda1) * b.ssim_term + w.lambda2 * b.mlcr + w.lambda3 * b.asmg,
                1e-9);
    EXPECT_NEAR(b.ssim_term, 1.0 - ssim(rgb, target), 1e-15);
    EXPECT_NEAR(b.l1, l1_loss(rgb, target), 1e-15);
    if (t == 0.0) {
      EXPECT_EQ(b.asmg_masked, 0.0);
    }
  }
}

TEST(TotalLoss, RealViewsSkipRegularizers) {
  std::mt19937_64 rng(6);
  const Image rgb = testkit::random_image(rng, 32, 32, 3), target = testkit::random_image(rng, 32, 32, 3);
  Image depth = testkit::random_image(rng, 32, 32, 1);
  const Image ref = testkit::random_image(rng, 32, 32, 1);
  LossOptions opts;
  LossContext ctx{false, &ref, nullptr, 100.0};
  LossBreakdown b = total_loss(as_render(rgb, depth), target, ctx, opts);
  EXPECT_EQ(b.mlcr, 0.0);
  EXPECT_EQ(b.asmg, 0.0);
  EXPECT_NEAR(b.total, 0.8 * b.l1 + 0.2 * b.ssim_term, 1e-15);
  opts.regularize_real_views = true;
  b = total_loss(as_render(rgb, depth), target, ctx, opts);
  EXPECT_GT(b.mlcr, 0.0);
  EXPECT_GT(b.asmg, 0.0);
}

TEST(TotalLoss, GradientMatchesBreakdown) {
  std::mt19937_64 rng(7);
  const Image rgb = testkit::random_image(rng, 16, 16, 3), target = testkit::random_image(rng, 16, 16, 3);
  const Image depth = testkit::random_image(rng, 16, 16, 1), ref = testkit::random_image(rng, 16, 16, 1);
  LossContext ctx{true, &ref, nullptr, 3000.0};
  const TotalLoss tl = total_loss_with_grad(as_render(rgb, depth), target, ctx);
  EXPECT_DOUBLE_EQ(tl.breakdown.total, total_loss(as_render(rgb, depth), target, ctx).total);
  const double h = 1e-7;
  for (std::size_t i = 0; i < rgb.size(); i += 17) {
    Image p = rgb, m = rgb;
    p.data()[i] += h;
    m.data()[i] -= h;
    const double fd =
        (total_loss(as_render(p, depth), target, ctx).total - total_loss(as_render(m, depth), target, ctx).total) /
        (2 * h);
    EXPECT_NEAR(fd, tl.d_rgb.data()[i], 1e-6);
  }
}
