#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sparsesplat/depth_reg.hpp"
#include "sparsesplat/error.hpp"
#include "support.hpp"

using namespace sparsesplat;

namespace {

Image random_depth(std::mt19937_64& rng, int w, int h) {
  Image d = testkit::random_image(rng, w, h, 1);
  for (double& v : d.data()) v = 1.0 + 3.0 * v;
  return d;
}

DepthPair make_pair(const Image& rendered, const Image& reference) {
  Image alpha(rendered.width(), rendered.height(), 1);
  for (double& v : alpha.data()) v = 1.0;
  return DepthPair::from_render(rendered, alpha, reference);
}

double direct_one_minus_corr(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return 1.0 - sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Pearson, Examples) {
  std::mt19937_64 rng(1);
  const Image a = random_depth(rng, 16, 16);
  Image b = a, c = a;
  for (double& v : b.data()) v = 2.0 * v + 3.0;
  for (double& v : c.data()) v = -v;
  const Mask all(16, 16, true);
  EXPECT_NEAR(*pearson_corr(a, b, all), 1.0, 1e-9);
  EXPECT_NEAR(*pearson_corr(a, c, all), -1.0, 1e-9);
  Image flat(16, 16, 1);
  for (double& v : flat.data()) v = 2.0;
  EXPECT_FALSE(pearson_corr(flat, a, all).has_value());
  Mask one(16, 16);
  one.set(3, 3, true);
  EXPECT_FALSE(pearson_corr(a, b, one).has_value());
}

TEST(DepthCorr, PerScaleExamples) {
  std::mt19937_64 rng(2);
  const Image ref = random_depth(rng, 16, 16);
  Image affine = ref, neg = ref;
  for (double& v : affine.data()) v = 0.5 * v + 7.0;
  for (double& v : neg.data()) v = -v;
  for (double s : {1.0, 0.5, 0.25}) {
    EXPECT_NEAR(depth_corr_loss_per_scale(make_pair(affine, ref), s), 0.0, 1e-9);
    EXPECT_NEAR(depth_corr_loss_per_scale(make_pair(neg, ref), s), 2.0, 1e-9);
  }
}

TEST(DepthCorr, HalfScaleMatchesBruteForcePooling) {
  std::mt19937_64 rng(3);
  const int w = 16, h = 12;
  const Image rend = random_depth(rng, w, h);
  Image ref = random_depth(rng, w, h);
  // Knock out a few reference pixels, including a whole 2x2 block.
  const double inf = std::numeric_limits<double>::infinity();
  ref.at(0, 0) = ref.at(5, 3) = ref.at(9, 10) = inf;
  ref.at(12, 4) = ref.at(13, 4) = ref.at(12, 5) = ref.at(13, 5) = inf;
  const DepthPair pair = make_pair(rend, ref);

  std::vector<double> pa, pb;
  for (int y = 0; y < h; y += 2) {
    for (int x = 0; x < w; x += 2) {
      double sa = 0, sb = 0;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          if (!std::isfinite(ref.at(x + dx, y + dy))) continue;
          sa += rend.at(x + dx, y + dy);
          sb += ref.at(x + dx, y + dy);
          ++n;
        }
      if (n == 0) continue;
      pa.push_back(sa / n);
      pb.push_back(sb / n);
    }
  }
  EXPECT_EQ(pa.size(), 47u);
  EXPECT_NEAR(depth_corr_loss_per_scale(pair, 0.5), direct_one_minus_corr(pa, pb), 1e-12);
}

TEST(DepthCorr, MultiscaleIsWeightedSum) {
  std::mt19937_64 rng(4);
  const DepthPair pair = make_pair(random_depth(rng, 32, 32), random_depth(rng, 32, 32));
  ScheduleConfig cfg;
  cfg.scales = {1.0};
  cfg.scale_weights = {1.0};
  EXPECT_DOUBLE_EQ(multiscale_depth_loss(pair, cfg), depth_corr_loss_per_scale(pair, 1.0));
  cfg.scales = {1.0, 0.5};
  cfg.scale_weights = {1.0, 1.0};
  EXPECT_NEAR(multiscale_depth_loss(pair, cfg),
              depth_corr_loss_per_scale(pair, 1.0) + depth_corr_loss_per_scale(pair, 0.5), 1e-15);
  cfg.scale_weights = {0.25, 2.0};
  EXPECT_NEAR(multiscale_depth_loss(pair, cfg),
              0.25 * depth_corr_loss_per_scale(pair, 1.0) + 2.0 * depth_corr_loss_per_scale(pair, 0.5), 1e-15);
  EXPECT_EQ(multiscale_depth_loss(make_pair(pair.reference, pair.reference), ScheduleConfig{}), 0.0);
}

TEST(DepthCorr, PerScaleLossInRange) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const DepthPair pair = make_pair(random_depth(rng, 16, 16), random_depth(rng, 16, 16));
    for (double s : {1.0, 0.5, 0.25, 0.125}) {
      const double v = depth_corr_loss_per_scale(pair, s);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 2.0);
    }
  }
}

TEST(DepthCorr, AffineInvarianceOfReference) {
  std::mt19937_64 rng(6);
  const Image rend = random_depth(rng, 24, 24);
  const Image ref = random_depth(rng, 24, 24);
  Image moved = ref;
  for (double& v : moved.data()) v = 3.7 * v + 11.0;
  const DepthPair a = make_pair(rend, ref), b = make_pair(rend, moved);
  for (double s : {1.0, 0.5, 0.25}) {
    EXPECT_NEAR(depth_corr_loss_per_scale(a, s), depth_corr_loss_per_scale(b, s), 1e-9);
  }
  EXPECT_EQ(spatial_mask(ref, 0.4), spatial_mask(moved, 0.4));
}

TEST(DepthCorr, InvalidScaleThrows) {
  std::mt19937_64 rng(7);
  const DepthPair pair = make_pair(random_depth(rng, 8, 8), random_depth(rng, 8, 8));
  EXPECT_THROW(depth_corr_loss_per_scale(pair, 0.3), InvalidArgument);
  EXPECT_THROW(depth_corr_loss_per_scale(pair, 2.0), InvalidArgument);
}

TEST(SpatialMask, LinspaceThreshold) {
  const int w = 10, h = 10;
  Image ref(w, h, 1);
  for (int i = 0; i < w * h; ++i) ref.data()[i] = static_cast<double>(i) / (w * h - 1);
  const Mask m = spatial_mask(ref, 0.4);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) EXPECT_EQ(m.at(x, y), ref.at(x, y) < 0.4) << x << "," << y;
  EXPECT_EQ(m.count(), 40u);
}

TEST(SpatialMask, DegenerateCases) {
  Image flat(6, 6, 1);
  for (double& v : flat.data()) v = 2.5;
  EXPECT_EQ(spatial_mask(flat, 0.4).count(), 36u);
  std::mt19937_64 rng(8);
  EXPECT_EQ(spatial_mask(random_depth(rng, 6, 6), 0.0).count(), 0u);
  Image none(4, 4, 1);
  for (double& v : none.data()) v = std::numeric_limits<double>::infinity();
  EXPECT_THROW(spatial_mask(none, 0.4), InvalidArgument);
}

TEST(MaskedLoss, AllTrueEqualsUnmasked) {
  std::mt19937_64 rng(9);
  const DepthPair pair = make_pair(random_depth(rng, 32, 32), random_depth(rng, 32, 32));
  const Mask all(32, 32, true);
  ScheduleConfig cfg;
  EXPECT_NEAR(masked_multiscale_depth_loss(pair, cfg, &all), multiscale_depth_loss(pair, cfg), 1e-15);
}

TEST(MaskedLoss, CorruptedBackgroundIsIgnored) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = 32, h = 32;
  Image ref(w, h, 1), rend(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x < 16) {
        ref.at(x, y) = 1.0 + 0.3 * u(rng);
        rend.at(x, y) = 2.0 * ref.at(x, y) + 0.1;
      } else {
        ref.at(x, y) = 3.0 + u(rng);
        rend.at(x, y) = 5.0 * u(rng);
      }
    }
  }
  const DepthPair pair = make_pair(rend, ref);
  ScheduleConfig cfg;
  EXPECT_NEAR(masked_multiscale_depth_loss(pair, cfg), 0.0, 1e-9);
  EXPECT_GT(multiscale_depth_loss(pair, cfg), 0.1);
}

TEST(MaskedLoss, TinyRegionContributesZero) {
  std::mt19937_64 rng(11);
  const DepthPair pair = make_pair(random_depth(rng, 16, 16), random_depth(rng, 16, 16));
  Mask one(16, 16);
  one.set(4, 4, true);
  EXPECT_EQ(masked_multiscale_depth_loss(pair, ScheduleConfig{}, &one), 0.0);
}

TEST(Eta, ScheduleValues) {
  ScheduleConfig cfg;
  const double t0 = cfg.onset();
  const double total = static_cast<double>(cfg.total_iters);
  EXPECT_EQ(eta(t0, cfg), 1.0);
  EXPECT_EQ(eta(t0 + 0.25 * total, cfg), 0.5);
  EXPECT_EQ(eta(total, cfg), 0.5);
  double prev = 1.0;
  for (double t = t0; t <= total; t += 7.0) {
    const double e = eta(t, cfg);
    EXPECT_LE(e, prev);
    EXPECT_GE(e, 0.5);
    prev = e;
  }
}

TEST(Asmg, Branches) {
  std::mt19937_64 rng(12);
  const DepthPair pair = make_pair(random_depth(rng, 32, 32), random_depth(rng, 32, 32));
  ScheduleConfig cfg;
  const double depth = multiscale_depth_loss(pair, cfg);
  const double masked = masked_multiscale_depth_loss(pair, cfg);
  ASSERT_GT(masked, 0.0);

  const AsmgResult before = asmg_with_grad(pair, cfg.onset() - 1.0, cfg);
  EXPECT_EQ(before.masked_weight, 0.0);
  EXPECT_EQ(before.value, depth);
  EXPECT_EQ(asmg_total(pair, 0.0, cfg), depth);

  EXPECT_NEAR(asmg_total(pair, cfg.onset(), cfg), depth + masked, 1e-15);
  const double floor_t = cfg.onset() + 0.25 * cfg.total_iters;
  EXPECT_NEAR(asmg_total(pair, floor_t, cfg), depth + 0.5 * masked, 1e-15);
  EXPECT_NEAR(asmg_total(pair, cfg.total_iters, cfg), depth + 0.5 * masked, 1e-15);

  const AsmgResult at = asmg_with_grad(pair, cfg.onset(), cfg);
  EXPECT_EQ(at.masked_weight, 1.0);
  EXPECT_EQ(at.depth_term, depth);
  EXPECT_EQ(at.masked_term, masked);
}

TEST(Asmg, NonIncreasingAfterOnset) {
  std::mt19937_64 rng(13);
  const DepthPair pair = make_pair(random_depth(rng, 32, 32), random_depth(rng, 32, 32));
  ScheduleConfig cfg;
  double prev = asmg_total(pair, cfg.onset(), cfg);
  for (double t = cfg.onset(); t <= cfg.total_iters; t += 50.0) {
    const double v = asmg_total(pair, t, cfg);
    EXPECT_LE(v, prev + 1e-15);
    prev = v;
  }
}

TEST(Asmg, GradientMatchesValue) {
  std::mt19937_64 rng(14);
  const Image ref = random_depth(rng, 16, 16);
  Image rend = random_depth(rng, 16, 16);
  ScheduleConfig cfg;
  for (double t : {0.0, cfg.onset() + 10.0}) {
    const AsmgResult r = asmg_with_grad(make_pair(rend, ref), t, cfg);
    const double h = 1e-6;
    for (std::size_t i = 0; i < rend.size(); i += 11) {
      Image p = rend, m = rend;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd =
          (asmg_total(make_pair(p, ref), t, cfg) - asmg_total(make_pair(m, ref), t, cfg)) / (2 * h);
      EXPECT_NEAR(fd, r.d_rendered.data()[i], 1e-7);
    }
  }
}

TEST(Schedule, Validation) {
  ScheduleConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.total_iters = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.scale_weights = {1.0};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.scale_weights = {1.0, -1.0, 1.0};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}
