#include "sparsesplat/depth_reg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sparsesplat/error.hpp"

namespace sparsesplat {

namespace {

int halvings_for(double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw InvalidArgument("depth scale must lie in (0, 1]");
  int k = 0;
  double s = scale;
  while (s < 1.0 && k < 30) {
    s *= 2.0;
    ++k;
  }
  if (s != 1.0) throw InvalidArgument("depth scale " + std::to_string(scale) + " is not a power of 1/2");
  return k;
}

DepthPair pool_once(const DepthPair& p) {
  const int w = (p.rendered.width() + 1) / 2, h = (p.rendered.height() + 1) / 2;
  DepthPair out{Image(w, h, 1), Image(w, h, 1), Mask(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sr = 0.0, sf = 0.0;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int cx = 2 * x + dx, cy = 2 * y + dy;
          if (cx >= p.rendered.width() || cy >= p.rendered.height() || !p.valid.at(cx, cy)) continue;
          sr += p.rendered.at(cx, cy);
          sf += p.reference.at(cx, cy);
          ++n;
        }
      }
      if (n > 0) {
        out.rendered.at(x, y) = sr / n;
        out.reference.at(x, y) = sf / n;
        out.valid.set(x, y, true);
      }
    }
  }
  return out;
}

// Adjoint of pool_once for the rendered map.
Image unpool_grad(const Image& g, const DepthPair& fine) {
  Image out(fine.rendered.width(), fine.rendered.height(), 1);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int cx = 2 * x + dx, cy = 2 * y + dy;
          if (cx < out.width() && cy < out.height() && fine.valid.at(cx, cy)) ++n;
        }
      }
      if (n == 0) continue;
      const double share = g.at(x, y) / n;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int cx = 2 * x + dx, cy = 2 * y + dy;
          if (cx < out.width() && cy < out.height() && fine.valid.at(cx, cy)) out.at(cx, cy) = share;
        }
      }
    }
  }
  return out;
}

Mask majority_once(const Mask& m) {
  const int w = (m.width() + 1) / 2, h = (m.height() + 1) / 2;
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int in = 0, total = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int cx = 2 * x + dx, cy = 2 * y + dy;
          if (cx >= m.width() || cy >= m.height()) continue;
          ++total;
          in += m.at(cx, cy) ? 1 : 0;
        }
      }
      out.set(x, y, 2 * in >= total);
    }
  }
  return out;
}

struct CorrStats {
  bool ok = false;
  double corr = 0.0;
  double mean_a = 0.0, mean_b = 0.0, saa = 0.0, sbb = 0.0;
};

CorrStats corr_stats(const Image& a, const Image& b, const Mask& valid) {
  CorrStats st;
  std::size_t n = 0;
  double max_a = 0.0, max_b = 0.0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!valid.at(x, y)) continue;
      st.mean_a += a.at(x, y);
      st.mean_b += b.at(x, y);
      max_a = std::max(max_a, std::abs(a.at(x, y)));
      max_b = std::max(max_b, std::abs(b.at(x, y)));
      ++n;
    }
  }
  if (n < 2) return st;
  st.mean_a /= static_cast<double>(n);
  st.mean_b /= static_cast<double>(n);
  double sab = 0.0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!valid.at(x, y)) continue;
      const double da = a.at(x, y) - st.mean_a, db = b.at(x, y) - st.mean_b;
      st.saa += da * da;
      st.sbb += db * db;
      sab += da * db;
    }
  }
  // Variance at rounding level counts as flat.
  const double nd = static_cast<double>(n);
  const double floor_a = nd * (1e-12 * max_a) * (1e-12 * max_a);
  const double floor_b = nd * (1e-12 * max_b) * (1e-12 * max_b);
  if (!(st.saa > floor_a) || !(st.sbb > floor_b)) return st;
  st.ok = true;
  st.corr = std::clamp(sab / std::sqrt(st.saa * st.sbb), -1.0, 1.0);
  return st;
}

Mask and_masks(const Mask& a, const Mask& b) {
  Mask out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) out.set(x, y, a.at(x, y) && b.at(x, y));
  }
  return out;
}

// weight * (1 - corr) at one scale; adds its gradient into grad when given.
double scale_term(const DepthPair& pair, double scale, double weight, const Mask* region, Image* grad) {
  const int k = halvings_for(scale);
  std::vector<DepthPair> chain{pair};
  chain.reserve(k + 1);
  for (int i = 0; i < k; ++i) chain.push_back(pool_once(chain.back()));
  const DepthPair& top = chain.back();

  Mask used = top.valid;
  if (region) {
    Mask r = *region;
    for (int i = 0; i < k; ++i) r = majority_once(r);
    used = and_masks(used, r);
  }
  const CorrStats st = corr_stats(top.rendered, top.reference, used);
  if (!st.ok) return 0.0;
  const double loss = std::clamp(1.0 - st.corr, 0.0, 2.0);

  if (grad && weight != 0.0) {
    Image g(top.rendered.width(), top.rendered.height(), 1);
    const double inv = 1.0 / std::sqrt(st.saa * st.sbb);
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        if (!used.at(x, y)) continue;
        const double da = top.rendered.at(x, y) - st.mean_a, db = top.reference.at(x, y) - st.mean_b;
        g.at(x, y) = -weight * (db * inv - st.corr * da / st.saa);
      }
    }
    for (int i = k; i > 0; --i) g = unpool_grad(g, chain[i - 1]);
    auto gd = grad->data();
    auto src = g.data();
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += src[i];
  }
  return weight * loss;
}

double sum_scales(const DepthPair& pair, const ScheduleConfig& cfg, const Mask* region, Image* grad) {
  cfg.validate();
  pair.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    total += scale_term(pair, cfg.scales[i], cfg.scale_weights[i], region, grad);
  }
  return total;
}

}  // namespace

DepthPair DepthPair::from_render(const Image& rendered_depth, const Image& rendered_alpha, const Image& reference,
                                 double alpha_floor) {
  if (!rendered_depth.same_shape(reference) || !rendered_depth.same_shape(rendered_alpha) ||
      rendered_depth.channels() != 1) {
    throw InvalidArgument("depth pair: rendered depth, alpha and reference must be matching single-channel maps");
  }
  DepthPair p{rendered_depth, reference, Mask(reference.width(), reference.height())};
  for (int y = 0; y < reference.height(); ++y) {
    for (int x = 0; x < reference.width(); ++x) {
      p.valid.set(x, y, std::isfinite(reference.at(x, y)) && rendered_alpha.at(x, y) > alpha_floor);
    }
  }
  return p;
}

void DepthPair::validate() const {
  if (!rendered.same_shape(reference) || rendered.channels() != 1 || valid.width() != rendered.width() ||
      valid.height() != rendered.height()) {
    throw InvalidArgument("depth pair: map dimensions differ");
  }
}

void ScheduleConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("schedule: alpha must lie in [0, 1)");
  if (!(beta >= 0.0)) throw InvalidArgument("schedule: beta must be non-negative");
  if (total_iters <= 0) throw InvalidArgument("schedule: total_iters must be positive");
  if (scales.empty() || scales.size() != scale_weights.size()) {
    throw InvalidArgument("schedule: need one weight per depth scale");
  }
  for (double s : scales) halvings_for(s);
  for (double w : scale_weights) {
    if (!(w >= 0.0)) throw InvalidArgument("schedule: scale weights must be non-negative");
  }
}

std::optional<double> pearson_corr(const Image& a, const Image& b, const Mask& valid) {
  if (!a.same_shape(b) || a.channels() != 1 || valid.width() != a.width() || valid.height() != a.height()) {
    throw InvalidArgument("pearson_corr: map dimensions differ");
  }
  const CorrStats st = corr_stats(a, b, valid);
  if (!st.ok) return std::nullopt;
  return st.corr;
}

DepthPair downsample_pair(const DepthPair& pair, double scale) {
  pair.validate();
  DepthPair out = pair;
  for (int i = halvings_for(scale); i > 0; --i) out = pool_once(out);
  return out;
}

Mask downsample_mask(const Mask& mask, double scale) {
  Mask out = mask;
  for (int i = halvings_for(scale); i > 0; --i) out = majority_once(out);
  return out;
}

double depth_corr_loss_per_scale(const DepthPair& pair, double scale, const Mask* region) {
  pair.validate();
  return scale_term(pair, scale, 1.0, region, nullptr);
}

double multiscale_depth_loss(const DepthPair& pair, const ScheduleConfig& cfg) {
  return sum_scales(pair, cfg, nullptr, nullptr);
}

Mask spatial_mask(const Image& reference, double threshold) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : reference.data()) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo <= hi)) throw InvalidArgument("spatial_mask: reference depth has no finite pixels");
  Mask m(reference.width(), reference.height());
  for (int y = 0; y < reference.height(); ++y) {
    for (int x = 0; x < reference.width(); ++x) {
      const double v = reference.at(x, y);
      if (!std::isfinite(v)) continue;
      m.set(x, y, hi == lo ? true : (v - lo) / (hi - lo) < threshold);
    }
  }
  return m;
}

double masked_multiscale_depth_loss(const DepthPair& pair, const ScheduleConfig& cfg, const Mask* region) {
  if (region) return sum_scales(pair, cfg, region, nullptr);
  const Mask m = spatial_mask(pair.reference, cfg.mask_threshold);
  return sum_scales(pair, cfg, &m, nullptr);
}

double eta(double t, const ScheduleConfig& cfg) {
  const double half = 0.5 * static_cast<double>(cfg.total_iters);
  return std::clamp(1.0 - (t - cfg.onset()) / half, 0.5, 1.0);
}

AsmgResult asmg_with_grad(const DepthPair& pair, double t, const ScheduleConfig& cfg, const Mask* region) {
  AsmgResult r;
  r.d_rendered = Image(pair.rendered.width(), pair.rendered.height(), 1);
  r.depth_term = sum_scales(pair, cfg, nullptr, &r.d_rendered);
  if (t < cfg.onset() || cfg.beta == 0.0) {
    r.value = r.depth_term;
    return r;
  }
  r.masked_weight = cfg.beta * eta(t, cfg);
  Mask computed;
  if (!region) {
    computed = spatial_mask(pair.reference, cfg.mask_threshold);
    region = &computed;
  }
  Image g_masked(pair.rendered.width(), pair.rendered.height(), 1);
  r.masked_term = sum_scales(pair, cfg, region, &g_masked);
  r.value = r.depth_term + r.masked_weight * r.masked_term;
  auto gd = r.d_rendered.data();
  auto gm = g_masked.data();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += r.masked_weight * gm[i];
  return r;
}

double asmg_total(const DepthPair& pair, double t, const ScheduleConfig& cfg, const Mask* region) {
  return asmg_with_grad(pair, t, cfg, region).value;
}

}  // namespace sparsesplat
