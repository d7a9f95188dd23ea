#include "sparsesplat/losses.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "sparsesplat/error.hpp"

namespace sparsesplat {

namespace {

constexpr int kWindow = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWindow>& window_weights() {
  static const std::array<double, kWindow> w = [] {
    std::array<double, kWindow> out{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kWindow / 2;
      out[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
  }();
  return w;
}

// Single-channel plane as a flat row-major buffer.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Valid-mode separable window filter: output is (w - 10) x (h - 10).
Plane filter_valid(const Plane& in) {
  const auto& g = window_weights();
  Plane tmp(in.w - kWindow + 1, in.h);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < tmp.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * in.at(x + k, y);
      tmp.at(x, y) = s;
    }
  }
  Plane out(tmp.w, in.h - kWindow + 1);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * tmp.at(x, y + k);
      out.at(x, y) = s;
    }
  }
  return out;
}

// Transpose of filter_valid, back to a w x h plane.
Plane filter_valid_adjoint(const Plane& in, int w, int h) {
  const auto& g = window_weights();
  Plane tmp(in.w, h);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      for (int k = 0; k < kWindow; ++k) tmp.at(x, y + k) += g[k] * in.at(x, y);
    }
  }
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < tmp.w; ++x) {
      for (int k = 0; k < kWindow; ++k) out.at(x + k, y) += g[k] * tmp.at(x, y);
    }
  }
  return out;
}

Plane extract(const Image& img, int c) {
  Plane p(img.width(), img.height());
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) p.at(x, y) = img.at(x, y, c);
  }
  return p;
}

Plane product(const Plane& a, const Plane& b) {
  Plane out(a.w, a.h);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

void check_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": image shapes differ");
}

LossGrad ssim_impl(const Image& a, const Image& b, bool want_grad) {
  check_same(a, b, "ssim");
  if (std::min(a.width(), a.height()) < kWindow) {
    throw InvalidArgument("ssim: images must be at least 11 pixels on each side");
  }
  LossGrad out;
  if (want_grad) out.grad = Image(a.width(), a.height(), a.channels());
  const int ow = a.width() - kWindow + 1, oh = a.height() - kWindow + 1;
  const double norm = 1.0 / (static_cast<double>(ow) * oh * a.channels());

  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const Plane x = extract(a, c), y = extract(b, c);
    const Plane mx = filter_valid(x), my = filter_valid(y);
    const Plane exx = filter_valid(product(x, x)), eyy = filter_valid(product(y, y));
    const Plane exy = filter_valid(product(x, y));

    Plane ga(ow, oh), gb(ow, oh), gc(ow, oh);
    for (std::size_t i = 0; i < mx.v.size(); ++i) {
      const double ux = mx.v[i], uy = my.v[i];
      const double sxx = exx.v[i] - ux * ux, syy = eyy.v[i] - uy * uy, sxy = exy.v[i] - ux * uy;
      const double n1 = 2.0 * ux * uy + kC1, n2 = 2.0 * sxy + kC2;
      const double d1 = ux * ux + uy * uy + kC1, d2 = sxx + syy + kC2;
      const double s = n1 * n2 / (d1 * d2);
      total += s;
      if (!want_grad) continue;
      // Partials with respect to the window mean of x, E[x^2] and E[xy].
      ga.v[i] = norm * ((2.0 * uy * n2 - 2.0 * uy * n1) / (d1 * d2) - s * (2.0 * ux / d1 - 2.0 * ux / d2));
      gb.v[i] = norm * (-s / d2);
      gc.v[i] = norm * (2.0 * n1 / (d1 * d2));
    }
    if (!want_grad) continue;
    const Plane sa = filter_valid_adjoint(ga, x.w, x.h);
    const Plane sb = filter_valid_adjoint(gb, x.w, x.h);
    const Plane sc = filter_valid_adjoint(gc, x.w, x.h);
    for (int py = 0; py < x.h; ++py) {
      for (int px = 0; px < x.w; ++px) {
        out.grad.at(px, py, c) = sa.at(px, py) + 2.0 * x.at(px, py) * sb.at(px, py) + y.at(px, py) * sc.at(px, py);
      }
    }
  }
  out.value = total * norm;
  return out;
}

void accumulate(Image& into, const Image& g, double weight) {
  auto d = into.data();
  auto s = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += weight * s[i];
}

}  // namespace

double l1_loss(const Image& a, const Image& b) {
  check_same(a, b, "l1_loss");
  if (a.size() == 0) return 0.0;
  double sum = 0.0;
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) sum += std::abs(ad[i] - bd[i]);
  return sum / static_cast<double>(ad.size());
}

LossGrad l1_loss_with_grad(const Image& a, const Image& b) {
  LossGrad out;
  out.value = l1_loss(a, b);
  out.grad = Image(a.width(), a.height(), a.channels());
  const auto ad = a.data(), bd = b.data();
  auto gd = out.grad.data();
  const double scale = ad.empty() ? 0.0 : 1.0 / static_cast<double>(ad.size());
  std::uint64_t sig = 1469598103934665603ull;
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double d = ad[i] - bd[i];
    const int sign = (d > 0.0) - (d < 0.0);
    gd[i] = scale * sign;
    sig = (sig ^ static_cast<std::uint64_t>(sign + 1)) * 1099511628211ull;
  }
  out.kink_signature = sig;
  return out;
}

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, false).value; }

LossGrad ssim_with_grad(const Image& a, const Image& b) { return ssim_impl(a, b, true); }

double psnr(const Image& a, const Image& b) {
  check_same(a, b, "psnr");
  double mse = 0.0;
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) mse += (ad[i] - bd[i]) * (ad[i] - bd[i]);
  if (ad.empty() || mse == 0.0) return std::numeric_limits<double>::infinity();
  mse /= static_cast<double>(ad.size());
  return 10.0 * std::log10(1.0 / mse);
}

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw InvalidArgument("loss weights: lambda1 must lie in [0, 1]");
  if (!(lambda2 >= 0.0) || !(lambda3 >= 0.0)) throw InvalidArgument("loss weights: lambdas must be non-negative");
}

TotalLoss total_loss_with_grad(const RenderOutput& rendered, const Image& target, const LossContext& context,
                               const LossOptions& options) {
  const LossWeights& w = options.weights;
  w.validate();
  check_same(rendered.rgb, target, "total_loss");

  TotalLoss out;
  out.d_rgb = Image(target.width(), target.height(), target.channels());
  out.d_depth = Image(target.width(), target.height(), 1);
  LossBreakdown& b = out.breakdown;

  const LossGrad l1 = l1_loss_with_grad(rendered.rgb, target);
  b.l1 = l1.value;
  accumulate(out.d_rgb, l1.grad, w.lambda1);
  out.kink_signature = l1.kink_signature;

  const LossGrad s = ssim_with_grad(rendered.rgb, target);
  b.ssim_term = 1.0 - s.value;
  accumulate(out.d_rgb, s.grad, -(1.0 - w.lambda1));

  const bool regularize = context.pseudo_view || options.regularize_real_views;
  if (regularize && w.lambda2 > 0.0) {
    const MlcrResult m = mlcr_loss_with_grad(rendered.rgb, target, options.mlcr);
    b.mlcr = m.value;
    accumulate(out.d_rgb, m.d_rendered, w.lambda2);
    out.kink_signature = (out.kink_signature ^ m.kink_signature) * 1099511628211ull;
  }
  if (regularize && w.lambda3 > 0.0 && context.reference_depth) {
    const DepthPair pair = DepthPair::from_render(rendered.depth, rendered.alpha, *context.reference_depth);
    const AsmgResult a = asmg_with_grad(pair, context.iteration, options.schedule, context.region);
    b.asmg = a.value;
    b.asmg_masked = a.masked_weight * a.masked_term;
    accumulate(out.d_depth, a.d_rendered, w.lambda3);
  }
  b.total = w.lambda1 * b.l1 + (1.0 - w.lambda1) * b.ssim_term + w.lambda2 * b.mlcr + w.lambda3 * b.asmg;
  return out;
}

LossBreakdown total_loss(const RenderOutput& rendered, const Image& target, const LossContext& context,
                         const LossOptions& options) {
  return total_loss_with_grad(rendered, target, context, options).breakdown;
}

}  // namespace sparsesplat
