#include "sparsesplat/pyramid.hpp"

#include <cmath>
#include <string>

#include "sparsesplat/error.hpp"

namespace sparsesplat {

namespace {

constexpr double kBinomial[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

// Axis 0 runs along x, axis 1 along y.
int axis_length(const Image& img, int axis) { return axis == 0 ? img.width() : img.height(); }

Image with_axis_length(const Image& like, int axis, int n) {
  return axis == 0 ? Image(n, like.height(), like.channels()) : Image(like.width(), n, like.channels());
}

double& cell(Image& img, int axis, int along, int across, int c) {
  return axis == 0 ? img.at(along, across, c) : img.at(across, along, c);
}
double cell(const Image& img, int axis, int along, int across, int c) {
  return axis == 0 ? img.at(along, across, c) : img.at(across, along, c);
}

Image downsample_axis(const Image& img, int axis) {
  const int n = axis_length(img, axis);
  const int m = (n + 1) / 2;
  const int across = axis == 0 ? img.height() : img.width();
  Image out = with_axis_length(img, axis, m);
  for (int a = 0; a < across; ++a) {
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < img.channels(); ++c) {
        // Center plus weighted deviations, so constant rows pass through exactly.
        const double center = cell(img, axis, reflect101(2 * i, n), a, c);
        double dev = 0.0;
        for (int k = -2; k <= 2; ++k) {
          if (k != 0) dev += kBinomial[k + 2] * (cell(img, axis, reflect101(2 * i + k, n), a, c) - center);
        }
        cell(out, axis, i, a, c) = center + dev;
      }
    }
  }
  return out;
}

Image downsample_axis_adjoint(const Image& grad, int axis, int n) {
  const int m = axis_length(grad, axis);
  const int across = axis == 0 ? grad.height() : grad.width();
  Image out = with_axis_length(grad, axis, n);
  for (int a = 0; a < across; ++a) {
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < grad.channels(); ++c) {
        const double g = cell(grad, axis, i, a, c);
        for (int k = -2; k <= 2; ++k) cell(out, axis, reflect101(2 * i + k, n), a, c) += kBinomial[k + 2] * g;
      }
    }
  }
  return out;
}

Image upsample_axis(const Image& img, int axis, int n) {
  const int m = axis_length(img, axis);
  const int across = axis == 0 ? img.height() : img.width();
  Image out = with_axis_length(img, axis, n);
  for (int a = 0; a < across; ++a) {
    for (int i = 0; i < n; ++i) {
      const int i0 = std::min(i / 2, m - 1);
      const int i1 = std::min(i0 + 1, m - 1);
      const double frac = (i % 2) * 0.5;
      for (int c = 0; c < img.channels(); ++c) {
        const double lo = cell(img, axis, i0, a, c);
        cell(out, axis, i, a, c) = lo + frac * (cell(img, axis, i1, a, c) - lo);
      }
    }
  }
  return out;
}

Image upsample_axis_adjoint(const Image& grad, int axis, int m) {
  const int n = axis_length(grad, axis);
  const int across = axis == 0 ? grad.height() : grad.width();
  Image out = with_axis_length(grad, axis, m);
  for (int a = 0; a < across; ++a) {
    for (int i = 0; i < n; ++i) {
      const int i0 = std::min(i / 2, m - 1);
      const int i1 = std::min(i0 + 1, m - 1);
      const double frac = (i % 2) * 0.5;
      for (int c = 0; c < grad.channels(); ++c) {
        const double g = cell(grad, axis, i, a, c);
        cell(out, axis, i0, a, c) += (1.0 - frac) * g;
        cell(out, axis, i1, a, c) += frac * g;
      }
    }
  }
  return out;
}

Image subtract(const Image& a, const Image& b) {
  Image out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

void add_into(Image& a, const Image& b) {
  auto o = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
}

}  // namespace

Image blur_downsample(const Image& img) { return downsample_axis(downsample_axis(img, 0), 1); }

Image upsample_bilinear(const Image& coarse, int width, int height) {
  return upsample_axis(upsample_axis(coarse, 0, width), 1, height);
}

Image blur_downsample_adjoint(const Image& grad_coarse, int width, int height) {
  return downsample_axis_adjoint(downsample_axis_adjoint(grad_coarse, 1, height), 0, width);
}

Image upsample_bilinear_adjoint(const Image& grad_fine, int coarse_width, int coarse_height) {
  return upsample_axis_adjoint(upsample_axis_adjoint(grad_fine, 1, coarse_height), 0, coarse_width);
}

LaplacianPyramid laplacian_decompose(const Image& img, int num_levels) {
  if (num_levels < 1) throw InvalidArgument("laplacian_decompose: need at least one level");
  if (num_levels >= 30 || std::min(img.width(), img.height()) < (1 << num_levels)) {
    throw InvalidArgument("laplacian_decompose: " + std::to_string(img.width()) + "x" +
                          std::to_string(img.height()) + " image is too small for " + std::to_string(num_levels) +
                          " levels");
  }
  LaplacianPyramid pyr;
  pyr.levels.reserve(num_levels);
  Image current = img;
  for (int i = 0; i < num_levels; ++i) {
    Image next = blur_downsample(current);
    pyr.levels.push_back(subtract(current, upsample_bilinear(next, current.width(), current.height())));
    current = std::move(next);
  }
  pyr.top = std::move(current);
  return pyr;
}

Image laplacian_reconstruct(const LaplacianPyramid& pyramid) {
  Image current = pyramid.top;
  for (int i = pyramid.num_levels() - 1; i >= 0; --i) {
    const Image& band = pyramid.levels[i];
    Image up = upsample_bilinear(current, band.width(), band.height());
    add_into(up, band);
    current = std::move(up);
  }
  return current;
}

void MlcrConfig::validate() const {
  if (level_weights.empty()) throw InvalidArgument("mlcr: at least one level weight required");
  for (double w : level_weights) {
    if (!(w >= 0.0)) throw InvalidArgument("mlcr: level weights must be non-negative");
  }
  if (!(top_weight >= 0.0)) throw InvalidArgument("mlcr: top weight must be non-negative");
}

double mlcr_loss(const Image& rendered, const Image& synthesized, const MlcrConfig& config) {
  return mlcr_loss_with_grad(rendered, synthesized, config).value;
}

MlcrResult mlcr_loss_with_grad(const Image& rendered, const Image& synthesized, const MlcrConfig& config) {
  if (!rendered.same_shape(synthesized)) throw InvalidArgument("mlcr_loss: image dimensions differ");
  config.validate();
  const int k = config.num_levels();
  const LaplacianPyramid pr = laplacian_decompose(rendered, k);
  const LaplacianPyramid ps = laplacian_decompose(synthesized, k);

  MlcrResult result;
  std::uint64_t sig = 1469598103934665603ull;
  // Weighted mean |a - b| and its gradient with respect to a.
  auto level_term = [&](const Image& a, const Image& b, double weight, Image& grad) {
    grad = Image(a.width(), a.height(), a.channels());
    const auto ad = a.data();
    const auto bd = b.data();
    auto gd = grad.data();
    const double scale = weight / static_cast<double>(ad.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) {
      const double d = ad[i] - bd[i];
      sum += std::abs(d);
      const int sign = (d > 0.0) - (d < 0.0);
      gd[i] = scale * sign;
      sig = (sig ^ static_cast<std::uint64_t>(sign + 1)) * 1099511628211ull;
    }
    return scale * sum;
  };

  std::vector<Image> g_levels(k);
  Image g_top;
  for (int i = 0; i < k; ++i) {
    result.value += level_term(pr.levels[i], ps.levels[i], config.level_weights[i], g_levels[i]);
  }
  result.value += level_term(pr.top, ps.top, config.top_weight, g_top);
  result.kink_signature = sig;

  // Backpropagate through I(i+1) = D(I(i)), L(i) = I(i) - U(I(i+1)).
  Image g_next = std::move(g_top);
  for (int i = k - 1; i >= 0; --i) {
    const Image& band = pr.levels[i];
    Image g_up = upsample_bilinear_adjoint(g_levels[i], g_next.width(), g_next.height());
    auto gn = g_next.data();
    auto gu = g_up.data();
    for (std::size_t j = 0; j < gn.size(); ++j) gn[j] -= gu[j];
    Image g_cur = blur_downsample_adjoint(g_next, band.width(), band.height());
    add_into(g_cur, g_levels[i]);
    g_next = std::move(g_cur);
  }
  result.d_rendered = std::move(g_next);
  return result;
}

}  // namespace sparsesplat
