#include "sparsesplat/gradients.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "raster_common.hpp"
#include "sparsesplat/error.hpp"
#include "sparsesplat/parallel.hpp"

namespace sparsesplat {

namespace {

// Screen-space gradient slots accumulated per splat.
enum Slot { kU, kV, kConicA, kConicB, kConicC, kR, kG, kB, kOpacity, kDepth, kSlots };

struct Contribution {
  std::size_t slot;  // position in the tile list
  detail::SplatSample sample;
  double transmittance;  // before this splat
};

// Derivatives of the rotation matrix of a unit quaternion (w, x, y, z).
std::array<Eigen::Matrix3d, 4> rotation_derivatives(const Eigen::Quaterniond& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  std::array<Eigen::Matrix3d, 4> d;
  d[0] << 0, -2 * z, 2 * y,
          2 * z, 0, -2 * x,
          -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z,
          2 * y, -4 * x, -2 * w,
          2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w,
          2 * x, 0, 2 * z,
          -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x,
          2 * w, -4 * z, 2 * y,
          2 * x, 2 * y, 0;
  return d;
}

void check_shape(const Image& img, int w, int h, int c, const char* what) {
  if (img.width() != w || img.height() != h || img.channels() != c) {
    throw InvalidArgument(std::string("backward: ") + what + " has shape " + std::to_string(img.width()) + "x" +
                          std::to_string(img.height()) + "x" + std::to_string(img.channels()) + ", expected " +
                          std::to_string(w) + "x" + std::to_string(h) + "x" + std::to_string(c));
  }
}

void hash_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 1099511628211ull;
  }
}

}  // namespace

GaussianGrads GaussianGrads::zeros(std::size_t n) {
  GaussianGrads g;
  g.d_mu.assign(n, Eigen::Vector3d::Zero());
  g.d_rot.assign(n, Eigen::Vector4d::Zero());
  g.d_log_scale.assign(n, Eigen::Vector3d::Zero());
  g.d_opacity_logit.assign(n, 0.0);
  g.d_color.assign(n, Eigen::Vector3d::Zero());
  g.d_center_px.assign(n, Eigen::Vector2d::Zero());
  g.visible.assign(n, 0);
  return g;
}

bool GaussianGrads::all_finite() const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!d_mu[i].allFinite() || !d_rot[i].allFinite() || !d_log_scale[i].allFinite() ||
        !std::isfinite(d_opacity_logit[i]) || !d_color[i].allFinite()) {
      return false;
    }
  }
  return true;
}

GaussianGrads backward(const GaussianSet& scene, const CameraView& view, const RenderOutput& out,
                       const Image& d_rgb, const Image& d_depth, const RenderSettings& settings) {
  const int width = view.width(), height = view.height();
  check_shape(out.rgb, width, height, 3, "rendered rgb");
  check_shape(out.alpha, width, height, 1, "rendered alpha");
  check_shape(out.depth, width, height, 1, "rendered depth");
  check_shape(d_rgb, width, height, 3, "d_rgb");
  check_shape(d_depth, width, height, 1, "d_depth");

  GaussianGrads grads = GaussianGrads::zeros(scene.size());
  const std::vector<Splat2D> splats = project_splats(scene, view, settings);
  if (splats.empty()) return grads;
  const detail::TileBins bins = detail::bin_splats(splats, width, height, settings.tile_size);

  // Pass 1: per-tile screen-space gradients, indexed by position in the tile list.
  std::vector<std::vector<double>> tile_acc(bins.tile_count());
  std::vector<std::vector<std::uint8_t>> tile_hit(bins.tile_count());
  parallel_for(bins.tile_count(), [&](std::size_t tile) {
    const auto& list = bins.lists[tile];
    if (list.empty()) return;
    std::vector<double>& acc = tile_acc[tile];
    acc.assign(list.size() * kSlots, 0.0);
    std::vector<std::uint8_t>& hit = tile_hit[tile];
    hit.assign(list.size(), 0);
    std::vector<Contribution> contribs;
    contribs.reserve(list.size());

    const int tx = static_cast<int>(tile % bins.tiles_x), ty = static_cast<int>(tile / bins.tiles_x);
    const int x_end = std::min(width, (tx + 1) * bins.tile_size);
    const int y_end = std::min(height, (ty + 1) * bins.tile_size);
    for (int y = ty * bins.tile_size; y < y_end; ++y) {
      for (int x = tx * bins.tile_size; x < x_end; ++x) {
        contribs.clear();
        double transmittance = 1.0;
        double depth_acc = 0.0;
        for (std::size_t k = 0; k < list.size(); ++k) {
          const Splat2D& s = splats[list[k]];
          const detail::SplatSample smp = detail::sample_splat(s, x, y, settings);
          if (!smp.active) continue;
          contribs.push_back({k, smp, transmittance});
          depth_acc += smp.alpha * transmittance * s.depth;
          transmittance *= 1.0 - smp.alpha;
        }
        if (contribs.empty()) continue;

        const Eigen::Vector3d g_rgb(d_rgb.at(x, y, 0), d_rgb.at(x, y, 1), d_rgb.at(x, y, 2));
        const double alpha = 1.0 - transmittance;
        double g_depth_acc = 0.0, g_alpha = 0.0;
        if (alpha > settings.depth_alpha_floor) {
          const double g_d = d_depth.at(x, y);
          g_depth_acc = g_d / alpha;
          g_alpha = -g_d * (depth_acc / alpha) / alpha;
        }

        double behind = 0.0;  // sum over later splats of weight * feature
        for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
          const Splat2D& s = splats[list[it->slot]];
          const detail::SplatSample& smp = it->sample;
          const double weight = smp.alpha * it->transmittance;
          const double feature = g_rgb.dot(s.color) + g_depth_acc * s.depth + g_alpha;
          const double d_alpha = it->transmittance * feature - behind / (1.0 - smp.alpha);
          behind += weight * feature;

          double* a = &acc[it->slot * kSlots];
          a[kR] += g_rgb.x() * weight;
          a[kG] += g_rgb.y() * weight;
          a[kB] += g_rgb.z() * weight;
          a[kDepth] += g_depth_acc * weight;
          if (smp.clamped) continue;
          a[kOpacity] += d_alpha * smp.falloff;
          const double d_power = -d_alpha * s.opacity * smp.falloff;
          const double ca = s.conic.x(), cb = s.conic.y(), cc = s.conic.z();
          a[kConicA] += d_power * 0.5 * smp.dx * smp.dx;
          a[kConicB] += d_power * smp.dx * smp.dy;
          a[kConicC] += d_power * 0.5 * smp.dy * smp.dy;
          a[kU] -= d_power * (ca * smp.dx + cb * smp.dy);
          a[kV] -= d_power * (cb * smp.dx + cc * smp.dy);
        }
        for (const auto& c : contribs) hit[c.slot] = 1;
      }
    }
  });

  // Pass 2: reduce in fixed tile order.
  std::vector<std::array<double, kSlots>> per_splat(splats.size());
  for (auto& a : per_splat) a.fill(0.0);
  std::vector<std::uint8_t> touched(splats.size(), 0);
  for (std::size_t tile = 0; tile < bins.tile_count(); ++tile) {
    const auto& list = bins.lists[tile];
    const auto& acc = tile_acc[tile];
    if (acc.empty()) continue;
    for (std::size_t k = 0; k < list.size(); ++k) {
      for (int j = 0; j < kSlots; ++j) per_splat[list[k]][j] += acc[k * kSlots + j];
      touched[list[k]] |= tile_hit[tile][k];
    }
  }

  // Pass 3: chain rule from screen space to the Gaussian parameters.
  const Intrinsics& k = view.intrinsics;
  const Eigen::Matrix3d w = view.pose.rotation_matrix();
  parallel_for(splats.size(), [&](std::size_t si) {
    if (!touched[si]) return;
    const Splat2D& s = splats[si];
    const auto& a = per_splat[si];
    const std::size_t gi = s.source_index;
    const Gaussian& g = scene[gi];

    grads.visible[gi] = 1;
    grads.d_color[gi] = {a[kR], a[kG], a[kB]};
    const double opacity = s.opacity;
    grads.d_opacity_logit[gi] = a[kOpacity] * opacity * (1.0 - opacity);
    grads.d_center_px[gi] = {a[kU], a[kV]};

    const Eigen::Vector3d p = w * g.mu + view.pose.translation();
    const double iz = 1.0 / p.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Eigen::Matrix<double, 2, 3> jac;
    jac << k.fx * iz, 0.0, -k.fx * p.x() * iz2,
           0.0, k.fy * iz, -k.fy * p.y() * iz2;
    const Eigen::Matrix<double, 2, 3> t = jac * w;

    const Eigen::Quaterniond q_unit = g.rot.normalized();
    const Eigen::Matrix3d rot = q_unit.toRotationMatrix();
    const Eigen::Vector3d scale = g.scale();
    const Eigen::Matrix3d m = rot * scale.asDiagonal();
    const Eigen::Matrix3d sigma = m * m.transpose();

    Eigen::Matrix2d conic;
    conic << s.conic.x(), s.conic.y(), s.conic.y(), s.conic.z();
    Eigen::Matrix2d g_conic;
    g_conic << a[kConicA], 0.5 * a[kConicB], 0.5 * a[kConicB], a[kConicC];
    const Eigen::Matrix2d g_cov = -conic * g_conic * conic;

    const Eigen::Matrix3d g_sigma = t.transpose() * g_cov * t;
    const Eigen::Matrix<double, 2, 3> g_t = 2.0 * g_cov * t * sigma;
    const Eigen::Matrix<double, 2, 3> g_j = g_t * w.transpose();

    Eigen::Vector3d g_p;
    g_p.x() = g_j(0, 2) * (-k.fx * iz2) + a[kU] * k.fx * iz;
    g_p.y() = g_j(1, 2) * (-k.fy * iz2) + a[kV] * k.fy * iz;
    g_p.z() = g_j(0, 0) * (-k.fx * iz2) + g_j(0, 2) * (2.0 * k.fx * p.x() * iz3) + g_j(1, 1) * (-k.fy * iz2) +
              g_j(1, 2) * (2.0 * k.fy * p.y() * iz3) - a[kU] * k.fx * p.x() * iz2 -
              a[kV] * k.fy * p.y() * iz2 + a[kDepth];
    grads.d_mu[gi] = w.transpose() * g_p;

    const Eigen::Matrix3d g_m = 2.0 * g_sigma * m;
    const Eigen::Matrix3d g_r = g_m * scale.asDiagonal();
    for (int j = 0; j < 3; ++j) grads.d_log_scale[gi][j] = rot.col(j).dot(g_m.col(j)) * scale[j];

    const auto d_r = rotation_derivatives(q_unit);
    Eigen::Vector4d g_q;
    for (int j = 0; j < 4; ++j) g_q[j] = g_r.cwiseProduct(d_r[j]).sum();
    const Eigen::Vector4d q_vec(q_unit.w(), q_unit.x(), q_unit.y(), q_unit.z());
    grads.d_rot[gi] = (g_q - g_q.dot(q_vec) * q_vec) / g.rot.norm();
  });
  return grads;
}

std::vector<double> flatten_parameters(const GaussianSet& scene) {
  std::vector<double> theta;
  theta.reserve(scene.size() * kParamsPerGaussian);
  for (const auto& g : scene.gaussians) {
    theta.insert(theta.end(), {g.mu.x(), g.mu.y(), g.mu.z(), g.rot.w(), g.rot.x(), g.rot.y(), g.rot.z(),
                               g.log_scale.x(), g.log_scale.y(), g.log_scale.z(), g.opacity_logit, g.color.x(),
                               g.color.y(), g.color.z()});
  }
  return theta;
}

void unflatten_parameters(std::span<const double> theta, GaussianSet& scene) {
  if (theta.size() != scene.size() * kParamsPerGaussian) throw InvalidArgument("unflatten_parameters: size mismatch");
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const double* p = theta.data() + i * kParamsPerGaussian;
    Gaussian& g = scene[i];
    g.mu = {p[0], p[1], p[2]};
    g.rot = Eigen::Quaterniond(p[3], p[4], p[5], p[6]);
    g.log_scale = {p[7], p[8], p[9]};
    g.opacity_logit = p[10];
    g.color = {p[11], p[12], p[13]};
  }
}

std::vector<double> flatten_gradients(const GaussianGrads& grads) {
  std::vector<double> out;
  out.reserve(grads.size() * kParamsPerGaussian);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& r = grads.d_rot[i];
    out.insert(out.end(), {grads.d_mu[i].x(), grads.d_mu[i].y(), grads.d_mu[i].z(), r[0], r[1], r[2], r[3],
                           grads.d_log_scale[i].x(), grads.d_log_scale[i].y(), grads.d_log_scale[i].z(),
                           grads.d_opacity_logit[i], grads.d_color[i].x(), grads.d_color[i].y(),
                           grads.d_color[i].z()});
  }
  return out;
}

std::string parameter_name(std::size_t flat_index) {
  static const char* names[kParamsPerGaussian] = {"mu.x",        "mu.y",        "mu.z",          "rot.w",
                                                  "rot.x",       "rot.y",       "rot.z",         "log_scale.x",
                                                  "log_scale.y", "log_scale.z", "opacity_logit", "color.r",
                                                  "color.g",     "color.b"};
  return "gaussian[" + std::to_string(flat_index / kParamsPerGaussian) + "]." +
         names[flat_index % kParamsPerGaussian];
}

std::uint64_t activation_signature(const GaussianSet& scene, const CameraView& view,
                                   const RenderSettings& settings) {
  const std::vector<Splat2D> splats = project_splats(scene, view, settings);
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& s : splats) hash_mix(h, s.source_index);
  for (int y = 0; y < view.height(); ++y) {
    for (int x = 0; x < view.width(); ++x) {
      double transmittance = 1.0;
      for (const auto& s : splats) {
        const detail::SplatSample smp = detail::sample_splat(s, x, y, settings);
        if (!smp.active) continue;
        hash_mix(h, (s.source_index << 1) | (smp.clamped ? 1u : 0u));
        transmittance *= 1.0 - smp.alpha;
      }
      hash_mix(h, (1.0 - transmittance) > settings.depth_alpha_floor ? 0xA1u : 0xA0u);
    }
  }
  return h;
}

GradCheckReport check_gradient(std::span<const double> theta, std::span<const double> analytic,
                               const std::function<double(std::span<const double>)>& objective, double h,
                               const GradCheckOptions& options,
                               const std::function<std::uint64_t(std::span<const double>)>& signature) {
  if (!(h > 0.0)) throw InvalidArgument("check_gradient: step must be positive");
  if (theta.size() != analytic.size()) throw InvalidArgument("check_gradient: gradient size mismatch");

  std::vector<std::size_t> indices = options.indices;
  if (indices.empty()) {
    indices.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) indices[i] = i;
  }

  GradCheckReport report;
  std::vector<double> probe(theta.begin(), theta.end());
  const std::uint64_t base_signature = signature ? signature(theta) : 0;
  for (std::size_t i : indices) {
    const double original = probe[i];
    probe[i] = original + h;
    const double f_plus = objective(probe);
    const std::uint64_t sig_plus = signature ? signature(probe) : 0;
    probe[i] = original - h;
    const double f_minus = objective(probe);
    const std::uint64_t sig_minus = signature ? signature(probe) : 0;
    probe[i] = original;

    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double a = analytic[i];
    const double magnitude = std::max(std::abs(a), std::abs(numeric));
    if (!(magnitude > options.min_gradient)) continue;
    if (signature && (sig_plus != base_signature || sig_minus != base_signature)) {
      ++report.skipped;
      continue;
    }
    ++report.checked;
    const double rel = std::abs(a - numeric) / magnitude;
    if (!(rel <= report.max_relative_error)) {
      report.max_relative_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

GradCheckReport finite_difference_check(const GaussianSet& scene, const CameraView& view, const RenderLoss& loss,
                                        double h, const GradCheckOptions& options,
                                        const RenderSettings& settings) {
  const RenderOutput out = render(scene, view, settings);
  const LossEvaluation eval = loss(out);
  const GaussianGrads grads = backward(scene, view, out, eval.d_rgb, eval.d_depth, settings);
  const std::vector<double> theta = flatten_parameters(scene);
  const std::vector<double> analytic = flatten_gradients(grads);

  GaussianSet work = scene;
  auto objective = [&](std::span<const double> t) {
    unflatten_parameters(t, work);
    return loss(render(work, view, settings)).value;
  };
  auto signature = [&](std::span<const double> t) {
    unflatten_parameters(t, work);
    std::uint64_t sig = activation_signature(work, view, settings);
    hash_mix(sig, loss(render(work, view, settings)).kink_signature);
    return sig;
  };
  GradCheckReport report = check_gradient(theta, analytic, objective, h, options, signature);
  if (report.checked > 0) report.worst_parameter = parameter_name(report.worst_index);
  return report;
}

}  // namespace sparsesplat
