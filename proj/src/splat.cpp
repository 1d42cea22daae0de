#include "spectrack/splat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "spectrack/parallel.hpp"

namespace spectrack {
namespace {

// Kernel evaluation data shared by eval_kernel, render and render_backward so
// all three truncate identically.
struct PreparedGaussian {
  Vec2 mean;
  double inv_xx, inv_xy, inv_yy;
  double max_q;  // squared cutoff, +inf when disabled
  int x0, x1, y0, y1;  // inclusive pixel box that can be non-zero
};

double cov_xy(const Mat2& c) { return 0.5 * (c(0, 1) + c(1, 0)); }

PreparedGaussian prepare(const Gaussian2D& g, Cutoff cutoff) {
  const double a = g.covariance(0, 0);
  const double b = cov_xy(g.covariance);
  const double c = g.covariance(1, 1);
  const double det = a * c - b * b;
  PreparedGaussian p;
  p.mean = g.mean;
  p.inv_xx = c / det;
  p.inv_xy = -b / det;
  p.inv_yy = a / det;
  p.max_q = cutoff ? (*cutoff) * (*cutoff) : std::numeric_limits<double>::infinity();
  return p;
}

double quad_form(const PreparedGaussian& p, double dx, double dy) {
  return p.inv_xx * dx * dx + 2.0 * p.inv_xy * dx * dy + p.inv_yy * dy * dy;
}

double kernel(const PreparedGaussian& p, double dx, double dy) {
  const double q = quad_form(p, dx, dy);
  if (q > p.max_q) return 0.0;
  return std::exp(-0.5 * q);
}

// Pixel index range [lo, hi] whose centres may lie within `radius` of `centre`
// along an axis with `n` pixels. Padded by one pixel; the kernel test is exact.
std::pair<int, int> axis_range(double centre, double radius, int n) {
  if (!std::isfinite(radius)) return {0, n - 1};
  const double lo = (centre - radius + 1.0) * n / 2.0 - 0.5;
  const double hi = (centre + radius + 1.0) * n / 2.0 - 0.5;
  const double flo = std::max(std::floor(lo) - 1.0, 0.0);
  const double fhi = std::min(std::ceil(hi) + 1.0, static_cast<double>(n - 1));
  if (flo > fhi) return {1, 0};
  return {static_cast<int>(flo), static_cast<int>(fhi)};
}

std::vector<PreparedGaussian> prepare_scene(const Scene& scene, const CoordinateField& field,
                                            Cutoff cutoff) {
  std::vector<PreparedGaussian> out;
  out.reserve(scene.size());
  for (const auto& g : scene.gaussians) {
    validate(g);
    PreparedGaussian p = prepare(g, cutoff);
    const double rx = cutoff ? *cutoff * std::sqrt(g.covariance(0, 0))
                             : std::numeric_limits<double>::infinity();
    const double ry = cutoff ? *cutoff * std::sqrt(g.covariance(1, 1))
                             : std::numeric_limits<double>::infinity();
    std::tie(p.x0, p.x1) = axis_range(g.mean.x(), rx, field.width);
    std::tie(p.y0, p.y1) = axis_range(g.mean.y(), ry, field.height);
    out.push_back(p);
  }
  return out;
}

// Per-pixel sum_i opacity_i * k_i(p), accumulated in primitive order.
std::vector<double> density(const Scene& scene, const std::vector<PreparedGaussian>& prepared,
                            const CoordinateField& field) {
  std::vector<double> s(field.size(), 0.0);
  parallel::for_ranges(static_cast<std::size_t>(field.height), [&](std::size_t r0, std::size_t r1) {
    for (int y = static_cast<int>(r0); y < static_cast<int>(r1); ++y) {
      const double py = field.y_of(y);
      for (std::size_t i = 0; i < prepared.size(); ++i) {
        const auto& p = prepared[i];
        if (y < p.y0 || y > p.y1) continue;
        const double dy = py - p.mean.y();
        for (int x = p.x0; x <= p.x1; ++x) {
          const double k = kernel(p, field.x_of(x) - p.mean.x(), dy);
          s[static_cast<std::size_t>(y) * field.width + x] += scene.gaussians[i].opacity * k;
        }
      }
    }
  });
  return s;
}

void check_channels(const Scene& scene) {
  if (scene.channels != 1 && scene.channels != 3) {
    throw std::invalid_argument("scene channels must be 1 or 3");
  }
}

}  // namespace

void validate(const Gaussian2D& g) {
  const Mat2& c = g.covariance;
  if (!g.mean.allFinite() || !c.allFinite()) throw InvalidPrimitive("non-finite Gaussian parameters");
  const double scale = std::max({std::abs(c(0, 0)), std::abs(c(1, 1)), 1e-300});
  if (std::abs(c(0, 1) - c(1, 0)) > 1e-12 * scale) throw InvalidPrimitive("covariance is not symmetric");
  const double b = cov_xy(c);
  const double det = c(0, 0) * c(1, 1) - b * b;
  if (!(det > 0.0) || !(c.trace() > 0.0)) throw InvalidPrimitive("covariance is not positive definite");
  if (!(g.opacity > 0.0 && g.opacity <= 1.0)) throw InvalidPrimitive("opacity must lie in (0, 1]");
}

double eval_kernel(const Gaussian2D& g, const Vec2& p, Cutoff cutoff) {
  validate(g);
  const PreparedGaussian pg = prepare(g, cutoff);
  return kernel(pg, p.x() - g.mean.x(), p.y() - g.mean.y());
}

Image render(const Scene& scene, const CoordinateField& field, Cutoff cutoff) {
  check_channels(scene);
  const int channels = scene.channels;
  const auto prepared = prepare_scene(scene, field, cutoff);
  Image out(field.width, field.height, channels, true);
  auto intensity = out.intensity();
  auto opacity = out.opacity();

  parallel::for_ranges(static_cast<std::size_t>(field.height), [&](std::size_t r0, std::size_t r1) {
    for (int y = static_cast<int>(r0); y < static_cast<int>(r1); ++y) {
      const double py = field.y_of(y);
      for (std::size_t i = 0; i < prepared.size(); ++i) {
        const auto& p = prepared[i];
        if (y < p.y0 || y > p.y1) continue;
        const auto& g = scene.gaussians[i];
        const double dy = py - p.mean.y();
        for (int x = p.x0; x <= p.x1; ++x) {
          const double k = kernel(p, field.x_of(x) - p.mean.x(), dy);
          const std::size_t pix = static_cast<std::size_t>(y) * field.width + x;
          const double ak = g.opacity * k;
          for (int c = 0; c < channels; ++c) intensity[pix * channels + c] += g.amplitude[c] * ak;
          opacity[pix] += ak;
        }
      }
      for (int x = 0; x < field.width; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * field.width + x;
        opacity[pix] = -std::expm1(-opacity[pix]);
      }
    }
  });
  return out;
}

std::vector<GaussianGradient> render_backward(const Scene& scene, const CoordinateField& field,
                                              const Image& adjoint_intensity,
                                              const Image& adjoint_opacity, Cutoff cutoff) {
  check_channels(scene);
  const int channels = scene.channels;
  if (adjoint_intensity.width() != field.width || adjoint_intensity.height() != field.height ||
      adjoint_intensity.channels() != channels) {
    throw ShapeError("render_backward: intensity adjoint does not match the field");
  }
  if (adjoint_opacity.width() != field.width || adjoint_opacity.height() != field.height) {
    throw ShapeError("render_backward: opacity adjoint does not match the field");
  }
  const auto prepared = prepare_scene(scene, field, cutoff);
  std::vector<double> transmittance = density(scene, prepared, field);
  for (auto& s : transmittance) s = std::exp(-s);

  const auto adj_i = adjoint_intensity.intensity();
  const auto adj_o = adjoint_opacity.intensity();
  const int adj_o_stride = adjoint_opacity.channels();

  std::vector<GaussianGradient> grads(scene.size());
  parallel::for_ranges(scene.size(), [&](std::size_t g0, std::size_t g1) {
    for (std::size_t i = g0; i < g1; ++i) {
      const auto& p = prepared[i];
      const auto& g = scene.gaussians[i];
      GaussianGradient out;
      for (int y = p.y0; y <= p.y1; ++y) {
        const double dy = field.y_of(y) - p.mean.y();
        for (int x = p.x0; x <= p.x1; ++x) {
          const double dx = field.x_of(x) - p.mean.x();
          const double k = kernel(p, dx, dy);
          if (k == 0.0) continue;
          const std::size_t pix = static_cast<std::size_t>(y) * field.width + x;
          double colour = 0.0;
          for (int c = 0; c < channels; ++c) {
            const double ai = adj_i[pix * channels + c];
            colour += ai * g.amplitude[c];
            out.amplitude[c] += ai * g.opacity * k;
          }
          const double d_density = adj_o[pix * adj_o_stride] * transmittance[pix];
          const double d_weight = colour + d_density;  // dL/d(opacity_i * k)
          out.opacity += d_weight * k;
          const double d_kernel = d_weight * g.opacity;
          const double ux = p.inv_xx * dx + p.inv_xy * dy;
          const double uy = p.inv_xy * dx + p.inv_yy * dy;
          const double s = d_kernel * k;
          out.mean.x() += s * ux;
          out.mean.y() += s * uy;
          out.covariance(0, 0) += 0.5 * s * ux * ux;
          out.covariance(0, 1) += 0.5 * s * ux * uy;
          out.covariance(1, 1) += 0.5 * s * uy * uy;
        }
      }
      out.covariance(1, 0) = out.covariance(0, 1);
      grads[i] = out;
    }
  });
  return grads;
}

void write_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "# mean_x mean_y cov_xx cov_xy cov_yy amplitude" << (scene.channels == 3 ? "_rgb" : "")
      << " opacity\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (const auto& g : scene.gaussians) {
    put(g.mean.x()); out << ' ';
    put(g.mean.y()); out << ' ';
    put(g.covariance(0, 0)); out << ' ';
    put(cov_xy(g.covariance)); out << ' ';
    put(g.covariance(1, 1)); out << ' ';
    for (int c = 0; c < scene.channels; ++c) {
      put(g.amplitude[c]);
      out << ' ';
    }
    put(g.opacity);
    out << '\n';
  }
}

Scene read_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Scene scene;
  std::string line;
  int line_no = 0;
  int channels = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> v;
    double d;
    while (ss >> d) v.push_back(d);
    if (!ss.eof()) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad number");
    const int c = v.size() == 7 ? 1 : v.size() == 9 ? 3 : 0;
    if (c == 0 || (channels != 0 && c != channels)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 7 (grey) or 9 (RGB) fields consistently");
    }
    channels = c;
    Gaussian2D g;
    g.mean = Vec2(v[0], v[1]);
    g.covariance << v[2], v[3], v[3], v[4];
    for (int k = 0; k < c; ++k) g.amplitude[k] = v[5 + k];
    g.opacity = v[5 + c];
    validate(g);
    scene.gaussians.push_back(g);
  }
  scene.channels = channels == 0 ? 1 : channels;
  return scene;
}

}  // namespace spectrack
