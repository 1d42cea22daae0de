#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "spectrack/common.hpp"
#include "spectrack/grid.hpp"

namespace spectrack {

// Anisotropic 2D Gaussian. Only the first `Scene::channels` amplitudes are used.
struct Gaussian2D {
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Identity();
  std::array<double, 3> amplitude{1.0, 1.0, 1.0};
  double opacity = 1.0;
};

// Throws InvalidPrimitive unless the covariance is symmetric positive definite
// and opacity lies in (0, 1].
void validate(const Gaussian2D& g);

struct Scene {
  std::vector<Gaussian2D> gaussians;
  int channels = 1;

  std::size_t size() const { return gaussians.size(); }
};

// Mahalanobis truncation radius. std::nullopt disables truncation.
using Cutoff = std::optional<double>;
inline constexpr double kDefaultCutoff = 4.0;

double eval_kernel(const Gaussian2D& g, const Vec2& p, Cutoff cutoff = kDefaultCutoff);

// Additive splatting:
//   intensity(p) = sum_i amplitude_i * opacity_i * k_i(p)
//   opacity(p)   = 1 - exp(-sum_i opacity_i * k_i(p))
Image render(const Scene& scene, const CoordinateField& field, Cutoff cutoff = kDefaultCutoff);

// Gradient of <adj_I, intensity> + <adj_O, opacity> for one primitive.
// `covariance` holds dL/dSigma_ab for every entry of the (symmetric) matrix,
// i.e. the first-order change is sum_ab covariance(a,b) * dSigma(a,b).
struct GaussianGradient {
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Zero();
  std::array<double, 3> amplitude{0.0, 0.0, 0.0};
  double opacity = 0.0;
};

// adjoint_opacity is read from its first intensity channel.
std::vector<GaussianGradient> render_backward(const Scene& scene, const CoordinateField& field,
                                              const Image& adjoint_intensity,
                                              const Image& adjoint_opacity,
                                              Cutoff cutoff = kDefaultCutoff);

// Text format: one primitive per line,
//   mean_x mean_y cov_xx cov_xy cov_yy amplitude opacity
// RGB scenes carry three amplitudes instead of one. '#' starts a comment line.
void write_scene(const Scene& scene, const std::filesystem::path& path);
Scene read_scene(const std::filesystem::path& path);

}  // namespace spectrack
