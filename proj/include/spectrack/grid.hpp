#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "spectrack/common.hpp"

namespace spectrack {

// Pixel-centre coordinates in the normalised domain [-1, 1]^2.
// Pixel (x, y) maps to (2(x + 0.5)/W - 1, 2(y + 0.5)/H - 1); storage is row-major.
struct CoordinateField {
  int width = 0;
  int height = 0;
  std::vector<Vec2> coords;

  std::size_t size() const { return coords.size(); }
  const Vec2& at(int x, int y) const { return coords[static_cast<std::size_t>(y) * width + x]; }

  // Coordinate of column x / row y. The field is separable.
  double x_of(int x) const { return 2.0 * (x + 0.5) / width - 1.0; }
  double y_of(int y) const { return 2.0 * (y + 0.5) / height - 1.0; }
};

CoordinateField make_coordinate_field(int width, int height);

// Scalar (or RGB) intensity grid with an optional opacity channel.
// Intensity layout is pixel-major: value(x, y, c) = intensity[(y*W + x)*C + c].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, bool with_opacity = false);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double& at(int x, int y, int c = 0) { return intensity_[index(x, y) * channels_ + c]; }
  double at(int x, int y, int c = 0) const { return intensity_[index(x, y) * channels_ + c]; }

  std::span<double> intensity() { return intensity_; }
  std::span<const double> intensity() const { return intensity_; }

  bool has_opacity() const { return !opacity_.empty(); }
  std::span<double> opacity() { return opacity_; }
  std::span<const double> opacity() const { return opacity_; }
  void enable_opacity();

  // One channel copied out as a plain vector.
  std::vector<double> channel(int c) const;

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> intensity_;
  std::vector<double> opacity_;
};

// Upper bound on reported PSNR; also the value for zero error.
inline constexpr double kPsnrCap = 99.0;

double mse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b, double peak = 1.0);

// 8-bit netpbm I/O. Grey images use P5 (read: P2/P5), RGB uses P6 (read: P3/P6).
// Intensities are mapped linearly from [0, 1] and clamped.
void write_pnm(const Image& image, const std::filesystem::path& path);
void write_opacity_pgm(const Image& image, const std::filesystem::path& path);
Image read_pnm(const std::filesystem::path& path);

}  // namespace spectrack
