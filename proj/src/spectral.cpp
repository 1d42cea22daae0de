#include "spectrack/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "spectrack/parallel.hpp"

namespace spectrack {
namespace {

std::pair<int, int> canonical(int kx, int ky) {
  if (kx > 0 || (kx == 0 && ky >= 0)) return {kx, ky};
  return {-kx, -ky};
}

// Table of exp(-2 pi j m / n) for m in [0, n).
std::vector<Complex> twiddles(int n) {
  std::vector<Complex> t(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) t[m] = std::polar(1.0, -2.0 * kPi * m / n);
  return t;
}

int positive_mod(long long a, int n) {
  const long long r = a % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

}  // namespace

int FrequencyGrid::max_index() const {
  int r = 0;
  for (const auto& e : entries) r = std::max({r, std::abs(e.kx), std::abs(e.ky)});
  return r;
}

int band_of(int kx, int ky, BandingMode mode) {
  const int r = std::max(std::abs(kx), std::abs(ky));
  if (mode == BandingMode::LinearFrequency) return std::max(r - 1, 0);
  if (r <= 1) return 0;
  int band = 0;
  long long pow2 = 1;
  while (pow2 < r) {
    pow2 <<= 1;
    ++band;
  }
  return band;
}

int required_max_index(int num_bands, BandingMode mode) {
  if (num_bands <= 1) return 0;
  if (mode == BandingMode::LinearFrequency) return num_bands;
  return (1 << (num_bands - 2)) + 1;
}

FrequencyGrid build_frequency_grid(int num_bands, int max_index, double phase_scale, BandingMode mode,
                                   GridAxes axes) {
  if (num_bands < 1) throw ConfigError("num_bands must be at least 1");
  if (max_index < 0) throw ConfigError("max_index must be non-negative");
  if (!(phase_scale > 0.0)) throw ConfigError("phase_scale must be positive");

  FrequencyGrid grid;
  grid.num_bands = num_bands;
  grid.phase_scale = phase_scale;
  grid.mode = mode;
  const int ky_lo = axes == GridAxes::Both ? -max_index : 0;
  const int ky_hi = axes == GridAxes::Both ? max_index : 0;
  for (int kx = 0; kx <= max_index; ++kx) {
    for (int ky = ky_lo; ky <= ky_hi; ++ky) {
      if (canonical(kx, ky) != std::pair{kx, ky}) continue;
      const int band = band_of(kx, ky, mode);
      if (band >= num_bands) continue;
      grid.entries.push_back({kx, ky, Vec2(phase_scale * kx, phase_scale * ky), band});
    }
  }
  std::stable_sort(grid.entries.begin(), grid.entries.end(),
                   [](const FrequencyEntry& a, const FrequencyEntry& b) { return a.band < b.band; });
  std::vector<int> counts(static_cast<std::size_t>(num_bands), 0);
  for (const auto& e : grid.entries) ++counts[e.band];
  for (int b = 0; b < num_bands; ++b) {
    if (counts[b] == 0) {
      throw ConfigError("frequency band " + std::to_string(b) + " is empty; max_index " +
                        std::to_string(max_index) + " is too small (need " +
                        std::to_string(required_max_index(num_bands, mode)) + ")");
    }
  }
  return grid;
}

FrequencyGrid make_single_band_grid(std::span<const std::pair<int, int>> indices, double phase_scale) {
  if (!(phase_scale > 0.0)) throw ConfigError("phase_scale must be positive");
  FrequencyGrid grid;
  grid.num_bands = 1;
  grid.phase_scale = phase_scale;
  std::set<std::pair<int, int>> seen;
  for (auto [kx, ky] : indices) {
    const auto c = canonical(kx, ky);
    if (!seen.insert(c).second) continue;
    grid.entries.push_back({c.first, c.second, Vec2(phase_scale * c.first, phase_scale * c.second), 0});
  }
  if (grid.entries.empty()) throw ConfigError("frequency band 0 is empty");
  return grid;
}

MomentBasis::MomentBasis(const FrequencyGrid& grid, const CoordinateField& field)
    : grid_(grid), width_(field.width), height_(field.height) {
  for (const auto& e : grid_.entries) {
    max_kx_ = std::max(max_kx_, e.kx);
    max_abs_ky_ = std::max(max_abs_ky_, std::abs(e.ky));
  }
  phase_x_.resize(static_cast<std::size_t>(max_kx_ + 1) * width_);
  for (int kx = 0; kx <= max_kx_; ++kx) {
    const double wx = grid_.phase_scale * kx;
    for (int x = 0; x < width_; ++x) {
      phase_x_[static_cast<std::size_t>(kx) * width_ + x] = std::polar(1.0, -wx * field.x_of(x));
    }
  }
  phase_y_.resize(static_cast<std::size_t>(2 * max_abs_ky_ + 1) * height_);
  for (int ky = -max_abs_ky_; ky <= max_abs_ky_; ++ky) {
    const double wy = grid_.phase_scale * ky;
    for (int y = 0; y < height_; ++y) {
      phase_y_[static_cast<std::size_t>(ky + max_abs_ky_) * height_ + y] =
          std::polar(1.0, -wy * field.y_of(y));
    }
  }
}

std::vector<Complex> MomentBasis::moments(std::span<const double> values, std::span<const char> active) const {
  const std::size_t pixels = static_cast<std::size_t>(width_) * height_;
  if (values.size() != pixels) throw ShapeError("moments: image does not match the basis field");
  if (!active.empty() && active.size() != grid_.size()) throw ShapeError("moments: active mask length mismatch");

  std::vector<char> need_kx(static_cast<std::size_t>(max_kx_ + 1), 0);
  for (std::size_t f = 0; f < grid_.size(); ++f) {
    if (active.empty() || active[f]) need_kx[grid_.entries[f].kx] = 1;
  }
  // Row transforms A[kx][y] = sum_x v(x, y) exp(-j wx x).
  std::vector<Complex> rows(static_cast<std::size_t>(max_kx_ + 1) * height_);
  parallel::for_ranges(static_cast<std::size_t>(height_), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      const double* row = values.data() + y * width_;
      for (int kx = 0; kx <= max_kx_; ++kx) {
        if (!need_kx[kx]) continue;
        const Complex* ph = phase_x_.data() + static_cast<std::size_t>(kx) * width_;
        double re = 0.0, im = 0.0;
        for (int x = 0; x < width_; ++x) {
          re += row[x] * ph[x].real();
          im += row[x] * ph[x].imag();
        }
        rows[static_cast<std::size_t>(kx) * height_ + y] = Complex(re, im);
      }
    }
  });
  const double inv_p = 1.0 / static_cast<double>(pixels);
  std::vector<Complex> out(grid_.size(), Complex(0.0, 0.0));
  for (std::size_t f = 0; f < grid_.size(); ++f) {
    if (!active.empty() && !active[f]) continue;
    const auto& e = grid_.entries[f];
    const Complex* a = rows.data() + static_cast<std::size_t>(e.kx) * height_;
    const Complex* ph = phase_y_.data() + static_cast<std::size_t>(e.ky + max_abs_ky_) * height_;
    Complex acc(0.0, 0.0);
    for (int y = 0; y < height_; ++y) acc += ph[y] * a[y];
    out[f] = acc * inv_p;
  }
  return out;
}

std::vector<double> MomentBasis::adjoint(std::span<const Complex> weights) const {
  if (weights.size() != grid_.size()) throw ShapeError("moments_adjoint: weight count does not match the grid");
  const std::size_t pixels = static_cast<std::size_t>(width_) * height_;
  const double inv_p = 1.0 / static_cast<double>(pixels);
  // B[kx][y] = sum_{f : kx_f = kx} m_f w_f exp(-j wy_f y)
  std::vector<Complex> b(static_cast<std::size_t>(max_kx_ + 1) * height_, Complex(0.0, 0.0));
  std::vector<char> used(static_cast<std::size_t>(max_kx_ + 1), 0);
  for (std::size_t f = 0; f < grid_.size(); ++f) {
    if (weights[f] == Complex(0.0, 0.0)) continue;
    const auto& e = grid_.entries[f];
    used[e.kx] = 1;
    const Complex w = grid_.multiplicity(f) * weights[f];
    const Complex* ph = phase_y_.data() + static_cast<std::size_t>(e.ky + max_abs_ky_) * height_;
    Complex* dst = b.data() + static_cast<std::size_t>(e.kx) * height_;
    for (int y = 0; y < height_; ++y) dst[y] += w * ph[y];
  }
  std::vector<double> out(pixels, 0.0);
  parallel::for_ranges(static_cast<std::size_t>(height_), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      double* row = out.data() + y * width_;
      for (int kx = 0; kx <= max_kx_; ++kx) {
        if (!used[kx]) continue;
        const Complex by = b[static_cast<std::size_t>(kx) * height_ + y];
        const Complex* ph = phase_x_.data() + static_cast<std::size_t>(kx) * width_;
        for (int x = 0; x < width_; ++x) {
          row[x] += by.real() * ph[x].real() - by.imag() * ph[x].imag();
        }
      }
      for (int x = 0; x < width_; ++x) row[x] *= inv_p;
    }
  });
  return out;
}

SpectralMomentSet compute_moments(const Image& image, const FrequencyGrid& grid,
                                  const CoordinateField& field, int channel) {
  if (image.width() != field.width || image.height() != field.height) {
    throw ShapeError("compute_moments: image and field dimensions differ");
  }
  if (channel < 0 || channel >= image.channels()) throw ShapeError("compute_moments: no such channel");
  const MomentBasis basis(grid, field);
  const std::vector<double> values = image.channel(channel);
  return {&grid, basis.moments(values)};
}

Image moments_adjoint(const FrequencyGrid& grid, const CoordinateField& field,
                      std::span<const Complex> residual_weights) {
  if (residual_weights.size() != grid.size()) {
    throw ShapeError("moments_adjoint: weight count does not match the grid");
  }
  const MomentBasis basis(grid, field);
  const std::vector<double> adj = basis.adjoint(residual_weights);
  Image out(field.width, field.height);
  std::copy(adj.begin(), adj.end(), out.intensity().begin());
  return out;
}

double closed_form_shift_loss(double moment_magnitude, const Vec2& omega, const Vec2& d) {
  return moment_magnitude * moment_magnitude * (1.0 - std::cos(omega.dot(d)));
}

Vec2 closed_form_shift_gradient(double moment_magnitude, const Vec2& omega, const Vec2& d) {
  return moment_magnitude * moment_magnitude * std::sin(omega.dot(d)) * omega;
}

std::vector<Complex> dft2(std::span<const double> values, int width, int height) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw ShapeError("dft2: size mismatch");
  const auto tw = twiddles(width);
  const auto th = twiddles(height);
  // Rows: R[y][u] = sum_x v(x, y) exp(-2 pi j u x / W)
  std::vector<Complex> rows(values.size());
  for (int y = 0; y < height; ++y) {
    for (int u = 0; u < width; ++u) {
      Complex acc(0.0, 0.0);
      for (int x = 0; x < width; ++x) {
        acc += values[static_cast<std::size_t>(y) * width + x] * tw[(static_cast<long long>(u) * x) % width];
      }
      rows[static_cast<std::size_t>(y) * width + u] = acc;
    }
  }
  std::vector<Complex> out(values.size());
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      Complex acc(0.0, 0.0);
      for (int y = 0; y < height; ++y) {
        acc += rows[static_cast<std::size_t>(y) * width + u] * th[(static_cast<long long>(v) * y) % height];
      }
      out[static_cast<std::size_t>(v) * width + u] = acc;
    }
  }
  return out;
}

double spatial_l2_via_spectrum(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("spatial_l2_via_spectrum: image shapes differ");
  const double pixels = static_cast<double>(a.pixel_count());
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> diff = a.channel(c);
    const std::vector<double> bc = b.channel(c);
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= bc[i];
    for (const Complex& z : dft2(diff, a.width(), a.height())) total += std::norm(z);
  }
  return total / pixels;
}

Image circular_shift(const Image& image, int shift_x, int shift_y) {
  Image out(image.width(), image.height(), image.channels(), image.has_opacity());
  const int w = image.width();
  const int h = image.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = positive_mod(static_cast<long long>(x) - shift_x, w);
      const int sy = positive_mod(static_cast<long long>(y) - shift_y, h);
      for (int c = 0; c < image.channels(); ++c) out.at(x, y, c) = image.at(sx, sy, c);
      if (image.has_opacity()) {
        out.opacity()[static_cast<std::size_t>(y) * w + x] = image.opacity()[static_cast<std::size_t>(sy) * w + sx];
      }
    }
  }
  return out;
}

double circular_shift_theorem_check(const Image& image, int shift_x, int shift_y) {
  const int w = image.width();
  const int h = image.height();
  const Image shifted = circular_shift(image, shift_x, shift_y);
  double worst = 0.0;
  for (int c = 0; c < image.channels(); ++c) {
    const auto original = dft2(image.channel(c), w, h);
    const auto moved = dft2(shifted.channel(c), w, h);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const int mu = positive_mod(static_cast<long long>(u) * shift_x, w);
        const int mv = positive_mod(static_cast<long long>(v) * shift_y, h);
        const double phase = 2.0 * kPi * (static_cast<double>(mu) / w + static_cast<double>(mv) / h);
        const std::size_t i = static_cast<std::size_t>(v) * w + u;
        const Complex expected = original[i] * std::polar(1.0, -phase);
        worst = std::max(worst, std::abs(moved[i] - expected));
      }
    }
  }
  return worst;
}

void write_moments_csv(const SpectralMomentSet& moments, const std::filesystem::path& path) {
  if (moments.grid == nullptr || moments.grid->size() != moments.values.size()) {
    throw ShapeError("write_moments_csv: moment set does not match its grid");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "kx,ky,band,re,im\n";
  char buf[128];
  for (std::size_t f = 0; f < moments.values.size(); ++f) {
    const auto& e = moments.grid->entries[f];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g\n", e.kx, e.ky, e.band, moments.values[f].real(),
                  moments.values[f].imag());
    out << buf;
  }
}

}  // namespace spectrack
