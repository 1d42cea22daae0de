#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include "spectrack/common.hpp"
#include "spectrack/grid.hpp"

namespace spectrack {

using Complex = std::complex<double>;

enum class BandingMode {
  LinearFrequency,  // band = max(r - 1, 0)
  LogIndex,         // band = ceil(log2 r), with r in {0, 1} in band 0
};

// Which index pairs a grid enumerates. AxisX keeps only (kx, 0), for 1xN problems.
enum class GridAxes { Both, AxisX };

inline constexpr double kDefaultPhaseScale = 0.5 * kPi;

struct FrequencyEntry {
  int kx = 0;
  int ky = 0;
  Vec2 omega = Vec2::Zero();
  int band = 0;
};

// Conjugate-reduced frequency grid. Of each pair +-(kx, ky) only the member with
// kx > 0, or kx == 0 and ky >= 0, is stored. Entries are ordered by band.
struct FrequencyGrid {
  std::vector<FrequencyEntry> entries;
  int num_bands = 1;
  double phase_scale = kDefaultPhaseScale;
  BandingMode mode = BandingMode::LinearFrequency;

  std::size_t size() const { return entries.size(); }
  // 1 for the DC entry, 2 for entries standing in for a conjugate pair.
  double multiplicity(std::size_t i) const {
    return entries[i].kx == 0 && entries[i].ky == 0 ? 1.0 : 2.0;
  }
  int max_index() const;
};

int band_of(int kx, int ky, BandingMode mode);

// Smallest max_index for which every band 0..num_bands-1 is non-empty.
int required_max_index(int num_bands, BandingMode mode);

// Enumerates every (kx, ky) with max(|kx|, |ky|) <= max_index whose band is below
// num_bands. Throws ConfigError naming the first empty band.
FrequencyGrid build_frequency_grid(int num_bands, int max_index, double phase_scale = kDefaultPhaseScale,
                                   BandingMode mode = BandingMode::LinearFrequency,
                                   GridAxes axes = GridAxes::Both);

// A grid holding exactly the listed index pairs (conjugate-reduced), all in band 0.
FrequencyGrid make_single_band_grid(std::span<const std::pair<int, int>> indices,
                                    double phase_scale = kDefaultPhaseScale);

struct SpectralMomentSet {
  const FrequencyGrid* grid = nullptr;  // non-owning
  std::vector<Complex> values;
};

// Separable phase tables for one (grid, field) pair. Evaluates
//   M_f = (1/P) sum_p I(p) exp(-j omega_f . p)
// directly, with O(P * (max_index + 1)) work per image.
class MomentBasis {
 public:
  MomentBasis() = default;
  MomentBasis(const FrequencyGrid& grid, const CoordinateField& field);

  const FrequencyGrid& grid() const { return grid_; }
  int width() const { return width_; }
  int height() const { return height_; }

  // `active` (optional, one flag per entry) skips entries whose value is not needed;
  // skipped entries are returned as 0.
  std::vector<Complex> moments(std::span<const double> values, std::span<const char> active = {}) const;

  // adjoint(p) = Re[ sum_f m_f w_f exp(-j omega_f . p) ] / P with multiplicity m_f.
  std::vector<double> adjoint(std::span<const Complex> weights) const;

 private:
  FrequencyGrid grid_;
  int width_ = 0;
  int height_ = 0;
  int max_kx_ = 0;
  int max_abs_ky_ = 0;
  std::vector<Complex> phase_x_;  // [kx][x], kx in [0, max_kx]
  std::vector<Complex> phase_y_;  // [ky + max_abs_ky][y]
};

SpectralMomentSet compute_moments(const Image& image, const FrequencyGrid& grid,
                                  const CoordinateField& field, int channel = 0);

// Transpose of compute_moments under the full-grid pairing
//   <w, M> = Re sum_f m_f w_f M_f,
// so <moments_adjoint(w), J> equals that pairing for every image J.
Image moments_adjoint(const FrequencyGrid& grid, const CoordinateField& field,
                      std::span<const Complex> residual_weights);

// |M_gt|^2 (1 - cos(omega . d)), the single-frequency loss of a pure shift.
double closed_form_shift_loss(double moment_magnitude, const Vec2& omega, const Vec2& d);
// |M_gt|^2 sin(omega . d) omega
Vec2 closed_form_shift_gradient(double moment_magnitude, const Vec2& omega, const Vec2& d);

// Full unnormalised 2D DFT, X[v*W + u] = sum_{x,y} I exp(-2 pi j (u x / W + v y / H)).
std::vector<Complex> dft2(std::span<const double> values, int width, int height);

// sum |DFT(a - b)|^2 / P over the complete basis; equals sum_p (a - b)^2.
double spatial_l2_via_spectrum(const Image& a, const Image& b);

// Max |DFT(shift(I)) - DFT(I) * exp(-j omega . d)| for an integer circular shift.
double circular_shift_theorem_check(const Image& image, int shift_x, int shift_y);

// Integer circular shift: out(x, y) = in(x - sx mod W, y - sy mod H).
Image circular_shift(const Image& image, int shift_x, int shift_y);

// CSV with header `kx,ky,band,re,im`.
void write_moments_csv(const SpectralMomentSet& moments, const std::filesystem::path& path);

}  // namespace spectrack
