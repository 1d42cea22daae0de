#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spectrack/anneal.hpp"
#include "spectrack/deform.hpp"
#include "spectrack/grid.hpp"
#include "spectrack/spectral.hpp"
#include "spectrack/splat.hpp"

namespace spectrack {

enum class SpectralMetric { L1, Squared };
enum class Phase { Spectral, Pixel };

const char* to_string(Phase phase);

struct LossWeights {
  double lambda_image = 1.0;
  double lambda_arap = 1.0;
  double lambda_spec_mask = 0.3;
  double lambda_bce = 0.1;
  int add_pixel_loss = 1000;  // first iteration of the pixel phase
  int arap_start_iter = 1000;
  SpectralMetric spectral_metric = SpectralMetric::L1;
};

// A loss value with its adjoint images (dL/d intensity, dL/d opacity).
struct ImageLoss {
  double value = 0.0;
  Image adjoint_intensity;
  Image adjoint_opacity;
  std::vector<double> per_band;  // spectral losses only
  double bce = 0.0;              // pixel losses only: the BCE term before lambda_bce
};

// sum_f m_f w_band(f) metric(M_f(I_rend) - M_f(I_gt))
//   + lambda_spec_mask * the same over opacity maps.
// m_f is the conjugate-pair multiplicity, so the sum runs over the full grid.
// L1 uses |Re| + |Im| with sign(0) = 0; Squared uses |.|^2.
ImageLoss spectral_image_loss(const Image& rend, const Image& gt, const MomentBasis& basis,
                              std::span<const double> band_weights, double lambda_spec_mask,
                              SpectralMetric metric);
ImageLoss spectral_image_loss(const Image& rend, const Image& gt, const FrequencyGrid& grid,
                              const CoordinateField& field, std::span<const double> band_weights,
                              double lambda_spec_mask, SpectralMetric metric);

inline constexpr double kBceClamp = 1e-6;

// mean (I_r - I_g)^2 + mean (I_r O_r - I_g O_g)^2 + lambda_bce * mean BCE(O_r, O_g).
// The rendered opacity is clamped to [1e-6, 1 - 1e-6] inside the BCE.
ImageLoss pixel_image_loss(const Image& rend, const Image& gt, double lambda_bce);

struct LossReport {
  double total = 0.0;
  double image_term = 0.0;
  double arap_term = 0.0;
  Phase phase = Phase::Spectral;
  std::vector<double> per_band_contribution;
};

// Everything needed to evaluate the tracking objective except the parameters.
struct TrackingProblem {
  Scene canonical;
  Image target;  // carries the target mask in its opacity channel
  CoordinateField field;
  MomentBasis basis;
  AnnealConfig anneal;
  LossWeights weights;
  Cutoff cutoff = kDefaultCutoff;
};

TrackingProblem make_problem(Scene canonical, Image target, const FrequencyGrid& grid,
                             const AnnealConfig& anneal, const LossWeights& weights,
                             Cutoff cutoff = kDefaultCutoff);

struct LossEvaluation {
  LossReport report;
  std::vector<double> gradient;  // in flatten() order
};

// Spectral phase for t < add_pixel_loss, pixel phase afterwards. ARAP is added for
// morph fields once t >= arap_start_iter.
LossEvaluation total_loss(int t, const Deformation& params, const TrackingProblem& problem);

}  // namespace spectrack
