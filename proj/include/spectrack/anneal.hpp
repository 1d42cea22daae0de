#pragma once

#include <vector>

#include "spectrack/spectral.hpp"

namespace spectrack {

// Frequency-annealing schedule. warmup_frac is measured against the spectral
// phase length total_spectral_iters, at whose end the full bandwidth is reached.
struct AnnealConfig {
  int num_bands = 8;
  int total_spectral_iters = 1000;
  double warmup_frac = 0.25;
  BandingMode mode = BandingMode::LinearFrequency;
};

void validate(const AnnealConfig& config);

struct AnnealState {
  double alpha = 1.0;
  std::vector<double> band_weights;
};

// 1 during warm-up, then linear up to num_bands at total_spectral_iters, constant after.
double alpha_at(const AnnealConfig& config, double t);

// (1 - cos(pi * clamp(alpha - k, 0, 1))) / 2
double band_weight(double alpha, int k);

std::vector<double> band_weights(double alpha, int num_bands);
AnnealState anneal_state(const AnnealConfig& config, double t);

// pi / displacement_norm, or +inf when the displacement is zero.
double max_safe_frequency(double displacement_norm);

// t * log(1/gamma) / log 2. Diagnostic only.
double predicted_index_schedule(double gamma, double t);

// Largest |omega| among grid entries whose band weight is positive; 0 if none.
double max_active_omega_norm(const FrequencyGrid& grid, const std::vector<double>& weights);

}  // namespace spectrack
