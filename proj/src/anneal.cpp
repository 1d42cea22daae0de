#include "spectrack/anneal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace spectrack {

void validate(const AnnealConfig& config) {
  if (config.num_bands < 1) throw ConfigError("num_bands must be at least 1");
  if (config.total_spectral_iters < 1) throw ConfigError("spectral phase needs at least one iteration");
  if (!(config.warmup_frac >= 0.0 && config.warmup_frac < 1.0)) {
    throw ConfigError("warmup must lie in [0, 1), got " + std::to_string(config.warmup_frac));
  }
}

double alpha_at(const AnnealConfig& config, double t) {
  const double k = config.num_bands;
  const double end = config.total_spectral_iters;
  const double start = config.warmup_frac * end;
  if (t < start) return 1.0;
  if (t >= end) return k;
  return 1.0 + (k - 1.0) * (t - start) / (end - start);
}

double band_weight(double alpha, int k) {
  const double x = std::clamp(alpha - k, 0.0, 1.0);
  return 0.5 * (1.0 - std::cos(kPi * x));
}

std::vector<double> band_weights(double alpha, int num_bands) {
  std::vector<double> w(static_cast<std::size_t>(num_bands));
  for (int k = 0; k < num_bands; ++k) w[k] = band_weight(alpha, k);
  return w;
}

AnnealState anneal_state(const AnnealConfig& config, double t) {
  const double alpha = alpha_at(config, t);
  return {alpha, band_weights(alpha, config.num_bands)};
}

double max_safe_frequency(double displacement_norm) {
  if (displacement_norm == 0.0) return std::numeric_limits<double>::infinity();
  if (!(displacement_norm > 0.0)) throw std::invalid_argument("displacement norm must be non-negative");
  return kPi / displacement_norm;
}

double predicted_index_schedule(double gamma, double t) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("contraction factor must lie in (0, 1)");
  return t * std::log(1.0 / gamma) / std::log(2.0);
}

double max_active_omega_norm(const FrequencyGrid& grid, const std::vector<double>& weights) {
  double best = 0.0;
  for (const auto& e : grid.entries) {
    if (e.band < static_cast<int>(weights.size()) && weights[e.band] > 0.0) best = std::max(best, e.omega.norm());
  }
  return best;
}

}  // namespace spectrack
