#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spectrack/config.hpp"

namespace spectrack {

// ||analytic - numeric||_inf / max(||numeric||_inf, 1e-12)
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

// Central differences of f at x with step h, one coordinate at a time.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h);

struct GradCheckEntry {
  std::string component;
  int instances = 0;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_relative_error < tolerance; }
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass() const;
  // First failing component, or empty.
  std::string first_failure() const;
};

// Test hook: may modify the analytic gradient of a component before comparison.
using GradientCorruption = std::function<void(const std::string& component, std::vector<double>& analytic)>;

// Finite-difference batteries over random instances for
//   render, deform_rigid, deform_morph, spectral_l1, spectral_squared, pixel,
//   total_rigid_spectral, total_rigid_pixel, total_morph_spectral, total_morph_pixel.
// Component tolerances: render 1e-5; deform, spectral, pixel 1e-6; total uses
// config.gradcheck_tolerance. Requires the cutoff to be disabled.
GradCheckReport run_gradcheck(const ExperimentConfig& config, const GradientCorruption& corrupt = {});

}  // namespace spectrack
