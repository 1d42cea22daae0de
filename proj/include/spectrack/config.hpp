#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spectrack/anneal.hpp"
#include "spectrack/objective.hpp"
#include "spectrack/optim.hpp"
#include "spectrack/splat.hpp"

namespace spectrack {

enum class ExperimentKind { Demo1D, Demo2D, Landscape, Sweep, GradCheck, SchedulePlot };

// Which objective a 1D landscape samples.
enum class LandscapeLoss { Pixel, StaticBand, AnnealStart, AnnealFull };

// Flat settings shared by every experiment. Key names follow the hyperparameter
// vocabulary (add_pixel_loss, num_bands, warmup, lambda_*, deform_lr_*) plus
// artifact keys. Every key has a default that depends on the experiment kind.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Demo2D;

  int width = 64;
  int height = 64;
  int num_gaussians = 12;
  std::string scene_file;  // empty: built-in synthetic pattern

  int control_points = 16;  // morph fields (gradient checks)

  AnnealConfig anneal;
  LossWeights losses;
  OptimConfig optim;
  double phase_scale = kDefaultPhaseScale;
  Cutoff cutoff = kDefaultCutoff;

  // 2D target and initial rigid states (normalised units, degrees).
  double target_tx = 0.35, target_ty = 0.35, target_rotation_deg = 45.0;
  double init_tx = -0.35, init_ty = -0.35, init_rotation_deg = 0.0;
  std::vector<int> log_steps{0, 250, 500};

  // Shift sweep.
  double shift_radius = 0.0;
  std::uint64_t shift_seed = 7;
  std::vector<double> sweep_radii{0.0, 0.2, 0.4, 0.6, 0.8};

  // 1D pulse problem, in theta units (theta_scale theta units per normalised unit).
  double theta_scale = 5.0;
  double pulse_sigma = 0.5;
  double theta0 = 6.0;
  double target_theta = -3.0;
  int static_band = 5;

  // Landscape sampling.
  double theta_min = -1.0;
  double theta_max = 7.0;
  int samples = 801;
  LandscapeLoss landscape_loss = LandscapeLoss::AnnealStart;

  // Gradient-check battery.
  int gradcheck_instances = 100;
  double gradcheck_tolerance = 1e-4;

  std::uint64_t seed = 0;
};

ExperimentConfig default_config(ExperimentKind kind);

// "desk" (16 control points, 1.5K iterations) or "full" (800 control points, 10K
// iterations, lambda_image 5000). Throws ConfigError otherwise.
void apply_preset(ExperimentConfig& config, const std::string& preset);

// Sets one key from its text value. Unknown keys and unparsable values throw
// ConfigError naming the key.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

// Parses `key = value` lines with `#` comments on top of `config`. A `preset` key
// is applied before all other keys regardless of its position.
void load_config_file(ExperimentConfig& config, const std::filesystem::path& path);
void load_config_text(ExperimentConfig& config, const std::string& text);

// Cross-field checks (positive sizes, add_pixel_loss <= iterations, ...).
void validate(const ExperimentConfig& config);

// Every key with its current value, one `key = value` line each, in a fixed order.
std::string dump_config(const ExperimentConfig& config);

const char* to_string(ExperimentKind kind);

}  // namespace spectrack
