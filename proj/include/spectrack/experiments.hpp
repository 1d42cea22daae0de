#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spectrack/config.hpp"
#include "spectrack/optim.hpp"

namespace spectrack {

// ---- synthetic scenes ------------------------------------------------------

// Asymmetric spiral of anisotropic Gaussians, recentred so the mean position is the origin.
Scene make_spiral_scene(int count);

// The scene named by config.scene_file, or the spiral otherwise.
Scene load_or_make_scene(const ExperimentConfig& config);

// Sum over pixels of O_a * O_b; exactly 0 when the two footprints are disjoint.
double footprint_overlap(const Image& a, const Image& b);

// ---- 1D pulse problem --------------------------------------------------------

// A 1xN image holding one isotropic pulse. Theta is measured in theta units
// (theta_scale per normalised unit) as the offset of the rendered pulse from the
// target, so Theta* = 0. Parameters are RigidParams with only tx moving.
struct PulseProblem {
  Scene canonical;  // pulse at the target position
  Image target;
  CoordinateField field;
  double theta_scale = 1.0;
  Cutoff cutoff;

  RigidParams params_at(double theta) const;
  double theta_of(const Deformation& params) const;
};

PulseProblem make_pulse_problem(const ExperimentConfig& config);

// Frequency grids used by the 1D objectives.
FrequencyGrid pulse_anneal_grid(const ExperimentConfig& config);
// Every entry of log-index band `static_band`, kept as a single always-on band.
FrequencyGrid pulse_static_grid(const ExperimentConfig& config);

// The objective a landscape samples, as a function of Theta.
std::function<double(double)> pulse_loss_function(const PulseProblem& pulse, const ExperimentConfig& config,
                                                  LandscapeLoss loss);

struct LandscapeSample {
  double theta = 0.0;
  double loss = 0.0;
};

// Uniform samples of f over [theta_min, theta_max]. Throws std::invalid_argument
// for an empty range or fewer than 2 samples. Samples are evaluated in parallel.
std::vector<LandscapeSample> landscape_1d(const std::function<double(double)>& f, double theta_min,
                                          double theta_max, int samples);

void write_landscape_csv(const std::vector<LandscapeSample>& curve, const std::filesystem::path& path);

// Thetas of strict interior local minima of the sampled curve inside [lo, hi]
// that lie farther than `exclude` from theta_star.
std::vector<double> false_minima(const std::vector<LandscapeSample>& curve, double lo, double hi,
                                 double theta_star, double exclude);

struct PulseRun {
  std::string name;
  Trajectory trajectory;
  double initial_grad_norm = 0.0;
  double final_theta = 0.0;
  // max over spectral-phase iterations of max_active_omega * |d_t| (normalised units)
  double max_wrap_product = 0.0;
};

struct Demo1DResult {
  std::vector<PulseRun> runs;  // spatial_l2, static_band, annealed, annealed_pixel
  std::vector<std::pair<std::string, std::vector<LandscapeSample>>> landscapes;
  std::vector<double> static_false_minima;
  double seconds = 0.0;

  const PulseRun& run(const std::string& name) const;
};

// Runs the four pulse-alignment configurations and samples their landscapes.
// With a non-empty out_dir, writes trajectories, landscapes and SVG panels there.
Demo1DResult demo_1d(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// ---- 2D rigid demo --------------------------------------------------------

struct RigidRun {
  std::string name;
  Trajectory trajectory;
  double initial_translation_px = 0.0;
  double final_translation_px = 0.0;
  double final_rotation_deg = 0.0;
  double final_psnr = 0.0;
  double max_wrap_product = 0.0;
};

struct Demo2DResult {
  RigidRun pixel;
  RigidRun spectral;
  double initial_overlap = 0.0;
  double seconds = 0.0;
};

Demo2DResult demo_2d(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// ---- shift sweep ------------------------------------------------------------

struct SweepCell {
  double radius = 0.0;
  std::string method;  // "pixel" or "ours"
  double final_psnr = 0.0;
  double final_param_error = 0.0;
  double initial_overlap = 0.0;
};

// Seeded unit direction shared by every radius.
Vec2 sweep_direction(std::uint64_t shift_seed);

std::vector<SweepCell> sweep_shift(const ExperimentConfig& config, const std::vector<double>& radii,
                                   const std::filesystem::path& out_dir);

// ---- schedule ------------------------------------------------------------------

// CSV `t,alpha,w_0..w_{K-1},max_active_omega_norm` and an SVG of w_k(t).
void schedule_plot(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace spectrack
