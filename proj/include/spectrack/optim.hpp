#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "spectrack/deform.hpp"
#include "spectrack/objective.hpp"

namespace spectrack {

enum class OptimMethod { GradientDescent, Adam };

struct OptimConfig {
  OptimMethod method = OptimMethod::Adam;
  double lr_init = 1e-2;
  double lr_final = 1e-4;
  int total_iters = 1500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

void validate(const OptimConfig& config);

// Log-linear interpolation; lr(0) = lr_init and lr(T - 1) = lr_final exactly.
double learning_rate_at(const OptimConfig& config, int t);

// params - lr * grad
std::vector<double> gd_step(std::span<const double> params, std::span<const double> grad, double lr);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

AdamState make_adam_state(std::size_t size);

// Bias-corrected Adam update of `params` in place.
void adam_step(std::vector<double>& params, std::span<const double> grad, AdamState& state,
               const OptimConfig& config, double lr);

struct TrajectoryRecord {
  int t = 0;
  LossReport report;
  std::vector<double> params;  // before the step taken at t
  double param_error = 0.0;
  double alpha = 0.0;
  double max_active_omega = 0.0;
  double grad_norm = 0.0;
};

// Records for t = 0 .. T-1 plus the parameters after the last step.
struct Trajectory {
  std::vector<TrajectoryRecord> records;
  Deformation final_params;
  double final_error = 0.0;
};

// Distance of a parameter state from the known target, for synthetic problems.
using ErrorFn = std::function<double(const Deformation&)>;
// Called before the step at each t, and once with t = T for the final state.
using IterationHook = std::function<void(int t, const Deformation&)>;

// Two-phase loop: total_loss then one optimiser step per iteration. A non-finite
// loss term or gradient throws NumericError naming the iteration and term.
Trajectory run_tracking(const TrackingProblem& problem, const Deformation& initial,
                        const OptimConfig& config, const ErrorFn& error_fn = {},
                        const IterationHook& hook = {});

// Header `t,phase,total,image_term,arap_term,param_error_norm,alpha`.
void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path);

struct Checkpoint {
  int t = 0;
  std::vector<double> params;
  AdamState adam;
};

// Plain text: iteration, parameter count, then params, m and v one per line.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spectrack
