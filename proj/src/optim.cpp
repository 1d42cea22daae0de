#include "spectrack/optim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "spectrack/csv.hpp"

namespace spectrack {

void validate(const OptimConfig& config) {
  if (!(config.lr_init > 0.0) || !(config.lr_final > 0.0)) throw ConfigError("learning rates must be positive");
  if (config.lr_final > config.lr_init) throw ConfigError("deform_lr_final exceeds deform_lr_init");
  if (config.total_iters < 1) throw ConfigError("iterations must be at least 1");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(config.beta2 >= 0.0 && config.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(config.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

double learning_rate_at(const OptimConfig& config, int t) {
  const int last = config.total_iters - 1;
  if (t <= 0 || last <= 0) return config.lr_init;
  if (t >= last) return config.lr_final;
  const double s = static_cast<double>(t) / last;
  return std::exp((1.0 - s) * std::log(config.lr_init) + s * std::log(config.lr_final));
}

std::vector<double> gd_step(std::span<const double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size()) throw ShapeError("gd_step: parameter and gradient lengths differ");
  std::vector<double> out(params.begin(), params.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * grad[i];
  return out;
}

AdamState make_adam_state(std::size_t size) {
  AdamState state;
  state.m.assign(size, 0.0);
  state.v.assign(size, 0.0);
  return state;
}

void adam_step(std::vector<double>& params, std::span<const double> grad, AdamState& state,
               const OptimConfig& config, double lr) {
  if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

namespace {

void check_finite(int t, const LossEvaluation& eval) {
  auto fail = [t](const char* term) {
    throw NumericError("non-finite " + std::string(term) + " at iteration " + std::to_string(t));
  };
  if (!std::isfinite(eval.report.image_term)) fail("image_term");
  if (!std::isfinite(eval.report.arap_term)) fail("arap_term");
  if (!std::isfinite(eval.report.total)) fail("total");
  for (double g : eval.gradient) {
    if (!std::isfinite(g)) fail("gradient");
  }
}

}  // namespace

Trajectory run_tracking(const TrackingProblem& problem, const Deformation& initial,
                        const OptimConfig& config, const ErrorFn& error_fn, const IterationHook& hook) {
  validate(config);
  if (problem.weights.add_pixel_loss > config.total_iters) {
    throw ConfigError("add_pixel_loss exceeds the iteration count");
  }
  Trajectory traj;
  traj.records.reserve(static_cast<std::size_t>(config.total_iters));
  Deformation current = initial;
  std::vector<double> params = flatten(current);
  AdamState adam = make_adam_state(params.size());

  for (int t = 0; t < config.total_iters; ++t) {
    if (hook) hook(t, current);
    LossEvaluation eval = total_loss(t, current, problem);
    check_finite(t, eval);

    TrajectoryRecord rec;
    rec.t = t;
    rec.params = params;
    rec.param_error = error_fn ? error_fn(current) : 0.0;
    const AnnealState state = anneal_state(problem.anneal, t);
    rec.alpha = state.alpha;
    rec.max_active_omega = max_active_omega_norm(problem.basis.grid(), state.band_weights);
    double sq = 0.0;
    for (double g : eval.gradient) sq += g * g;
    rec.grad_norm = std::sqrt(sq);
    rec.report = std::move(eval.report);
    traj.records.push_back(std::move(rec));

    const double lr = learning_rate_at(config, t);
    if (config.method == OptimMethod::Adam) {
      adam_step(params, eval.gradient, adam, config, lr);
    } else {
      params = gd_step(params, eval.gradient, lr);
    }
    current = with_parameters(current, params);
  }
  if (hook) hook(config.total_iters, current);
  traj.final_error = error_fn ? error_fn(current) : 0.0;
  traj.final_params = std::move(current);
  return traj;
}

void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path) {
  CsvWriter csv(path, {"t", "phase", "total", "image_term", "arap_term", "param_error_norm", "alpha"});
  for (const auto& r : trajectory.records) {
    csv.field(r.t).field(to_string(r.report.phase)).field(r.report.total).field(r.report.image_term);
    csv.field(r.report.arap_term).field(r.param_error).field(r.alpha);
    csv.end_row();
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::size_t n = checkpoint.params.size();
  if (checkpoint.adam.m.size() != n || checkpoint.adam.v.size() != n) {
    throw ShapeError("save_checkpoint: Adam state does not match the parameter count");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << checkpoint.t << ' ' << n << ' ' << checkpoint.adam.step << '\n';
  for (const auto* vec : {&checkpoint.params, &checkpoint.adam.m, &checkpoint.adam.v}) {
    for (double v : *vec) out << format_real(v) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Checkpoint cp;
  std::size_t n = 0;
  if (!(in >> cp.t >> n >> cp.adam.step)) throw std::runtime_error("malformed checkpoint header: " + path.string());
  for (auto* vec : {&cp.params, &cp.adam.m, &cp.adam.v}) {
    vec->resize(n);
    for (double& v : *vec) {
      if (!(in >> v)) throw std::runtime_error("truncated checkpoint: " + path.string());
    }
  }
  return cp;
}

}  // namespace spectrack
