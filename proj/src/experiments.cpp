#include "spectrack/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <stdexcept>

#include "spectrack/csv.hpp"
#include "spectrack/parallel.hpp"
#include "spectrack/plot.hpp"

namespace spectrack {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double vec_norm(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void write_config_record(const ExperimentConfig& config, const std::filesystem::path& dir) {
  std::ofstream out(dir / "config_used.txt");
  if (!out) throw std::runtime_error("cannot write " + (dir / "config_used.txt").string());
  out << "# experiment = " << to_string(config.kind) << "\n" << dump_config(config);
}

AnnealConfig anneal_for(const ExperimentConfig& config, int add_pixel_loss) {
  AnnealConfig a = config.anneal;
  a.total_spectral_iters = std::max(1, add_pixel_loss);
  return a;
}

OptimConfig optim_for(const ExperimentConfig& config) {
  OptimConfig o = config.optim;
  o.seed = config.seed;
  return o;
}

double wrap_degrees(double radians) {
  double d = std::remainder(radians, 2.0 * kPi);
  return std::abs(d) * 180.0 / kPi;
}

// Largest displacement of any Gaussian mean between two rigid states.
double max_mean_displacement(const Scene& canonical, const RigidParams& a, const RigidParams& b) {
  const Scene sa = apply_deformation(a, canonical);
  const Scene sb = apply_deformation(b, canonical);
  double best = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    best = std::max(best, (sa.gaussians[i].mean - sb.gaussians[i].mean).norm());
  }
  return best;
}

RigidParams rigid_from(std::span<const double> p) { return {Vec2(p[0], p[1]), p[2]}; }

}  // namespace

// ---- synthetic scenes ------------------------------------------------------

Scene make_spiral_scene(int count) {
  if (count < 1) throw std::invalid_argument("make_spiral_scene: count must be positive");
  Scene scene;
  for (int i = 0; i < count; ++i) {
    const double r = 0.04 + 0.012 * i;
    const double a = 0.9 * i;
    Gaussian2D g;
    g.mean = Vec2(r * std::cos(a), r * std::sin(a));
    const double sx = 0.025 + 0.010 * ((i * 7) % 5) / 4.0;
    const double sy = 0.025 + 0.010 * ((i * 3) % 4) / 3.0;
    const double phi = 0.6 * i;
    Mat2 rot;
    rot << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    const Mat2 d = Vec2(sx * sx, sy * sy).asDiagonal();
    g.covariance = rot * d * rot.transpose();
    g.covariance(1, 0) = g.covariance(0, 1);
    const double amp = 0.4 + 0.6 * ((i * 5) % 7) / 6.0;
    g.amplitude = {amp, amp, amp};
    g.opacity = 0.9;
    scene.gaussians.push_back(g);
  }
  Vec2 centroid = Vec2::Zero();
  for (const auto& g : scene.gaussians) centroid += g.mean;
  centroid /= count;
  for (auto& g : scene.gaussians) g.mean -= centroid;
  return scene;
}

Scene load_or_make_scene(const ExperimentConfig& config) {
  if (!config.scene_file.empty()) return read_scene(config.scene_file);
  return make_spiral_scene(config.num_gaussians);
}

double footprint_overlap(const Image& a, const Image& b) {
  if (!a.has_opacity() || !b.has_opacity() || a.pixel_count() != b.pixel_count()) {
    throw ShapeError("footprint_overlap: images need matching opacity channels");
  }
  double s = 0.0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) s += a.opacity()[p] * b.opacity()[p];
  return s;
}

// ---- 1D pulse problem --------------------------------------------------------

RigidParams PulseProblem::params_at(double theta) const { return {Vec2(theta / theta_scale, 0.0), 0.0}; }

double PulseProblem::theta_of(const Deformation& params) const {
  return std::get<RigidParams>(params).translation.x() * theta_scale;
}

PulseProblem make_pulse_problem(const ExperimentConfig& config) {
  validate(config);
  PulseProblem p;
  p.theta_scale = config.theta_scale;
  p.cutoff = config.cutoff;
  p.field = make_coordinate_field(config.width, config.height);
  const double sigma = config.pulse_sigma / config.theta_scale;
  Gaussian2D g;
  g.mean = Vec2(config.target_theta / config.theta_scale, 0.0);
  g.covariance = Mat2::Identity() * sigma * sigma;
  g.amplitude = {1.0, 1.0, 1.0};
  g.opacity = 1.0;
  p.canonical.gaussians.push_back(g);
  p.target = render(p.canonical, p.field, p.cutoff);
  return p;
}

FrequencyGrid pulse_anneal_grid(const ExperimentConfig& config) {
  const int k = config.anneal.num_bands;
  return build_frequency_grid(k, required_max_index(k, config.anneal.mode), config.phase_scale, config.anneal.mode,
                              GridAxes::AxisX);
}

FrequencyGrid pulse_static_grid(const ExperimentConfig& config) {
  if (config.static_band < 0 || config.static_band > 20) throw ConfigError("static_band must lie in [0, 20]");
  std::vector<std::pair<int, int>> indices;
  for (int kx = 0; kx <= (1 << config.static_band); ++kx) {
    if (band_of(kx, 0, BandingMode::LogIndex) == config.static_band) indices.emplace_back(kx, 0);
  }
  return make_single_band_grid(indices, config.phase_scale);
}

std::function<double(double)> pulse_loss_function(const PulseProblem& pulse, const ExperimentConfig& config,
                                                  LandscapeLoss loss) {
  auto shared = std::make_shared<PulseProblem>(pulse);
  if (loss == LandscapeLoss::Pixel) {
    return [shared](double theta) {
      const Scene s = apply_deformation(shared->params_at(theta), shared->canonical);
      return pixel_image_loss(render(s, shared->field, shared->cutoff), shared->target, 0.0).value;
    };
  }
  std::shared_ptr<MomentBasis> basis;
  std::vector<double> weights;
  if (loss == LandscapeLoss::StaticBand) {
    basis = std::make_shared<MomentBasis>(pulse_static_grid(config), pulse.field);
    weights = {1.0};
  } else {
    basis = std::make_shared<MomentBasis>(pulse_anneal_grid(config), pulse.field);
    const int k = config.anneal.num_bands;
    weights = band_weights(loss == LandscapeLoss::AnnealStart ? 1.0 : static_cast<double>(k), k);
  }
  const double mask = config.losses.lambda_spec_mask;
  const SpectralMetric metric = config.losses.spectral_metric;
  return [shared, basis, weights, mask, metric](double theta) {
    const Scene s = apply_deformation(shared->params_at(theta), shared->canonical);
    return spectral_image_loss(render(s, shared->field, shared->cutoff), shared->target, *basis, weights, mask, metric)
        .value;
  };
}

std::vector<LandscapeSample> landscape_1d(const std::function<double(double)>& f, double theta_min,
                                          double theta_max, int samples) {
  if (!(theta_max > theta_min)) throw std::invalid_argument("landscape_1d: empty theta range");
  if (samples < 2) throw std::invalid_argument("landscape_1d: need at least 2 samples");
  std::vector<LandscapeSample> out(static_cast<std::size_t>(samples));
  parallel::for_ranges(out.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double theta = theta_min + (theta_max - theta_min) * static_cast<double>(i) / (samples - 1);
      out[i] = {theta, f(theta)};
    }
  });
  return out;
}

void write_landscape_csv(const std::vector<LandscapeSample>& curve, const std::filesystem::path& path) {
  CsvWriter csv(path, {"theta", "loss"});
  for (const auto& s : curve) {
    csv.field(s.theta).field(s.loss);
    csv.end_row();
  }
}

std::vector<double> false_minima(const std::vector<LandscapeSample>& curve, double lo, double hi,
                                 double theta_star, double exclude) {
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const auto& s = curve[i];
    if (s.theta < lo || s.theta > hi || std::abs(s.theta - theta_star) <= exclude) continue;
    if (s.loss < curve[i - 1].loss && s.loss < curve[i + 1].loss) out.push_back(s.theta);
  }
  return out;
}

const PulseRun& Demo1DResult::run(const std::string& name) const {
  for (const auto& r : runs) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("no 1D run named " + name);
}

namespace {

struct PulseVariant {
  std::string name;
  FrequencyGrid grid;
  AnnealConfig anneal;
  LossWeights weights;
};

void write_wrap_csv(const Trajectory& traj, double scale, const std::filesystem::path& path) {
  CsvWriter csv(path, {"t", "max_active_omega_norm", "displacement", "product"});
  for (const auto& r : traj.records) {
    if (r.report.phase != Phase::Spectral) continue;
    const double d = r.param_error / scale;
    csv.field(r.t).field(r.max_active_omega).field(d).field(r.max_active_omega * d);
    csv.end_row();
  }
}

}  // namespace

Demo1DResult demo_1d(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  const auto start = Clock::now();
  const PulseProblem pulse = make_pulse_problem(config);
  const int iters = config.optim.total_iters;

  std::vector<PulseVariant> variants;
  {
    LossWeights w = config.losses;
    w.add_pixel_loss = 0;
    w.lambda_bce = 0.0;
    variants.push_back({"spatial_l2", pulse_anneal_grid(config), anneal_for(config, 0), w});
  }
  {
    LossWeights w = config.losses;
    w.add_pixel_loss = iters;
    AnnealConfig a = anneal_for(config, iters);
    a.num_bands = 1;
    variants.push_back({"static_band", pulse_static_grid(config), a, w});
  }
  {
    LossWeights w = config.losses;
    w.add_pixel_loss = iters;
    variants.push_back({"annealed", pulse_anneal_grid(config), anneal_for(config, iters), w});
  }
  {
    LossWeights w = config.losses;
    variants.push_back({"annealed_pixel", pulse_anneal_grid(config), anneal_for(config, w.add_pixel_loss), w});
  }

  Demo1DResult result;
  result.runs.resize(variants.size());
  const ErrorFn error_fn = [&pulse](const Deformation& d) { return std::abs(pulse.theta_of(d)); };
  parallel::for_ranges(variants.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& v = variants[i];
      const TrackingProblem problem =
          make_problem(pulse.canonical, pulse.target, v.grid, v.anneal, v.weights, pulse.cutoff);
      PulseRun& run = result.runs[i];
      run.name = v.name;
      run.trajectory = run_tracking(problem, pulse.params_at(config.theta0), optim_for(config), error_fn);
      run.initial_grad_norm = run.trajectory.records.front().grad_norm;
      run.final_theta = pulse.theta_of(run.trajectory.final_params);
      for (const auto& r : run.trajectory.records) {
        if (r.report.phase == Phase::Spectral) {
          run.max_wrap_product =
              std::max(run.max_wrap_product, r.max_active_omega * r.param_error / pulse.theta_scale);
        }
      }
    }
  });

  const std::pair<const char*, LandscapeLoss> kinds[] = {{"spatial_l2", LandscapeLoss::Pixel},
                                                         {"static_band", LandscapeLoss::StaticBand},
                                                         {"anneal_start", LandscapeLoss::AnnealStart},
                                                         {"anneal_full", LandscapeLoss::AnnealFull}};
  for (const auto& [name, kind] : kinds) {
    result.landscapes.emplace_back(
        name, landscape_1d(pulse_loss_function(pulse, config, kind), config.theta_min, config.theta_max,
                           config.samples));
  }
  result.static_false_minima = false_minima(result.landscapes[1].second, 0.0, config.theta0, 0.0, 0.3);
  result.seconds = seconds_since(start);

  if (out_dir.empty()) return result;
  std::filesystem::create_directories(out_dir);
  write_config_record(config, out_dir);
  for (const auto& run : result.runs) {
    write_trajectory_csv(run.trajectory, out_dir / ("traj_" + run.name + ".csv"));
    if (run.name != "spatial_l2") write_wrap_csv(run.trajectory, pulse.theta_scale, out_dir / ("wrap_" + run.name + ".csv"));
  }
  for (const auto& [name, curve] : result.landscapes) write_landscape_csv(curve, out_dir / ("landscape_" + name + ".csv"));
  {
    CsvWriter csv(out_dir / "demo1d_summary.csv",
                  {"config", "initial_grad_norm", "final_theta", "final_error", "max_wrap_product"});
    for (const auto& run : result.runs) {
      csv.field(run.name).field(run.initial_grad_norm).field(run.final_theta);
      csv.field(std::abs(run.final_theta)).field(run.max_wrap_product);
      csv.end_row();
    }
  }
  {
    std::vector<PlotSeries> series;
    for (const auto& [name, curve] : result.landscapes) {
      PlotSeries s{name, {}, {}};
      double peak = 0.0;
      for (const auto& p : curve) peak = std::max(peak, p.loss);
      for (const auto& p : curve) {
        s.x.push_back(p.theta);
        s.y.push_back(peak > 0.0 ? p.loss / peak : 0.0);
      }
      series.push_back(std::move(s));
    }
    emit_svg_plot(series, {"1D loss landscapes (each scaled to its maximum)", "theta", "loss / max"},
                  out_dir / "demo1d_landscapes.svg");
  }
  {
    std::vector<PlotSeries> series;
    for (const auto& run : result.runs) {
      PlotSeries s{run.name, {}, {}};
      for (const auto& r : run.trajectory.records) {
        s.x.push_back(r.t);
        s.y.push_back(r.param_error);
      }
      series.push_back(std::move(s));
    }
    emit_svg_plot(series, {"1D pulse alignment", "iteration", "|theta - theta*|", true},
                  out_dir / "demo1d_convergence.svg");
  }
  return result;
}

// ---- 2D rigid demo --------------------------------------------------------

namespace {

struct RigidSetup {
  Scene canonical;
  RigidParams target_params;
  Image target;
  FrequencyGrid grid;
  CoordinateField field;
};

RigidSetup make_rigid_setup(const ExperimentConfig& config) {
  validate(config);
  RigidSetup s;
  s.canonical = load_or_make_scene(config);
  s.field = make_coordinate_field(config.width, config.height);
  s.target_params = {Vec2(config.target_tx, config.target_ty), config.target_rotation_deg * kPi / 180.0};
  s.target = render(apply_deformation(s.target_params, s.canonical), s.field, config.cutoff);
  const int k = config.anneal.num_bands;
  s.grid = build_frequency_grid(k, required_max_index(k, config.anneal.mode), config.phase_scale, config.anneal.mode);
  return s;
}

RigidRun run_rigid(const RigidSetup& setup, const ExperimentConfig& config, const std::string& name,
                   bool spectral, const RigidParams& initial, const std::filesystem::path& frame_dir) {
  LossWeights w = config.losses;
  if (!spectral) w.add_pixel_loss = 0;
  const TrackingProblem problem =
      make_problem(setup.canonical, setup.target, setup.grid, anneal_for(config, w.add_pixel_loss), w, config.cutoff);
  const std::vector<double> star = flatten(setup.target_params);
  const ErrorFn error_fn = [&star](const Deformation& d) { return vec_norm(flatten(d), star); };

  IterationHook hook;
  if (!frame_dir.empty()) {
    const int last = config.optim.total_iters;
    hook = [&, last](int t, const Deformation& d) {
      const bool listed = std::find(config.log_steps.begin(), config.log_steps.end(), t) != config.log_steps.end();
      if (!listed && t != last) return;
      char file[64];
      std::snprintf(file, sizeof file, "%s_t%05d.pgm", name.c_str(), t);
      write_pnm(render(apply_deformation(d, setup.canonical), setup.field, config.cutoff), frame_dir / file);
    };
  }

  RigidRun run;
  run.name = name;
  run.trajectory = run_tracking(problem, initial, optim_for(config), error_fn, hook);
  const double px_per_unit = config.width / 2.0;
  const auto& fin = std::get<RigidParams>(run.trajectory.final_params);
  run.initial_translation_px = (initial.translation - setup.target_params.translation).norm() * px_per_unit;
  run.final_translation_px = (fin.translation - setup.target_params.translation).norm() * px_per_unit;
  run.final_rotation_deg = wrap_degrees(fin.rotation - setup.target_params.rotation);
  run.final_psnr = psnr(render(apply_deformation(fin, setup.canonical), setup.field, config.cutoff), setup.target);
  for (const auto& r : run.trajectory.records) {
    if (r.report.phase != Phase::Spectral) continue;
    const double d = max_mean_displacement(setup.canonical, rigid_from(r.params), setup.target_params);
    run.max_wrap_product = std::max(run.max_wrap_product, r.max_active_omega * d);
  }
  return run;
}

void write_rigid_wrap_csv(const RigidRun& run, const RigidSetup& setup, const std::filesystem::path& path) {
  CsvWriter csv(path, {"t", "max_active_omega_norm", "displacement", "product"});
  for (const auto& r : run.trajectory.records) {
    if (r.report.phase != Phase::Spectral) continue;
    const double d = max_mean_displacement(setup.canonical, rigid_from(r.params), setup.target_params);
    csv.field(r.t).field(r.max_active_omega).field(d).field(r.max_active_omega * d);
    csv.end_row();
  }
}

}  // namespace

Demo2DResult demo_2d(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  const auto start = Clock::now();
  const RigidSetup setup = make_rigid_setup(config);
  const RigidParams initial{Vec2(config.init_tx, config.init_ty), config.init_rotation_deg * kPi / 180.0};

  std::filesystem::path frames;
  if (!out_dir.empty()) {
    frames = out_dir / "frames";
    std::filesystem::create_directories(frames);
  }
  Demo2DResult result;
  result.initial_overlap =
      footprint_overlap(render(apply_deformation(initial, setup.canonical), setup.field, config.cutoff), setup.target);
  parallel::for_ranges(2, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (i == 0) {
        result.pixel = run_rigid(setup, config, "pixel", false, initial, frames);
      } else {
        result.spectral = run_rigid(setup, config, "spectral", true, initial, frames);
      }
    }
  });
  result.seconds = seconds_since(start);

  if (out_dir.empty()) return result;
  write_config_record(config, out_dir);
  write_pnm(setup.target, frames / "target.pgm");
  write_trajectory_csv(result.pixel.trajectory, out_dir / "traj_pixel.csv");
  write_trajectory_csv(result.spectral.trajectory, out_dir / "traj_spectral.csv");
  write_rigid_wrap_csv(result.spectral, setup, out_dir / "wrap_spectral.csv");
  {
    CsvWriter csv(out_dir / "demo2d_summary.csv",
                  {"method", "initial_overlap", "initial_translation_px", "final_translation_px",
                   "final_rotation_deg", "final_psnr", "max_wrap_product"});
    for (const RigidRun* r : {&result.pixel, &result.spectral}) {
      csv.field(r->name).field(result.initial_overlap).field(r->initial_translation_px);
      csv.field(r->final_translation_px).field(r->final_rotation_deg).field(r->final_psnr).field(r->max_wrap_product);
      csv.end_row();
    }
  }
  {
    std::vector<PlotSeries> series;
    for (const RigidRun* r : {&result.pixel, &result.spectral}) {
      PlotSeries s{r->name, {}, {}};
      for (const auto& rec : r->trajectory.records) {
        s.x.push_back(rec.t);
        s.y.push_back(rec.param_error);
      }
      series.push_back(std::move(s));
    }
    emit_svg_plot(series, {"2D rigid tracking", "iteration", "|params - target|", true},
                  out_dir / "demo2d_convergence.svg");
  }
  schedule_plot(config, out_dir);
  return result;
}

// ---- shift sweep ------------------------------------------------------------

Vec2 sweep_direction(std::uint64_t shift_seed) {
  std::mt19937_64 rng(shift_seed);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const double a = 2.0 * kPi * u;
  return Vec2(std::cos(a), std::sin(a));
}

std::vector<SweepCell> sweep_shift(const ExperimentConfig& config, const std::vector<double>& radii,
                                   const std::filesystem::path& out_dir) {
  for (double r : radii) {
    if (!(r >= 0.0)) throw std::invalid_argument("sweep_shift: radii must be non-negative");
  }
  const RigidSetup setup = make_rigid_setup(config);
  const Vec2 u = sweep_direction(config.shift_seed);
  std::vector<SweepCell> cells(radii.size() * 2);
  parallel::for_ranges(cells.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double radius = radii[i / 2];
      const bool ours = i % 2 == 1;
      RigidParams initial = setup.target_params;
      initial.translation += radius * u;
      const RigidRun run = run_rigid(setup, config, ours ? "ours" : "pixel", ours, initial, {});
      SweepCell& cell = cells[i];
      cell.radius = radius;
      cell.method = run.name;
      cell.final_psnr = run.final_psnr;
      cell.final_param_error = run.trajectory.final_error;
      cell.initial_overlap =
          footprint_overlap(render(apply_deformation(initial, setup.canonical), setup.field, config.cutoff), setup.target);
    }
  });

  if (out_dir.empty()) return cells;
  std::filesystem::create_directories(out_dir);
  write_config_record(config, out_dir);
  {
    CsvWriter csv(out_dir / "sweep.csv", {"radius", "method", "final_psnr", "final_param_error", "initial_overlap"});
    for (const auto& c : cells) {
      csv.field(c.radius).field(c.method).field(c.final_psnr).field(c.final_param_error).field(c.initial_overlap);
      csv.end_row();
    }
  }
  std::vector<PlotSeries> series{{"pixel", {}, {}}, {"ours", {}, {}}};
  for (const auto& c : cells) {
    auto& s = series[c.method == "ours" ? 1 : 0];
    s.x.push_back(c.radius);
    s.y.push_back(c.final_param_error);
  }
  emit_svg_plot(series, {"Shift sweep", "initial shift radius", "final parameter error"}, out_dir / "sweep.svg");
  return cells;
}

// ---- schedule ------------------------------------------------------------------

void schedule_plot(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  validate(config);
  const AnnealConfig anneal = anneal_for(config, config.losses.add_pixel_loss);
  const int k = anneal.num_bands;
  const FrequencyGrid grid =
      build_frequency_grid(k, required_max_index(k, anneal.mode), config.phase_scale, anneal.mode);
  std::filesystem::create_directories(out_dir);

  std::vector<std::string> header{"t", "alpha"};
  for (int b = 0; b < k; ++b) header.push_back("w_" + std::to_string(b));
  header.push_back("max_active_omega_norm");
  CsvWriter csv(out_dir / "schedule.csv", header);
  std::vector<PlotSeries> series(static_cast<std::size_t>(k));
  for (int b = 0; b < k; ++b) series[b].name = "w_" + std::to_string(b);
  for (int t = 0; t < config.optim.total_iters; ++t) {
    const AnnealState s = anneal_state(anneal, t);
    csv.field(t).field(s.alpha);
    for (int b = 0; b < k; ++b) {
      csv.field(s.band_weights[b]);
      series[b].x.push_back(t);
      series[b].y.push_back(s.band_weights[b]);
    }
    csv.field(max_active_omega_norm(grid, s.band_weights));
    csv.end_row();
  }
  emit_svg_plot(series, {"Band weights w_k(t)", "iteration", "weight"}, out_dir / "schedule.svg");
}

}  // namespace spectrack
