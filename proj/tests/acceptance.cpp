// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "spectrack/anneal.hpp"
#include "spectrack/config.hpp"
#include "spectrack/experiments.hpp"
#include "spectrack/gradcheck.hpp"
#include "spectrack/optim.hpp"
#include "spectrack/parallel.hpp"
#include "spectrack/spectral.hpp"

using namespace spectrack;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::mt19937_64& rng() {
  static std::mt19937_64 engine(20261018);
  return engine;
}

double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }
int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng()); }

Image random_image(int w, int h) {
  Image img(w, h, 1, true);
  for (double& v : img.intensity()) v = uniform(0.0, 1.0);
  for (double& v : img.opacity()) v = uniform(0.05, 0.95);
  return img;
}

// Direct DFT-free moment for the oracle side.
Complex direct_moment(std::span<const double> values, const CoordinateField& field, const Vec2& omega) {
  Complex acc(0.0, 0.0);
  for (std::size_t p = 0; p < field.size(); ++p) acc += values[p] * std::exp(Complex(0.0, -omega.dot(field.coords[p])));
  return acc / static_cast<double>(field.size());
}

// ---------------------------------------------------------------------------

struct Demo1DOutcome {
  Demo1DResult result;
  double seconds = 0.0;
};

Demo1DOutcome run_demo1d_single_thread() {
  parallel::set_thread_count(1);
  const auto start = std::chrono::steady_clock::now();
  Demo1DResult r = demo_1d(default_config(ExperimentKind::Demo1D), {});
  const double s = seconds_since(start);
  parallel::set_thread_count(std::max(1u, std::thread::hardware_concurrency()));
  return {std::move(r), s};
}

void criterion_vanishing_gradient(const Demo1DOutcome& d) {
  const PulseRun& run = d.result.run("spatial_l2");
  const double err = std::abs(run.final_theta);
  const bool ok = run.initial_grad_norm < 1e-10 && err > 5.5 && d.seconds < 5.0;
  report(1, "vanishing_gradient", ok,
         fmt("grad0=%.3e (<1e-10) final_err=%.4f (>5.5) demo1d_seconds_1thread=%.3f (<5)", run.initial_grad_norm, err,
             d.seconds));
}

void criterion_static_trap(const Demo1DOutcome& d) {
  const PulseRun& run = d.result.run("static_band");
  const double err = std::abs(run.final_theta);
  const double grad = run.trajectory.records.back().grad_norm;
  const auto& curve = d.result.landscapes[1].second;
  const double step = curve[1].theta - curve[0].theta;
  double nearest = INFINITY;
  for (double m : d.result.static_false_minima) nearest = std::min(nearest, std::abs(m - run.final_theta));
  const std::size_t count = d.result.static_false_minima.size();
  const bool ok = err > 0.3 && nearest <= step && count >= 3;
  report(2, "static_high_frequency_trap", ok,
         fmt("final_err=%.4f (>0.3) dist_to_sampled_min=%.4f (<=%.3f) false_minima=%zu (>=3) final_grad=%.2e", err,
             nearest, step, count, grad));
}

void criterion_annealed(const Demo1DOutcome& d) {
  const PulseRun& run = d.result.run("annealed");
  const double err = std::abs(run.final_theta);
  const bool ok = err < 1e-2 && run.max_wrap_product < kPi && d.seconds < 10.0;
  report(3, "annealed_recovery", ok,
         fmt("final_err=%.3e (<1e-2) max_wrap=%.4f (<pi) demo1d_seconds_1thread=%.3f (<10)", err,
             run.max_wrap_product, d.seconds));
}

void criterion_demo2d() {
  const ExperimentConfig c = default_config(ExperimentKind::Demo2D);
  const auto start = std::chrono::steady_clock::now();
  const Demo2DResult r = demo_2d(c, {});
  const double s = seconds_since(start);
  const double pix_ratio = r.pixel.final_translation_px / r.pixel.initial_translation_px;
  const bool ok = r.initial_overlap == 0.0 && r.spectral.final_translation_px < 2.0 &&
                  std::abs(r.spectral.final_rotation_deg) < 2.0 && pix_ratio > 0.5 && s < 60.0;
  report(4, "demo2d_rigid", ok,
         fmt("%dx%d overlap0=%.3g spectral_px=%.4f (<2) spectral_deg=%.4f (<2) pixel_ratio=%.3f (>0.5) seconds=%.2f (<60)",
             c.width, c.height, r.initial_overlap, r.spectral.final_translation_px, r.spectral.final_rotation_deg,
             pix_ratio, s));
}

void criterion_closed_form() {
  int triples = 0;
  double worst = 0.0;
  for (int i = 0; i < 60; ++i) {
    const int w = integer(6, 16), h = integer(6, 16);
    const Image gt = random_image(w, h);
    const int sx = integer(-w + 1, w - 1), sy = integer(-h + 1, h - 1);
    const Image rend = circular_shift(gt, sx, sy);
    std::pair<int, int> index{integer(-3, 3), integer(1, 3)};
    if (integer(0, 1) == 0) index = {integer(1, 3), 0};
    const CoordinateField field = make_coordinate_field(w, h);
    const FrequencyGrid grid = make_single_band_grid(std::span(&index, 1), kPi);
    const ImageLoss loss =
        spectral_image_loss(rend, gt, grid, field, std::vector<double>{1.0}, 0.0, SpectralMetric::Squared);
    // Loss carries the conjugate multiplicity; per frequency it is |dM|^2 and the closed form is half of that.
    const double half_sq = 0.5 * loss.value / grid.multiplicity(0);
    const Vec2 omega = grid.entries[0].omega;
    const double mag = std::abs(direct_moment(gt.intensity(), field, omega));
    const double oracle = mag * mag * (1.0 - std::cos(omega.dot(Vec2(2.0 * sx / w, 2.0 * sy / h))));
    worst = std::max(worst, std::abs(half_sq - oracle));
    worst = std::max(worst, std::abs(closed_form_shift_loss(mag, omega, Vec2(2.0 * sx / w, 2.0 * sy / h)) - oracle));
    ++triples;
  }
  report(5, "closed_form_landscape", triples >= 50 && worst < 1e-10,
         fmt("triples=%d (>=50) max_abs_err=%.3e (<1e-10)", triples, worst));
}

void criterion_shift_theorem() {
  double worst = 0.0;
  const int cases = 25;
  for (int i = 0; i < cases; ++i) {
    const Image img = random_image(8, 8);
    worst = std::max(worst, circular_shift_theorem_check(img, integer(-7, 7), integer(-7, 7)));
  }
  report(6, "shift_theorem", worst < 1e-10, fmt("cases=%d (>=20) max_deviation=%.3e (<1e-10)", cases, worst));
}

void criterion_parseval() {
  double worst = 0.0;
  const int pairs = 24;
  for (int i = 0; i < pairs; ++i) {
    const int w = i < 4 ? 64 : integer(2, 64), h = i < 4 ? 64 : integer(2, 64);
    const Image a = random_image(w, h), b = random_image(w, h);
    double direct = 0.0;
    for (std::size_t p = 0; p < a.intensity().size(); ++p) {
      const double d = a.intensity()[p] - b.intensity()[p];
      direct += d * d;
    }
    worst = std::max(worst, std::abs(spatial_l2_via_spectrum(a, b) - direct) / direct);
  }
  report(7, "parseval", worst < 1e-8, fmt("pairs=%d (>=20, up to 64x64) max_rel_err=%.3e (<1e-8)", pairs, worst));
}

void criterion_gradcheck() {
  const ExperimentConfig c = default_config(ExperimentKind::GradCheck);
  const GradCheckReport r = run_gradcheck(c);
  int min_instances = INT32_MAX;
  std::string worst_name;
  double worst_ratio = 0.0;
  for (const auto& e : r.entries) {
    min_instances = std::min(min_instances, e.instances);
    if (e.max_relative_error / e.tolerance >= worst_ratio) {
      worst_ratio = e.max_relative_error / e.tolerance;
      worst_name = e.component;
    }
  }
  const bool ok = r.pass() && min_instances >= 100 && r.entries.size() == 10;
  report(8, "gradient_batteries", ok,
         fmt("components=%zu min_instances=%d (>=100) worst=%s at %.3g of its tolerance%s%s", r.entries.size(),
             min_instances, worst_name.c_str(), worst_ratio, ok ? "" : " first_failure=", r.first_failure().c_str()));
}

void criterion_exponential_convergence() {
  const int w = 64, h = 64, steps = 20;
  const CoordinateField field = make_coordinate_field(w, h);
  Scene scene;
  Gaussian2D g;
  g.mean = Vec2::Zero();
  g.covariance = Mat2::Identity() * (0.15 * 0.15);
  g.amplitude = {1.0};
  g.opacity = 0.9;
  scene.gaussians.push_back(g);
  const double shift = 0.02;
  const RigidParams truth{Vec2(shift, 0.0), 0.0};
  Image target = render(apply_deformation(truth, scene), field, std::nullopt);

  const std::pair<int, int> index{1, 0};
  const FrequencyGrid grid = make_single_band_grid(std::span(&index, 1));
  const Vec2 omega = grid.entries[0].omega;
  const double mag = std::abs(direct_moment(target.intensity(), field, omega));
  // L = m |M|^2 |e^{-j w d} - 1|^2 ~ 2 m |M|^2 (w d)^2 / 2, so GD contracts by 1 - 2 m eta |M|^2 w^2.
  const double target_gamma = 0.8;
  const double m = grid.multiplicity(0);
  const double eta = (1.0 - target_gamma) / (2.0 * m * mag * mag * omega.squaredNorm());
  const double predicted = 1.0 - 2.0 * m * eta * mag * mag * omega.squaredNorm();

  AnnealConfig anneal;
  anneal.num_bands = 1;
  anneal.total_spectral_iters = steps + 1;
  LossWeights lw;
  lw.lambda_image = 1.0;
  lw.lambda_spec_mask = 0.0;
  lw.spectral_metric = SpectralMetric::Squared;
  lw.add_pixel_loss = steps + 1;
  const TrackingProblem problem = make_problem(scene, target, grid, anneal, lw, std::nullopt);
  OptimConfig oc;
  oc.method = OptimMethod::GradientDescent;
  oc.lr_init = oc.lr_final = eta;
  oc.total_iters = steps + 1;
  const Trajectory tr = run_tracking(problem, RigidParams{}, oc, [&](const Deformation& d) {
    return std::abs(std::get<RigidParams>(d).translation.x() - shift);
  });

  std::vector<double> err;
  for (const auto& rec : tr.records) err.push_back(rec.param_error);
  err.push_back(tr.final_error);
  std::vector<double> ratio;
  for (int t = 0; t < steps; ++t) ratio.push_back(err[t + 1] / err[t]);
  const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
  double mean = 0.0;
  for (double r : ratio) mean += r;
  mean /= steps;
  // Least squares fit of log error against t.
  const int n = steps + 1;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int t = 0; t < n; ++t) {
    const double y = std::log(err[t]);
    sx += t, sy += y, sxx += double(t) * t, sxy += t * y, syy += y * y;
  }
  const double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  const double r2 = cov * cov / (vx * vy);
  const double spread = *hi - *lo;
  const bool ok = spread < 1e-3 && std::abs(mean - predicted) < 1e-3 && r2 > 0.999;
  report(9, "exponential_convergence", ok,
         fmt("ratio_spread=%.3e (<1e-3) mean_ratio=%.6f predicted=%.6f (|diff|<1e-3) R2=%.8f (>0.999)", spread, mean,
             predicted, r2));
}

void criterion_schedule() {
  bool exact = true;
  for (double x : {0.0, 0.5, 1.0}) {
    for (int k = 0; k < 4; ++k) {
      const double oracle = (1.0 - std::cos(kPi * x)) / 2.0;
      exact = exact && band_weight(k + x, k) == oracle;
    }
  }
  exact = exact && band_weight(0.0, 0) == 0.0 && band_weight(1.0, 0) == 1.0 && band_weight(-3.0, 1) == 0.0 &&
          band_weight(9.0, 2) == 1.0;

  AnnealConfig c;
  c.num_bands = 6;
  c.total_spectral_iters = 400;
  c.warmup_frac = 0.25;
  const double base = kDefaultPhaseScale * std::sqrt(2.0);
  bool linear_ok = true, log_ok = true;
  double worst_linear = 0.0, worst_log = 0.0;
  for (BandingMode mode : {BandingMode::LinearFrequency, BandingMode::LogIndex}) {
    c.mode = mode;
    // Every band fully populated: linear band k ends at index k + 1, log band k at 2^k.
    const int extent = mode == BandingMode::LinearFrequency ? c.num_bands : 1 << (c.num_bands - 1);
    const FrequencyGrid grid = build_frequency_grid(c.num_bands, extent, kDefaultPhaseScale, mode);
    double prev = 0.0;
    for (int t = 0; t <= c.total_spectral_iters; ++t) {
      const AnnealState s = anneal_state(c, t);
      const double got = max_active_omega_norm(grid, s.band_weights);
      const double top = std::ceil(s.alpha);
      if (mode == BandingMode::LinearFrequency) {
        const double expected = base * top;
        worst_linear = std::max(worst_linear, std::abs(got - expected));
        // at most linear in t: bounded by the affine envelope of alpha(t)
        linear_ok = linear_ok && std::abs(got - expected) < 1e-12 && got <= base * (s.alpha + 1.0) + 1e-12;
      } else {
        const double expected = base * std::exp2(top - 1.0);
        worst_log = std::max(worst_log, std::abs(got - expected));
        log_ok = log_ok && std::abs(got - expected) < 1e-12 && got <= base * std::exp2(s.alpha) + 1e-12 &&
                 got >= base * std::exp2(s.alpha - 1.0) - 1e-12;
      }
      linear_ok = linear_ok && got >= prev - 1e-12;
      prev = got;
    }
  }
  report(10, "schedule", exact && linear_ok && log_ok,
         fmt("boundary_exact=%s linear_max_dev=%.2e log_max_dev=%.2e", exact ? "yes" : "no", worst_linear, worst_log));
}

void criterion_sweep() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::uint64_t> seeds{7, 11, 23};
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig c = default_config(ExperimentKind::Sweep);
    c.shift_seed = seed;
    const auto cells = sweep_shift(c, c.sweep_radii, {});
    double prev_pixel = -1.0;
    double worst_ours = 0.0;
    int zero_overlap = 0;
    bool mono = true;
    for (const auto& cell : cells) {
      if (cell.method == "pixel") {
        // errors below 1e-12 are converged runs and count as equal
        if (cell.final_param_error + 1e-12 < prev_pixel) mono = false;
        prev_pixel = std::max(prev_pixel, cell.final_param_error);
      } else if (cell.initial_overlap == 0.0 && cell.radius > 0.0) {
        ++zero_overlap;
        worst_ours = std::max(worst_ours, cell.final_param_error / cell.radius);
      }
    }
    ok = ok && mono && zero_overlap > 0 && worst_ours < 0.05;
    detail += fmt("seed%llu[mono=%s zero_overlap=%d ours_max_frac=%.4f] ", static_cast<unsigned long long>(seed),
                  mono ? "yes" : "no", zero_overlap, worst_ours);
  }
  const double s = seconds_since(start);
  ok = ok && s < 600.0;
  report(11, "shift_sweep_shape", ok, detail + fmt("seconds=%.1f (<600)", s));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void run_all_experiments(const std::filesystem::path& dir) {
  demo_1d(default_config(ExperimentKind::Demo1D), dir / "demo1d");
  demo_2d(default_config(ExperimentKind::Demo2D), dir / "demo2d");
  const ExperimentConfig sweep = default_config(ExperimentKind::Sweep);
  sweep_shift(sweep, sweep.sweep_radii, dir / "sweep");
  schedule_plot(default_config(ExperimentKind::SchedulePlot), dir / "schedule");
  const ExperimentConfig lc = default_config(ExperimentKind::Landscape);
  const auto curve = landscape_1d(pulse_loss_function(make_pulse_problem(lc), lc, lc.landscape_loss), lc.theta_min,
                                  lc.theta_max, lc.samples);
  std::filesystem::create_directories(dir / "landscape");
  write_landscape_csv(curve, dir / "landscape" / "landscape.csv");
}

void criterion_determinism() {
  const auto root = std::filesystem::temp_directory_path() / "spectrack_acceptance_determinism";
  std::filesystem::remove_all(root);
  const unsigned restore = parallel::thread_count();
  parallel::set_thread_count(1);
  run_all_experiments(root / "t1");
  parallel::set_thread_count(4);
  run_all_experiments(root / "t4");
  parallel::set_thread_count(restore);

  int files = 0, mismatches = 0;
  std::string first;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root / "t1")) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".svg" && ext != ".pgm" && ext != ".ppm" && ext != ".txt") continue;
    ++files;
    const auto other = root / "t4" / std::filesystem::relative(entry.path(), root / "t1");
    if (!std::filesystem::exists(other) || slurp(entry.path()) != slurp(other)) {
      if (first.empty()) first = std::filesystem::relative(entry.path(), root / "t1").string();
      ++mismatches;
    }
  }
  std::size_t count4 = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root / "t4")) count4 += entry.is_regular_file();
  std::size_t count1 = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root / "t1")) count1 += entry.is_regular_file();
  const bool ok = files > 0 && mismatches == 0 && count1 == count4;
  std::filesystem::remove_all(root);
  report(12, "determinism_threads_1_vs_4", ok,
         fmt("files=%d mismatches=%d%s%s", files, mismatches, first.empty() ? "" : " first=", first.c_str()));
}

}  // namespace

int main() {
  parallel::set_thread_count(std::max(1u, std::thread::hardware_concurrency()));
  const Demo1DOutcome demo1d = run_demo1d_single_thread();
  criterion_vanishing_gradient(demo1d);
  criterion_static_trap(demo1d);
  criterion_annealed(demo1d);
  criterion_demo2d();
  criterion_closed_form();
  criterion_shift_theorem();
  criterion_parseval();
  criterion_gradcheck();
  criterion_exponential_convergence();
  criterion_schedule();
  criterion_sweep();
  criterion_determinism();
  std::printf("%d of 12 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
