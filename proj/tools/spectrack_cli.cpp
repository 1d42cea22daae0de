// Command-line driver for the tracking experiments.

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spectrack/config.hpp"
#include "spectrack/experiments.hpp"
#include "spectrack/gradcheck.hpp"
#include "spectrack/parallel.hpp"
#include "spectrack/plot.hpp"

namespace {

using namespace spectrack;

constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Converged cells differ only by rounding noise far below this.
constexpr double kMonotoneResolution = 1e-12;

struct SharedFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  unsigned threads = 1;
  std::vector<std::string> overrides;
};

// Accumulates named checks; the first failure decides the exit status.
class Checks {
 public:
  void add(const std::string& name, bool ok, double value, double bound) {
    std::printf("check %-32s %s  value=%.6g bound=%.6g\n", name.c_str(), ok ? "PASS" : "FAIL", value, bound);
    if (!ok && failed_.empty()) failed_ = name;
  }
  int finish() const {
    if (failed_.empty()) return 0;
    std::fprintf(stderr, "failing check: %s\n", failed_.c_str());
    return kExitCheckFailed;
  }

 private:
  std::string failed_;
};

std::string radius_tag(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

ExperimentConfig resolve(ExperimentKind kind, const SharedFlags& flags) {
  ExperimentConfig config = default_config(kind);
  if (!flags.config_path.empty()) load_config_file(config, flags.config_path);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed) {
    config.seed = *flags.seed;
    config.shift_seed = *flags.seed;
  }
  validate(config);
  parallel::set_thread_count(flags.threads);
  return config;
}

int cmd_demo1d(const SharedFlags& flags) {
  const ExperimentConfig config = resolve(ExperimentKind::Demo1D, flags);
  const Demo1DResult r = demo_1d(config, flags.out);
  std::printf("demo1d finished in %.2f s, artifacts in %s\n", r.seconds, flags.out.c_str());
  Checks checks;
  const auto& spatial = r.run("spatial_l2");
  const auto& stat = r.run("static_band");
  const auto& ann = r.run("annealed");
  checks.add("spatial_initial_gradient", spatial.initial_grad_norm < 1e-10, spatial.initial_grad_norm, 1e-10);
  checks.add("spatial_final_error", std::abs(spatial.final_theta) > 5.5, std::abs(spatial.final_theta), 5.5);
  checks.add("static_final_error", std::abs(stat.final_theta) > 0.3, std::abs(stat.final_theta), 0.3);
  checks.add("static_false_minima", r.static_false_minima.size() >= 3,
             static_cast<double>(r.static_false_minima.size()), 3);
  checks.add("annealed_final_error", std::abs(ann.final_theta) < 1e-2, std::abs(ann.final_theta), 1e-2);
  checks.add("annealed_phase_wrap", ann.max_wrap_product < kPi, ann.max_wrap_product, kPi);
  return checks.finish();
}

int cmd_demo2d(const SharedFlags& flags) {
  const ExperimentConfig config = resolve(ExperimentKind::Demo2D, flags);
  const Demo2DResult r = demo_2d(config, flags.out);
  std::printf("demo2d finished in %.2f s, artifacts in %s\n", r.seconds, flags.out.c_str());
  Checks checks;
  checks.add("spectral_translation_px", r.spectral.final_translation_px < 2.0, r.spectral.final_translation_px, 2.0);
  checks.add("spectral_rotation_deg", r.spectral.final_rotation_deg < 2.0, r.spectral.final_rotation_deg, 2.0);
  const double half = 0.5 * r.pixel.initial_translation_px;
  if (r.initial_overlap == 0.0) {
    checks.add("pixel_translation_px", r.pixel.final_translation_px > half, r.pixel.final_translation_px, half);
  }
  checks.add("spectral_phase_wrap", r.spectral.max_wrap_product < kPi, r.spectral.max_wrap_product, kPi);
  return checks.finish();
}

int cmd_landscape(const SharedFlags& flags) {
  const ExperimentConfig config = resolve(ExperimentKind::Landscape, flags);
  const PulseProblem pulse = make_pulse_problem(config);
  const auto curve = landscape_1d(pulse_loss_function(pulse, config, config.landscape_loss), config.theta_min,
                                  config.theta_max, config.samples);
  std::filesystem::create_directories(flags.out);
  write_landscape_csv(curve, std::filesystem::path(flags.out) / "landscape.csv");
  PlotSeries s{"loss", {}, {}};
  for (const auto& p : curve) {
    s.x.push_back(p.theta);
    s.y.push_back(p.loss);
  }
  emit_svg_plot({s}, {"Loss landscape", "theta", "loss"}, std::filesystem::path(flags.out) / "landscape.svg");
  std::printf("landscape: %d samples written to %s\n", config.samples, flags.out.c_str());
  return 0;
}

int cmd_sweep(const SharedFlags& flags) {
  const ExperimentConfig config = resolve(ExperimentKind::Sweep, flags);
  const auto cells = sweep_shift(config, config.sweep_radii, flags.out);
  Checks checks;
  double prev = -1.0;
  for (const auto& c : cells) {
    std::printf("radius %.3f %-6s psnr %.3f error %.6g overlap %.6g\n", c.radius, c.method.c_str(), c.final_psnr,
                c.final_param_error, c.initial_overlap);
    if (c.method == "pixel") {
      checks.add("pixel_monotone_r" + radius_tag(c.radius), c.final_param_error >= prev - kMonotoneResolution, c.final_param_error, prev);
      prev = c.final_param_error;
    }
    if (c.radius == 0.0) checks.add("psnr_r0_" + c.method, c.final_psnr >= 40.0, c.final_psnr, 40.0);
    if (c.method == "ours" && c.radius > 0.0 && c.initial_overlap == 0.0) {
      checks.add("ours_error_r" + radius_tag(c.radius), c.final_param_error < 0.05 * c.radius, c.final_param_error,
                 0.05 * c.radius);
    }
  }
  return checks.finish();
}

int cmd_gradcheck(const SharedFlags& flags) {
  const ExperimentConfig config = resolve(ExperimentKind::GradCheck, flags);
  const GradCheckReport report = run_gradcheck(config);
  Checks checks;
  for (const auto& e : report.entries) checks.add(e.component, e.pass(), e.max_relative_error, e.tolerance);
  return checks.finish();
}

int cmd_schedule(const SharedFlags& flags) {
  const ExperimentConfig config = resolve(ExperimentKind::SchedulePlot, flags);
  schedule_plot(config, flags.out);
  std::printf("schedule written to %s\n", flags.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral-moment tracking experiments"};
  app.require_subcommand(1);
  SharedFlags flags;

  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const SharedFlags&);
  };
  const Entry entries[] = {
      {"demo1d", "1D pulse alignment: spatial, static high band, annealed, annealed + pixel", cmd_demo1d},
      {"demo2d", "2D rigid tracking from a zero-overlap start", cmd_demo2d},
      {"landscape", "sample a 1D loss landscape", cmd_landscape},
      {"sweep", "shift-radius sweep for pixel and spectral tracking", cmd_sweep},
      {"gradcheck", "finite-difference gradient batteries", cmd_gradcheck},
      {"schedule-plot", "band weights over the annealing schedule", cmd_schedule},
  };
  int (*selected)(const SharedFlags&) = nullptr;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", flags.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "random seed (also used as shift_seed)");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--threads", flags.threads, "worker threads");
    sub->add_option("--set", flags.overrides, "override one config key, key=value");
    sub->callback([&selected, run = e.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return selected(flags);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
