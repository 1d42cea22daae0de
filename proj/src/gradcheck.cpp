#include "spectrack/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "spectrack/objective.hpp"

namespace spectrack {
namespace {

constexpr double kStep = 1e-6;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

Scene random_scene(Rng& rng, int count, int channels) {
  Scene scene;
  scene.channels = channels;
  for (int i = 0; i < count; ++i) {
    Gaussian2D g;
    g.mean = Vec2(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
    const double sx = rng.uniform(0.12, 0.3), sy = rng.uniform(0.12, 0.3), phi = rng.uniform(-kPi, kPi);
    Mat2 r;
    r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    g.covariance = r * Vec2(sx * sx, sy * sy).asDiagonal() * r.transpose();
    g.covariance(1, 0) = g.covariance(0, 1);
    for (double& a : g.amplitude) a = rng.uniform(0.2, 1.0);
    g.opacity = rng.uniform(0.2, 0.9);
    scene.gaussians.push_back(g);
  }
  return scene;
}

Image random_image(Rng& rng, int w, int h, int channels, double o_lo, double o_hi) {
  Image img(w, h, channels, true);
  for (double& v : img.intensity()) v = rng.uniform(0.0, 1.0);
  for (double& v : img.opacity()) v = rng.uniform(o_lo, o_hi);
  return img;
}

// Flat scene parameters: per Gaussian mean(2), covariance xx/xy/yy, amplitudes, opacity.
std::vector<double> scene_params(const Scene& s) {
  std::vector<double> out;
  for (const auto& g : s.gaussians) {
    out.insert(out.end(), {g.mean.x(), g.mean.y(), g.covariance(0, 0), g.covariance(0, 1), g.covariance(1, 1)});
    for (int c = 0; c < s.channels; ++c) out.push_back(g.amplitude[c]);
    out.push_back(g.opacity);
  }
  return out;
}

Scene scene_from(const Scene& proto, std::span<const double> x) {
  Scene s = proto;
  std::size_t k = 0;
  for (auto& g : s.gaussians) {
    g.mean = Vec2(x[k], x[k + 1]);
    g.covariance << x[k + 2], x[k + 3], x[k + 3], x[k + 4];
    k += 5;
    for (int c = 0; c < s.channels; ++c) g.amplitude[c] = x[k++];
    g.opacity = x[k++];
  }
  return s;
}

double pair(const Image& adj_i, const Image& adj_o, const Image& img) {
  double s = 0.0;
  for (std::size_t i = 0; i < img.intensity().size(); ++i) s += adj_i.intensity()[i] * img.intensity()[i];
  for (std::size_t p = 0; p < img.pixel_count(); ++p) s += adj_o.intensity()[p] * img.opacity()[p];
  return s;
}

// Image values flattened as intensity then opacity.
std::vector<double> image_values(const Image& img) {
  std::vector<double> out(img.intensity().begin(), img.intensity().end());
  out.insert(out.end(), img.opacity().begin(), img.opacity().end());
  return out;
}

Image image_from(const Image& proto, std::span<const double> x) {
  Image img = proto;
  const std::size_t n = img.intensity().size();
  std::copy(x.begin(), x.begin() + n, img.intensity().begin());
  std::copy(x.begin() + n, x.end(), img.opacity().begin());
  return img;
}

std::vector<double> adjoint_values(const ImageLoss& loss) {
  std::vector<double> out(loss.adjoint_intensity.intensity().begin(), loss.adjoint_intensity.intensity().end());
  out.insert(out.end(), loss.adjoint_opacity.intensity().begin(), loss.adjoint_opacity.intensity().end());
  return out;
}

struct Battery {
  std::string name;
  double tolerance;
  // Returns (analytic, numeric) for one random instance.
  std::function<std::pair<std::vector<double>, std::vector<double>>(Rng&)> instance;
};

Deformation random_deformation(Rng& rng, const Scene& scene, bool morph, int control_points) {
  if (!morph) return RigidParams{Vec2(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)), rng.uniform(-1.0, 1.0)};
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(control_points), scene.size());
  MorphField field = make_morph_field(scene, select_control_points(scene, count, 11));
  for (std::size_t j = 0; j < field.size(); ++j) {
    field.offsets[j] = Vec2(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    field.rotations[j] = rng.uniform(-0.5, 0.5);
  }
  return field;
}

}  // namespace

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw ShapeError("relative_error: lengths differ");
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  return diff / std::max(scale, 1e-12);
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

bool GradCheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass(); });
}

std::string GradCheckReport::first_failure() const {
  for (const auto& e : entries) {
    if (!e.pass()) return e.component;
  }
  return {};
}

GradCheckReport run_gradcheck(const ExperimentConfig& config, const GradientCorruption& corrupt) {
  if (config.cutoff) throw ConfigError("gradient checks need cutoff = none");
  validate(config);
  const int w = config.width, h = config.height;
  const CoordinateField field = make_coordinate_field(w, h);
  const int nbands = config.anneal.num_bands;
  const FrequencyGrid grid =
      build_frequency_grid(nbands, required_max_index(nbands, config.anneal.mode), config.phase_scale, config.anneal.mode);
  const MomentBasis basis(grid, field);
  const int ngauss = config.num_gaussians;
  const Cutoff none = std::nullopt;

  std::vector<Battery> batteries;

  batteries.push_back({"render", 1e-5, [&](Rng& rng) {
    const int channels = rng.uniform(0.0, 1.0) < 0.5 ? 1 : 3;
    const Scene scene = random_scene(rng, ngauss, channels);
    const Image adj_i = random_image(rng, w, h, channels, -1.0, 1.0);
    Image adj_o(w, h);
    for (double& v : adj_o.intensity()) v = rng.uniform(-1.0, 1.0);
    const auto grads = render_backward(scene, field, adj_i, adj_o, none);
    std::vector<double> analytic;
    for (const auto& g : grads) {
      analytic.insert(analytic.end(), {g.mean.x(), g.mean.y(), g.covariance(0, 0),
                                       g.covariance(0, 1) + g.covariance(1, 0), g.covariance(1, 1)});
      for (int c = 0; c < channels; ++c) analytic.push_back(g.amplitude[c]);
      analytic.push_back(g.opacity);
    }
    const auto x = scene_params(scene);
    auto f = [&](std::span<const double> p) { return pair(adj_i, adj_o, render(scene_from(scene, p), field, none)); };
    return std::make_pair(analytic, central_difference(f, x, kStep));
  }});

  for (const bool morph : {false, true}) {
    batteries.push_back({morph ? "deform_morph" : "deform_rigid", 1e-6, [&, morph](Rng& rng) {
      const Scene scene = random_scene(rng, ngauss, 1);
      const Deformation params = random_deformation(rng, scene, morph, config.control_points);
      std::vector<Vec2> gm(scene.size());
      std::vector<Mat2> gc(scene.size());
      for (std::size_t i = 0; i < scene.size(); ++i) {
        gm[i] = Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        gc[i] << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
      }
      const auto analytic = deformation_backward(params, scene, gm, gc);
      auto f = [&](std::span<const double> p) {
        const Scene s = apply_deformation(with_parameters(params, p), scene);
        double v = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          v += gm[i].dot(s.gaussians[i].mean) + (gc[i].array() * s.gaussians[i].covariance.array()).sum();
        }
        return v;
      };
      return std::make_pair(analytic, central_difference(f, flatten(params), kStep));
    }});
  }

  for (const SpectralMetric metric : {SpectralMetric::L1, SpectralMetric::Squared}) {
    batteries.push_back({metric == SpectralMetric::L1 ? "spectral_l1" : "spectral_squared", 1e-6, [&, metric](Rng& rng) {
      const int channels = rng.uniform(0.0, 1.0) < 0.5 ? 1 : 3;
      const Image rend = random_image(rng, w, h, channels, 0.0, 1.0);
      const Image gt = random_image(rng, w, h, channels, 0.0, 1.0);
      std::vector<double> weights(static_cast<std::size_t>(nbands));
      for (double& v : weights) v = rng.uniform(0.0, 1.0);
      const double mask = rng.uniform(0.0, 1.0);
      const auto analytic = adjoint_values(spectral_image_loss(rend, gt, basis, weights, mask, metric));
      auto f = [&](std::span<const double> x) {
        return spectral_image_loss(image_from(rend, x), gt, basis, weights, mask, metric).value;
      };
      return std::make_pair(analytic, central_difference(f, image_values(rend), kStep));
    }});
  }

  batteries.push_back({"pixel", 1e-6, [&](Rng& rng) {
    const int channels = rng.uniform(0.0, 1.0) < 0.5 ? 1 : 3;
    const Image rend = random_image(rng, w, h, channels, 0.01, 0.99);
    const Image gt = random_image(rng, w, h, channels, 0.0, 1.0);
    const double bce = config.losses.lambda_bce;
    const auto analytic = adjoint_values(pixel_image_loss(rend, gt, bce));
    auto f = [&](std::span<const double> x) { return pixel_image_loss(image_from(rend, x), gt, bce).value; };
    return std::make_pair(analytic, central_difference(f, image_values(rend), kStep));
  }});

  for (const bool morph : {false, true}) {
    for (const bool pixel_phase : {false, true}) {
      std::string name = std::string("total_") + (morph ? "morph" : "rigid") + (pixel_phase ? "_pixel" : "_spectral");
      batteries.push_back({name, config.gradcheck_tolerance, [&, morph, pixel_phase](Rng& rng) {
        const Scene scene = random_scene(rng, ngauss, 1);
        const Deformation truth = random_deformation(rng, scene, morph, config.control_points);
        Image target = render(apply_deformation(truth, scene), field, none);
        LossWeights lw = config.losses;
        lw.add_pixel_loss = 40;
        lw.arap_start_iter = 0;
        lw.lambda_spec_mask = rng.uniform(0.1, 1.0);
        AnnealConfig anneal = config.anneal;
        anneal.total_spectral_iters = 40;
        const TrackingProblem problem = make_problem(scene, std::move(target), grid, anneal, lw, none);
        const Deformation params = random_deformation(rng, scene, morph, config.control_points);
        const int t = pixel_phase ? 45 : 25;
        const auto analytic = total_loss(t, params, problem).gradient;
        auto f = [&](std::span<const double> x) { return total_loss(t, with_parameters(params, x), problem).report.total; };
        return std::make_pair(analytic, central_difference(f, flatten(params), kStep));
      }});
    }
  }

  GradCheckReport report;
  report.entries.resize(batteries.size());
  for (std::size_t b = 0; b < batteries.size(); ++b) {
    GradCheckEntry& entry = report.entries[b];
    entry.component = batteries[b].name;
    entry.tolerance = batteries[b].tolerance;
    entry.instances = config.gradcheck_instances;
    for (int i = 0; i < config.gradcheck_instances; ++i) {
      Rng rng(config.seed * 1000003ULL + b * 7919ULL + static_cast<std::uint64_t>(i));
      auto [analytic, numeric] = batteries[b].instance(rng);
      if (corrupt) corrupt(entry.component, analytic);
      double err = relative_error(analytic, numeric);
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
      entry.max_relative_error = std::max(entry.max_relative_error, err);
    }
  }
  return report;
}

}  // namespace spectrack
