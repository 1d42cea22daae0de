#include "spectrack/objective.hpp"

#include <algorithm>
#include <cmath>

namespace spectrack {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

// Accumulates one spectral term (intensity channel or mask) into `loss`.
// Returns the adjoint image values for that term.
std::vector<double> spectral_term(std::span<const double> rend, std::span<const double> gt,
                                  const MomentBasis& basis, std::span<const double> band_weights,
                                  std::span<const char> active, double scale, SpectralMetric metric,
                                  ImageLoss& loss) {
  const FrequencyGrid& grid = basis.grid();
  const auto m_rend = basis.moments(rend, active);
  const auto m_gt = basis.moments(gt, active);
  std::vector<Complex> weights(grid.size(), Complex(0.0, 0.0));
  for (std::size_t f = 0; f < grid.size(); ++f) {
    if (!active[f]) continue;
    const int band = grid.entries[f].band;
    const double w = scale * band_weights[band];
    const Complex delta = m_rend[f] - m_gt[f];
    double term = 0.0;
    if (metric == SpectralMetric::L1) {
      term = std::abs(delta.real()) + std::abs(delta.imag());
      weights[f] = w * Complex(sign(delta.real()), -sign(delta.imag()));
    } else {
      term = std::norm(delta);
      weights[f] = w * 2.0 * std::conj(delta);
    }
    const double contribution = grid.multiplicity(f) * w * term;
    loss.value += contribution;
    loss.per_band[band] += contribution;
  }
  return basis.adjoint(weights);
}

}  // namespace

const char* to_string(Phase phase) { return phase == Phase::Spectral ? "spectral" : "pixel"; }

ImageLoss spectral_image_loss(const Image& rend, const Image& gt, const MomentBasis& basis,
                              std::span<const double> band_weights, double lambda_spec_mask,
                              SpectralMetric metric) {
  if (!rend.same_shape(gt)) throw ShapeError("spectral_image_loss: rendered and target shapes differ");
  if (rend.width() != basis.width() || rend.height() != basis.height()) {
    throw ShapeError("spectral_image_loss: images do not match the moment basis");
  }
  const FrequencyGrid& grid = basis.grid();
  if (band_weights.size() < static_cast<std::size_t>(grid.num_bands)) {
    throw ShapeError("spectral_image_loss: fewer band weights than bands");
  }
  const bool use_mask = lambda_spec_mask != 0.0;
  if (use_mask && (!rend.has_opacity() || !gt.has_opacity())) {
    throw ShapeError("spectral_image_loss: mask term needs opacity channels");
  }

  ImageLoss loss;
  loss.per_band.assign(static_cast<std::size_t>(grid.num_bands), 0.0);
  loss.adjoint_intensity = Image(rend.width(), rend.height(), rend.channels());
  loss.adjoint_opacity = Image(rend.width(), rend.height());

  std::vector<char> active(grid.size(), 0);
  bool any = false;
  for (std::size_t f = 0; f < grid.size(); ++f) {
    active[f] = band_weights[grid.entries[f].band] > 0.0 ? 1 : 0;
    any = any || active[f];
  }
  if (!any) return loss;

  auto adj_i = loss.adjoint_intensity.intensity();
  for (int c = 0; c < rend.channels(); ++c) {
    const auto r = rend.channel(c);
    const auto g = gt.channel(c);
    const auto adj = spectral_term(r, g, basis, band_weights, active, 1.0, metric, loss);
    for (std::size_t p = 0; p < adj.size(); ++p) adj_i[p * rend.channels() + c] = adj[p];
  }
  if (use_mask) {
    const auto adj = spectral_term(rend.opacity(), gt.opacity(), basis, band_weights, active,
                                   lambda_spec_mask, metric, loss);
    std::copy(adj.begin(), adj.end(), loss.adjoint_opacity.intensity().begin());
  }
  return loss;
}

ImageLoss spectral_image_loss(const Image& rend, const Image& gt, const FrequencyGrid& grid,
                              const CoordinateField& field, std::span<const double> band_weights,
                              double lambda_spec_mask, SpectralMetric metric) {
  return spectral_image_loss(rend, gt, MomentBasis(grid, field), band_weights, lambda_spec_mask, metric);
}

ImageLoss pixel_image_loss(const Image& rend, const Image& gt, double lambda_bce) {
  if (!rend.same_shape(gt)) throw ShapeError("pixel_image_loss: rendered and target shapes differ");
  if (!rend.has_opacity() || !gt.has_opacity()) throw ShapeError("pixel_image_loss: opacity channels required");

  const int channels = rend.channels();
  const std::size_t pixels = rend.pixel_count();
  const double inv_n = 1.0 / static_cast<double>(pixels * channels);
  const double inv_p = 1.0 / static_cast<double>(pixels);

  ImageLoss loss;
  loss.adjoint_intensity = Image(rend.width(), rend.height(), channels);
  loss.adjoint_opacity = Image(rend.width(), rend.height());
  auto adj_i = loss.adjoint_intensity.intensity();
  auto adj_o = loss.adjoint_opacity.intensity();
  const auto ir = rend.intensity();
  const auto ig = gt.intensity();
  const auto orr = rend.opacity();
  const auto og = gt.opacity();

  double plain = 0.0, masked = 0.0, bce = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      const double d = ir[i] - ig[i];
      const double e = ir[i] * orr[p] - ig[i] * og[p];
      plain += d * d;
      masked += e * e;
      adj_i[i] = 2.0 * inv_n * (d + e * orr[p]);
      adj_o[p] += 2.0 * inv_n * e * ir[i];
    }
    const double o = std::clamp(orr[p], kBceClamp, 1.0 - kBceClamp);
    bce -= og[p] * std::log(o) + (1.0 - og[p]) * std::log1p(-o);
    if (orr[p] > kBceClamp && orr[p] < 1.0 - kBceClamp) {
      adj_o[p] += lambda_bce * inv_p * (-og[p] / o + (1.0 - og[p]) / (1.0 - o));
    }
  }
  loss.bce = bce * inv_p;
  loss.value = plain * inv_n + masked * inv_n + lambda_bce * loss.bce;
  return loss;
}

TrackingProblem make_problem(Scene canonical, Image target, const FrequencyGrid& grid,
                             const AnnealConfig& anneal, const LossWeights& weights, Cutoff cutoff) {
  validate(anneal);
  if (grid.num_bands != anneal.num_bands) {
    throw ConfigError("frequency grid has " + std::to_string(grid.num_bands) + " bands but num_bands is " +
                      std::to_string(anneal.num_bands));
  }
  if (!target.has_opacity()) throw ShapeError("target image needs an opacity (mask) channel");
  if (target.channels() != canonical.channels) throw ShapeError("target and scene channel counts differ");
  TrackingProblem problem;
  problem.field = make_coordinate_field(target.width(), target.height());
  problem.basis = MomentBasis(grid, problem.field);
  problem.canonical = std::move(canonical);
  problem.target = std::move(target);
  problem.anneal = anneal;
  problem.weights = weights;
  problem.cutoff = cutoff;
  return problem;
}

LossEvaluation total_loss(int t, const Deformation& params, const TrackingProblem& problem) {
  if (t < 0) throw std::invalid_argument("total_loss: iteration must be non-negative");
  const LossWeights& lw = problem.weights;
  const Scene deformed = apply_deformation(params, problem.canonical);
  const Image rend = render(deformed, problem.field, problem.cutoff);

  LossEvaluation eval;
  LossReport& report = eval.report;
  report.phase = t < lw.add_pixel_loss ? Phase::Spectral : Phase::Pixel;

  ImageLoss image;
  if (report.phase == Phase::Spectral) {
    const auto weights = band_weights(alpha_at(problem.anneal, t), problem.anneal.num_bands);
    image = spectral_image_loss(rend, problem.target, problem.basis, weights, lw.lambda_spec_mask,
                                lw.spectral_metric);
    report.per_band_contribution = image.per_band;
  } else {
    image = pixel_image_loss(rend, problem.target, lw.lambda_bce);
  }
  report.image_term = image.value;

  const auto prim = render_backward(deformed, problem.field, image.adjoint_intensity, image.adjoint_opacity,
                                    problem.cutoff);
  std::vector<Vec2> mean_grads(prim.size());
  std::vector<Mat2> cov_grads(prim.size());
  for (std::size_t i = 0; i < prim.size(); ++i) {
    mean_grads[i] = prim[i].mean;
    cov_grads[i] = prim[i].covariance;
  }
  eval.gradient = deformation_backward(params, problem.canonical, mean_grads, cov_grads);
  for (double& g : eval.gradient) g *= lw.lambda_image;

  if (const auto* morph = std::get_if<MorphField>(&params); morph && t >= lw.arap_start_iter) {
    const ArapResult arap = arap_energy(*morph);
    report.arap_term = arap.energy;
    for (std::size_t j = 0; j < morph->size(); ++j) {
      eval.gradient[3 * j] += lw.lambda_arap * arap.offset_gradient[j].x();
      eval.gradient[3 * j + 1] += lw.lambda_arap * arap.offset_gradient[j].y();
    }
  }
  report.total = lw.lambda_image * report.image_term + lw.lambda_arap * report.arap_term;
  return eval;
}

}  // namespace spectrack
