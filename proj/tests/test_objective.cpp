#include <doctest.h>

#include <cmath>

#include "spectrack/objective.hpp"
#include "test_support.hpp"

using namespace spectrack;
using spectrack::testing::Rng;

namespace {

double directional(const std::vector<double>& grad, const std::vector<double>& dir) {
  double s = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) s += grad[i] * dir[i];
  return s;
}

// Perturbs intensity and opacity of `img` along `dir` (intensity first).
Image perturbed(const Image& img, const std::vector<double>& dir, double h) {
  Image out = img;
  const std::size_t n = out.intensity().size();
  for (std::size_t i = 0; i < n; ++i) out.intensity()[i] += h * dir[i];
  for (std::size_t p = 0; p < out.pixel_count(); ++p) out.opacity()[p] += h * dir[n + p];
  return out;
}

std::vector<double> stacked_adjoints(const ImageLoss& l) {
  std::vector<double> out(l.adjoint_intensity.intensity().begin(), l.adjoint_intensity.intensity().end());
  out.insert(out.end(), l.adjoint_opacity.intensity().begin(), l.adjoint_opacity.intensity().end());
  return out;
}

}  // namespace

TEST_CASE("identical images give zero spectral loss and zero adjoints") {
  Rng rng(40);
  const Image img = testing::random_image(rng, 8, 6, 3);
  const CoordinateField field = make_coordinate_field(8, 6);
  const FrequencyGrid grid = build_frequency_grid(3, 3);
  for (auto metric : {SpectralMetric::L1, SpectralMetric::Squared}) {
    const ImageLoss l = spectral_image_loss(img, img, grid, field, std::vector<double>{1, 1, 1}, 0.5, metric);
    CHECK(l.value == 0.0);
    for (double v : stacked_adjoints(l)) CHECK(v == 0.0);
  }
}

TEST_CASE("all-zero band weights give exactly zero") {
  Rng rng(41);
  const Image a = testing::random_image(rng, 8, 6);
  const Image b = testing::random_image(rng, 8, 6);
  const ImageLoss l = spectral_image_loss(a, b, build_frequency_grid(3, 3), make_coordinate_field(8, 6),
                                          std::vector<double>{0, 0, 0}, 0.3, SpectralMetric::L1);
  CHECK(l.value == 0.0);
  for (double v : stacked_adjoints(l)) CHECK(v == 0.0);
}

TEST_CASE("squared spectral loss of a circular shift equals the closed form") {
  Rng rng(42);
  for (int trial = 0; trial < 6; ++trial) {
    const int w = 16, h = 12;
    const CoordinateField field = make_coordinate_field(w, h);
    const Image gt = testing::random_image(rng, w, h);
    const int sx = rng.integer(-5, 5), sy = rng.integer(-5, 5);
    const Image rend = circular_shift(gt, sx, sy);
    // phase_scale pi makes every grid frequency a DFT frequency of this image.
    const FrequencyGrid grid = build_frequency_grid(3, 3, kPi);
    const std::vector<double> w_k{1.0, 0.6, 0.25};
    const double mask = 0.4;
    const ImageLoss l = spectral_image_loss(rend, gt, grid, field, w_k, mask, SpectralMetric::Squared);
    const Vec2 d(2.0 * sx / w, 2.0 * sy / h);
    const std::vector<double> gi(gt.intensity().begin(), gt.intensity().end());
    const std::vector<double> go(gt.opacity().begin(), gt.opacity().end());
    double expected = 0.0;
    for (std::size_t f = 0; f < grid.size(); ++f) {
      const auto& e = grid.entries[f];
      const double mi = std::abs(testing::naive_moment(gi, field, e.omega));
      const double mo = std::abs(testing::naive_moment(go, field, e.omega));
      expected += grid.multiplicity(f) * w_k[e.band] * 2.0 *
                  (closed_form_shift_loss(mi, e.omega, d) + mask * closed_form_shift_loss(mo, e.omega, d));
    }
    CHECK(l.value == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("spectral adjoints match directional finite differences") {
  Rng rng(43);
  const CoordinateField field = make_coordinate_field(9, 7);
  const MomentBasis basis(build_frequency_grid(3, 3), field);
  for (auto metric : {SpectralMetric::L1, SpectralMetric::Squared}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Image a = testing::random_image(rng, 9, 7, 3);
      const Image b = testing::random_image(rng, 9, 7, 3);
      const std::vector<double> w_k{rng.uniform(), rng.uniform(), rng.uniform()};
      const ImageLoss l = spectral_image_loss(a, b, basis, w_k, 0.3, metric);
      std::vector<double> dir(9 * 7 * 4);
      for (double& v : dir) v = rng.uniform(-1, 1);
      const double fd = testing::central_diff(
          [&](double h) { return spectral_image_loss(perturbed(a, dir, h), b, basis, w_k, 0.3, metric).value; });
      CHECK(directional(stacked_adjoints(l), dir) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("per-band contributions add up to the loss") {
  Rng rng(44);
  const Image a = testing::random_image(rng, 8, 8);
  const Image b = testing::random_image(rng, 8, 8);
  const ImageLoss l = spectral_image_loss(a, b, build_frequency_grid(4, 4), make_coordinate_field(8, 8),
                                          std::vector<double>{1, 0.5, 0.2, 0}, 0.3, SpectralMetric::L1);
  REQUIRE(l.per_band.size() == 4);
  CHECK(l.per_band[3] == 0.0);
  CHECK(l.per_band[0] + l.per_band[1] + l.per_band[2] == doctest::Approx(l.value).epsilon(1e-14));
}

TEST_CASE("BCE at maximum uncertainty is ln 2 per pixel") {
  Rng rng(45);
  Image rend(6, 5, 1, true), gt(6, 5, 1, true);
  for (double& v : rend.opacity()) v = 0.5;
  for (double& v : gt.opacity()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const ImageLoss l = pixel_image_loss(rend, gt, 1.0);
  CHECK(l.bce == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("equal images leave only the BCE entropy floor") {
  Rng rng(46);
  const Image img = testing::random_image(rng, 7, 5, 3);
  const double lambda = 0.3;
  const ImageLoss l = pixel_image_loss(img, img, lambda);
  double entropy = 0.0;
  for (double o : img.opacity()) entropy -= o * std::log(o) + (1.0 - o) * std::log(1.0 - o);
  entropy /= static_cast<double>(img.pixel_count());
  CHECK(l.bce == doctest::Approx(entropy).epsilon(1e-13));
  CHECK(l.value - lambda * l.bce == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("pixel adjoints match directional finite differences") {
  Rng rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    const Image a = testing::random_image(rng, 8, 6, 3);
    const Image b = testing::random_image(rng, 8, 6, 3);
    const ImageLoss l = pixel_image_loss(a, b, 0.2);
    std::vector<double> dir(8 * 6 * 4);
    for (double& v : dir) v = rng.uniform(-1, 1);
    const double fd = testing::central_diff([&](double h) { return pixel_image_loss(perturbed(a, dir, h), b, 0.2).value; });
    CHECK(directional(stacked_adjoints(l), dir) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("clamped rendered opacity has zero BCE gradient") {
  Image rend(2, 1, 1, true), gt(2, 1, 1, true);
  rend.opacity()[0] = 0.0;
  rend.opacity()[1] = 0.5;
  gt.opacity()[0] = 1.0;
  gt.opacity()[1] = 1.0;
  const ImageLoss l = pixel_image_loss(rend, gt, 1.0);
  CHECK(l.adjoint_opacity.intensity()[0] == 0.0);
  CHECK(l.adjoint_opacity.intensity()[1] != 0.0);
  CHECK(l.bce == doctest::Approx((-std::log(kBceClamp) - std::log(0.5)) / 2.0));
}

TEST_CASE("shape mismatches are reported") {
  const Image a(4, 4, 1, true), b(5, 4, 1, true), c(4, 4, 1, false);
  CHECK_THROWS_AS(pixel_image_loss(a, b, 0.1), ShapeError);
  CHECK_THROWS_AS(pixel_image_loss(a, c, 0.1), ShapeError);
  CHECK_THROWS_AS(spectral_image_loss(a, b, build_frequency_grid(1, 1), make_coordinate_field(4, 4),
                                      std::vector<double>{1}, 0.0, SpectralMetric::L1),
                  ShapeError);
}

namespace {

TrackingProblem small_problem(Rng& rng, const Deformation& truth, LossWeights weights) {
  Scene scene = testing::random_scene(rng, 5);
  Image target = render(apply_deformation(truth, scene), make_coordinate_field(12, 10), std::nullopt);
  AnnealConfig anneal;
  anneal.num_bands = 3;
  anneal.total_spectral_iters = weights.add_pixel_loss;
  return make_problem(scene, target, build_frequency_grid(3, 3), anneal, weights, std::nullopt);
}

}  // namespace

TEST_CASE("phase flips exactly at add_pixel_loss") {
  Rng rng(48);
  LossWeights w;
  w.add_pixel_loss = 20;
  const TrackingProblem p = small_problem(rng, RigidParams{}, w);
  CHECK(total_loss(19, RigidParams{}, p).report.phase == Phase::Spectral);
  CHECK(total_loss(20, RigidParams{}, p).report.phase == Phase::Pixel);
  CHECK_THROWS(total_loss(-1, RigidParams{}, p));
}

TEST_CASE("aligned parameters leave zero image MSE in the pixel phase") {
  Rng rng(49);
  LossWeights w;
  w.add_pixel_loss = 1;
  w.lambda_bce = 0.0;
  const TrackingProblem p = small_problem(rng, RigidParams{}, w);
  const LossEvaluation e = total_loss(5, RigidParams{}, p);
  CHECK(e.report.image_term == 0.0);
}

TEST_CASE("total is the lambda-weighted sum and ARAP waits for its start iteration") {
  Rng rng(50);
  LossWeights w;
  w.add_pixel_loss = 10;
  w.arap_start_iter = 5;
  w.lambda_image = 2.5;
  w.lambda_arap = 0.7;
  const TrackingProblem p = small_problem(rng, RigidParams{}, w);
  MorphField f = make_morph_field(p.canonical, select_control_points(p.canonical, 4, 1));
  for (auto& o : f.offsets) o = Vec2(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  for (int t : {0, 4, 5, 9, 10, 14}) {
    const LossReport r = total_loss(t, f, p).report;
    CHECK(r.total == doctest::Approx(w.lambda_image * r.image_term + w.lambda_arap * r.arap_term).epsilon(1e-12));
    if (t < 5) CHECK(r.arap_term == 0.0);
    if (t >= 5) CHECK(r.arap_term > 0.0);
  }
  // Rigid parameters never carry ARAP.
  CHECK(total_loss(9, RigidParams{Vec2(0.1, 0.0), 0.2}, p).report.arap_term == 0.0);
}

TEST_CASE("scaling both lambdas scales the gradient exactly") {
  Rng rng(51);
  LossWeights w;
  w.add_pixel_loss = 10;
  w.arap_start_iter = 0;
  TrackingProblem p = small_problem(rng, RigidParams{}, w);
  MorphField f = make_morph_field(p.canonical, select_control_points(p.canonical, 4, 1));
  for (auto& o : f.offsets) o = Vec2(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  for (int t : {3, 12}) {
    const auto g1 = total_loss(t, f, p).gradient;
    p.weights.lambda_image = 4.0;
    p.weights.lambda_arap = 4.0;
    const auto g4 = total_loss(t, f, p).gradient;
    p.weights.lambda_image = 1.0;
    p.weights.lambda_arap = 1.0;
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g4[i] == doctest::Approx(4.0 * g1[i]).epsilon(1e-14));
  }
}
