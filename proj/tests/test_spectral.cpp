#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "spectrack/spectral.hpp"
#include "test_support.hpp"

using namespace spectrack;
using spectrack::testing::Rng;

TEST_CASE("band assignment in both modes") {
  CHECK(band_of(0, 0, BandingMode::LinearFrequency) == 0);
  CHECK(band_of(1, -1, BandingMode::LinearFrequency) == 0);
  CHECK(band_of(3, 2, BandingMode::LinearFrequency) == 2);
  CHECK(band_of(0, 0, BandingMode::LogIndex) == 0);
  CHECK(band_of(1, 0, BandingMode::LogIndex) == 0);
  CHECK(band_of(2, 0, BandingMode::LogIndex) == 1);
  CHECK(band_of(3, 0, BandingMode::LogIndex) == 2);
  CHECK(band_of(4, -4, BandingMode::LogIndex) == 2);
  CHECK(band_of(5, 0, BandingMode::LogIndex) == 3);
  CHECK(band_of(32, 0, BandingMode::LogIndex) == 5);
  CHECK(band_of(33, 0, BandingMode::LogIndex) == 6);
}

TEST_CASE("grid is conjugate reduced and complete") {
  const FrequencyGrid g = build_frequency_grid(3, 3);
  std::set<std::pair<int, int>> seen;
  for (const auto& e : g.entries) {
    CHECK((e.kx > 0 || (e.kx == 0 && e.ky >= 0)));
    CHECK(seen.insert({e.kx, e.ky}).second);
    CHECK(seen.count({-e.kx, -e.ky}) == ((e.kx == 0 && e.ky == 0) ? 1u : 0u));
    CHECK(e.omega.x() == doctest::Approx(kDefaultPhaseScale * e.kx));
  }
  // (2*3+1)^2 = 49 index pairs, 24 conjugate pairs plus DC.
  CHECK(g.size() == 25);
  double full = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) full += g.multiplicity(i);
  CHECK(full == 49.0);
}

TEST_CASE("entries are ordered by band") {
  const FrequencyGrid g = build_frequency_grid(4, 4);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g.entries[i - 1].band <= g.entries[i].band);
}

TEST_CASE("an empty band is reported by number") {
  try {
    build_frequency_grid(4, 2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("band 2") != std::string::npos);
  }
  CHECK_NOTHROW(build_frequency_grid(6, required_max_index(6, BandingMode::LogIndex), kDefaultPhaseScale,
                                     BandingMode::LogIndex));
}

TEST_CASE("axis grid keeps only ky = 0") {
  const FrequencyGrid g = build_frequency_grid(5, 5, kDefaultPhaseScale, BandingMode::LinearFrequency, GridAxes::AxisX);
  CHECK(g.size() == 6);
  for (const auto& e : g.entries) CHECK(e.ky == 0);
}

TEST_CASE("moments match a brute-force sum") {
  Rng rng(30);
  for (int trial = 0; trial < 5; ++trial) {
    const int w = rng.integer(3, 12), h = rng.integer(3, 12);
    const Image img = testing::random_image(rng, w, h, 1, false);
    const CoordinateField field = make_coordinate_field(w, h);
    const FrequencyGrid grid = build_frequency_grid(4, 4, rng.uniform(0.5, 3.0));
    const auto m = compute_moments(img, grid, field);
    const std::vector<double> values(img.intensity().begin(), img.intensity().end());
    for (std::size_t f = 0; f < grid.size(); ++f) {
      const auto ref = testing::naive_moment(values, field, grid.entries[f].omega);
      CHECK(std::abs(m.values[f] - ref) < 1e-13);
    }
  }
}

TEST_CASE("DC moment is the pixel mean") {
  Rng rng(31);
  const Image img = testing::random_image(rng, 9, 7, 1, false);
  const FrequencyGrid grid = build_frequency_grid(1, 1);
  const auto m = compute_moments(img, grid, make_coordinate_field(9, 7));
  double mean = 0.0;
  for (double v : img.intensity()) mean += v;
  mean /= 63.0;
  CHECK(m.values[0].real() == doctest::Approx(mean).epsilon(1e-14));
  CHECK(m.values[0].imag() == 0.0);
}

TEST_CASE("moments_adjoint is the transpose under the multiplicity pairing") {
  Rng rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = rng.integer(4, 16), h = rng.integer(4, 16);
    const CoordinateField field = make_coordinate_field(w, h);
    const FrequencyGrid grid = build_frequency_grid(3, 3);
    std::vector<Complex> weights(grid.size());
    for (auto& z : weights) z = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Image j = testing::random_image(rng, w, h, 1, false);
    const Image adj = moments_adjoint(grid, field, weights);
    double lhs = 0.0;
    for (std::size_t p = 0; p < j.pixel_count(); ++p) lhs += adj.intensity()[p] * j.intensity()[p];
    const auto m = compute_moments(j, grid, field);
    double rhs = 0.0;
    for (std::size_t f = 0; f < grid.size(); ++f) rhs += grid.multiplicity(f) * (weights[f] * m.values[f]).real();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("closed-form shift loss and gradient") {
  const Vec2 omega(1.3, -0.4);
  CHECK(closed_form_shift_loss(2.0, omega, Vec2::Zero()) == 0.0);
  // omega . d = pi gives the maximum 2 |M|^2.
  const Vec2 d = omega * (kPi / omega.squaredNorm());
  CHECK(closed_form_shift_loss(2.0, omega, d) == doctest::Approx(8.0));
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec2 dd(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec2 g = closed_form_shift_gradient(1.7, omega, dd);
    for (int axis = 0; axis < 2; ++axis) {
      const double fd = testing::central_diff([&](double h) {
        Vec2 p = dd;
        p[axis] += h;
        return closed_form_shift_loss(1.7, omega, p);
      });
      CHECK(g[axis] == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("dft2 matches a direct double sum") {
  Rng rng(34);
  const int w = 5, h = 4;
  const Image img = testing::random_image(rng, w, h, 1, false);
  const auto X = dft2(img.intensity(), w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      Complex acc(0, 0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          acc += img.at(x, y) * std::polar(1.0, -2.0 * kPi * (double(u) * x / w + double(v) * y / h));
      CHECK(std::abs(X[v * w + u] - acc) < 1e-12);
    }
  }
}

TEST_CASE("Parseval duality on random pairs") {
  Rng rng(35);
  for (int trial = 0; trial < 5; ++trial) {
    const int w = rng.integer(2, 20), h = rng.integer(2, 20);
    const Image a = testing::random_image(rng, w, h, 3, false);
    const Image b = testing::random_image(rng, w, h, 3, false);
    double direct = 0.0;
    for (std::size_t i = 0; i < a.intensity().size(); ++i) {
      direct += (a.intensity()[i] - b.intensity()[i]) * (a.intensity()[i] - b.intensity()[i]);
    }
    CHECK(spatial_l2_via_spectrum(a, b) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("circular shift wraps and satisfies the shift theorem") {
  Rng rng(36);
  const Image img = testing::random_image(rng, 6, 5, 1, true);
  const Image s = circular_shift(img, 2, -1);
  CHECK(s.at(2, 0) == img.at(0, 1));
  CHECK(s.at(0, 4) == img.at(4, 0));
  CHECK(s.opacity()[0 * 6 + 2] == img.opacity()[1 * 6 + 0]);
  CHECK(circular_shift_theorem_check(img, 2, -1) < 1e-12);
  CHECK(circular_shift_theorem_check(img, 13, 7) < 1e-12);
}

TEST_CASE("moment CSV has a header and one row per entry") {
  Rng rng(37);
  const Image img = testing::random_image(rng, 6, 6, 1, false);
  const FrequencyGrid grid = build_frequency_grid(2, 2);
  const auto m = compute_moments(img, grid, make_coordinate_field(6, 6));
  const auto path = std::filesystem::temp_directory_path() / "spectrack_moments.csv";
  write_moments_csv(m, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "kx,ky,band,re,im");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(grid.size()));
  std::filesystem::remove(path);
}
