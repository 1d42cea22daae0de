#include <doctest.h>

#include <cmath>
#include <limits>

#include "spectrack/anneal.hpp"

using namespace spectrack;

TEST_CASE("alpha holds during warm-up, ramps linearly, then clamps") {
  AnnealConfig c;
  c.num_bands = 8;
  c.total_spectral_iters = 1000;
  c.warmup_frac = 0.25;
  CHECK(alpha_at(c, 0) == 1.0);
  CHECK(alpha_at(c, 249) == 1.0);
  CHECK(alpha_at(c, 250) == 1.0);
  CHECK(alpha_at(c, 625) == doctest::Approx(4.5));
  CHECK(alpha_at(c, 1000) == 8.0);
  CHECK(alpha_at(c, 5000) == 8.0);
}

TEST_CASE("band weight boundary values") {
  CHECK(band_weight(0.0, 0) == 0.0);
  CHECK(band_weight(0.5, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(band_weight(1.0, 0) == 1.0);
  CHECK(band_weight(3.0, 3) == 0.0);
  CHECK(band_weight(3.25, 3) == doctest::Approx((1.0 - std::cos(kPi * 0.25)) / 2.0));
  CHECK(band_weight(10.0, 3) == 1.0);
  const auto w = band_weights(2.5, 4);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 1.0);
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(w[3] == 0.0);
}

TEST_CASE("only band 0 is active during warm-up") {
  AnnealConfig c;
  const auto s = anneal_state(c, 10);
  CHECK(s.band_weights[0] == 1.0);
  for (std::size_t k = 1; k < s.band_weights.size(); ++k) CHECK(s.band_weights[k] == 0.0);
}

TEST_CASE("invalid schedules are rejected") {
  AnnealConfig c;
  c.num_bands = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = AnnealConfig{};
  c.warmup_frac = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("phase-wrap frequency bound") {
  CHECK(max_safe_frequency(0.0) == std::numeric_limits<double>::infinity());
  CHECK(max_safe_frequency(0.5) == doctest::Approx(2.0 * kPi));
  CHECK_THROWS(max_safe_frequency(-1.0));
}

TEST_CASE("predicted index schedule grows linearly in t") {
  CHECK(predicted_index_schedule(0.5, 10) == doctest::Approx(10.0));
  CHECK(predicted_index_schedule(0.25, 3) == doctest::Approx(6.0));
  CHECK_THROWS(predicted_index_schedule(1.0, 1));
  CHECK_THROWS(predicted_index_schedule(0.0, 1));
}

TEST_CASE("max active omega follows the weights") {
  const FrequencyGrid g = build_frequency_grid(3, 3);
  CHECK(max_active_omega_norm(g, {0.0, 0.0, 0.0}) == 0.0);
  CHECK(max_active_omega_norm(g, {1.0, 0.0, 0.0}) == doctest::Approx(kDefaultPhaseScale * std::sqrt(2.0)));
  CHECK(max_active_omega_norm(g, {1.0, 1.0, 0.1}) == doctest::Approx(3 * kDefaultPhaseScale * std::sqrt(2.0)));
}
