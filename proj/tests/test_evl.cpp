#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "openrates/evl.hpp"
#include "openrates/hitting.hpp"

using namespace openrates;

TEST_CASE("distance observable and its level sets") {
  Observable obs{1.0 / 3.0};
  CHECK(obs.value(1.0 / 3.0) == 0.0);
  CHECK(obs.value(0.5) == doctest::Approx(-1.0 / 6.0));
  CHECK(obs.value(0.0) == doctest::Approx(-1.0 / 3.0));
  Hole level = obs.level_set(-0.01);
  CHECK(to_double(level.length()) == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("level scaling: n * mu0{X > z_n} = t") {
  IntervalMap T = IntervalMap::doubling();
  StepFunction phi0 = T.invariant_density_exact();
  Observable obs{1.0 / 3.0};
  LevelSequence seq = levels_for(1.0, {64, 256, 1024}, obs, phi0);
  REQUIRE(seq.z_values.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(seq.n_values[i] * seq.level_mass[i] == doctest::Approx(1.0).epsilon(1e-10));
    // interior center, flat density: mu{X > z} = 2|z|, so z_n = -t/(2n)
    CHECK(seq.z_values[i] == doctest::Approx(-0.5 / seq.n_values[i]).epsilon(1e-10));
  }
  // boundary center: one-sided level sets are twice as wide
  Observable edge{0.0};
  LevelSequence eseq = levels_for(1.0, {64}, edge, phi0);
  CHECK(eseq.z_values[0] == doctest::Approx(-1.0 / 64).epsilon(1e-10));
}

TEST_CASE("level construction rejects impossible requests") {
  IntervalMap T = IntervalMap::doubling();
  StepFunction phi0 = T.invariant_density_exact();
  Observable obs{0.5};
  CHECK_THROWS(levels_for(0.0, {64}, obs, phi0));
  CHECK_THROWS(levels_for(-1.0, {64}, obs, phi0));
  CHECK_THROWS(levels_for(3.0, {1}, obs, phi0));  // needs mu0-mass 3 > 1
}

TEST_CASE("predicted law is exp(-t theta)") {
  CHECK(max_law_predicted(1.0, 0.75) == doctest::Approx(std::exp(-0.75)));
  CHECK(max_law_predicted(0.5, 1.0) == doctest::Approx(std::exp(-0.5)));
  CHECK_THROWS(max_law_predicted(-1.0, 0.5));
  CHECK_THROWS(max_law_predicted(1.0, 1.5));
}

TEST_CASE("max-law sampling is the hitting-time survival of the level set") {
  IntervalMap T = IntervalMap::doubling();
  StepFunction phi0 = T.invariant_density_exact();
  Observable obs{1.0 / 3.0};
  LevelSequence seq = levels_for(1.0, {64}, obs, phi0);
  auto pts = max_law_empirical(T, obs, seq, 50000, 99);
  REQUIRE(pts.size() == 1);
  // oracle: exact survival of the level-set hole at n = 64
  Hole level = obs.level_set(seq.z_values[0]);
  SurvivalCurve ex = survival_exact(T, level, 64, MeasureKind::nu0);
  CHECK(std::abs(pts[0].empirical - ex.values[64]) <= 4.0 * pts[0].stderr_ + 1e-12);
  // determinism
  auto pts2 = max_law_empirical(T, obs, seq, 50000, 99);
  CHECK(pts[0].empirical == pts2[0].empirical);
}

TEST_CASE("empirical law approaches exp(-t theta) as n grows") {
  IntervalMap T = IntervalMap::doubling();
  StepFunction phi0 = T.invariant_density_exact();
  Observable obs{1.0 / 3.0};
  LevelSequence seq = levels_for(1.0, {2048}, obs, phi0);
  auto pts = max_law_empirical(T, obs, seq, 60000, 1234);
  double target = max_law_predicted(1.0, 0.75);
  // finite-n bias is O(1/n) here; allow it on top of the sampling band
  CHECK(std::abs(pts[0].empirical - target) <= 4.0 * pts[0].stderr_ + 0.01);
}
