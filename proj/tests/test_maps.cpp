#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "openrates/maps.hpp"

using namespace openrates;

TEST_CASE("rational parsing") {
  CHECK(parse_rational("1/3") == Rational(1, 3));
  CHECK(parse_rational("0.25") == Rational(1, 4));
  CHECK(parse_rational("2") == Rational(2));
  CHECK_THROWS(parse_rational("1/0"));
  CHECK(to_double(rational_from_double(0.1)) == 0.1);  // exact double round trip
}

TEST_CASE("step functions: indicators, products, integrals") {
  StepFunction one = StepFunction::constant(1);
  CHECK(one.integral() == Rational(1));
  IntervalList iv{{Rational(1, 4), Rational(1, 2)}, {Rational(3, 4), Rational(7, 8)}};
  StepFunction ind = StepFunction::indicator(iv);
  CHECK(ind.integral() == Rational(3, 8));
  CHECK(ind.value_at(Rational(1, 4)) == 1);  // right-continuous at edges
  CHECK(ind.value_at(Rational(1, 2)) == 0);
  StepFunction prod = multiply(ind, ind);
  CHECK(prod.integral() == ind.integral());
  CHECK(ind.integral(Rational(0), Rational(1, 2)) == Rational(1, 4));
}

TEST_CASE("interval normalization merges and clips") {
  IntervalList iv{{Rational(-1, 4), Rational(1, 8)},
                  {Rational(1, 8), Rational(1, 4)},
                  {Rational(1, 2), Rational(1, 2)}};
  auto norm = normalize_intervals(iv);
  REQUIRE(norm.size() == 1);
  CHECK(norm[0].first == 0);
  CHECK(norm[0].second == Rational(1, 4));
}

TEST_CASE("doubling map evaluation and periodic orbits") {
  IntervalMap T = IntervalMap::doubling();
  CHECK(T.eval(Rational(1, 3)) == Rational(2, 3));
  CHECK(T.eval(Rational(2, 3)) == Rational(1, 3));
  CHECK(T.detect_period_exact(Rational(0)) == 1);
  CHECK(T.detect_period_exact(Rational(1, 3)) == 2);
  CHECK(T.detect_period_exact(Rational(1, 7)) == 3);
  CHECK(!T.detect_period_exact(Rational(1, 10), 8).has_value());
  CHECK(T.detect_period(1.0 / 3.0, 8).value() == 2);
  // branch convention: right-continuous, x = 1 in the last branch
  CHECK(T.branch_at(Rational(1, 2)).b == Rational(-1));
  CHECK(T.eval(Rational(1)) == Rational(1));
}

TEST_CASE("map construction validation") {
  CHECK_THROWS(IntervalMap({Branch(0, Rational(1, 2), 2, 0)}));  // does not cover [0,1]
  // |slope| must exceed 1
  CHECK_THROWS(Branch(0, 1, Rational(1, 2), 0));
  auto T = IntervalMap::from_json(nlohmann::json{{"preset", "tent"}});
  CHECK(T.eval(Rational(3, 4)) == Rational(1, 2));
  nlohmann::json custom = {
      {"branches",
       {{{"lo", "0"}, {"hi", "1/2"}, {"a", 2}, {"b", 0}},
        {{"lo", "1/2"}, {"hi", "1"}, {"a", 2}, {"b", -1}}}}};
  CHECK(IntervalMap::from_json(custom).eval(Rational(1, 3)) == Rational(2, 3));
  CHECK_THROWS(IntervalMap::from_json(nlohmann::json{{"preset", "unknown"}}));
}

TEST_CASE("transfer operator preserves integrals and fixes Lebesgue") {
  IntervalMap T = IntervalMap::doubling();
  StepFunction one = StepFunction::constant(1);
  StepFunction p1 = T.transfer(one);
  CHECK(p1.values().size() == 1);
  CHECK(p1.value_at(Rational(1, 2)) == 1);
  // nu0(P f) = nu0(f) for a non-trivial step function
  StepFunction f = StepFunction::indicator({{Rational(1, 5), Rational(2, 3)}});
  CHECK(T.transfer(f).integral() == f.integral());
  // P(1_[0,1/2)) = 1/2 everywhere for the doubling map
  StepFunction half = T.transfer(StepFunction::indicator({{Rational(0), Rational(1, 2)}}));
  CHECK(half.values().size() == 1);
  CHECK(half.value_at(Rational(1, 4)) == Rational(1, 2));
}

TEST_CASE("exact invariant density") {
  CHECK(IntervalMap::doubling().invariant_density_exact().values().size() == 1);
  StepFunction tent_phi = IntervalMap::tent().invariant_density_exact();
  CHECK(tent_phi.integral() == Rational(1));
  CHECK(tent_phi.value_at(Rational(1, 3)) == 1);
}

TEST_CASE("holes: construction, merging, indicators") {
  Hole h = Hole::from_centers({Rational(1, 3)}, Rational(1, 8));
  CHECK(h.length() == Rational(1, 4));
  Hole clipped = Hole::from_centers({Rational(0)}, Rational(1, 16));
  CHECK(clipped.length() == Rational(1, 16));  // [−ε,ε) clipped to [0,ε)
  Hole merged = Hole::from_centers({Rational(1, 4), Rational(5, 16)}, Rational(1, 16));
  CHECK(merged.intervals.size() == 1);
  CHECK(h.complement_indicator().integral() == Rational(3, 4));
  CHECK(h.contains(1.0 / 3.0));
  CHECK(!h.contains(0.9));
  CHECK_THROWS(Hole::from_centers({Rational(1, 2)}, Rational(0)));
}

TEST_CASE("first-return pairs at periodic centers") {
  IntervalMap T = IntervalMap::doubling();
  // fixed point: immediate return, weight 1/|T'| = 1/2
  PiSet p0 = pi_set(T, {Rational(0)}, 8);
  REQUIRE(p0.pairs.size() == 1);
  CHECK(p0.pairs[0].k == 0);
  CHECK(p0.pairs[0].weight == Rational(1, 2));
  CHECK(theta_analytic(p0) == doctest::Approx(0.5));
  // period-2 point: return at k = 1, weight 1/|(T^2)'| = 1/4
  PiSet p1 = pi_set(T, {Rational(1, 3)}, 8);
  REQUIRE(p1.pairs.size() == 1);
  CHECK(p1.pairs[0].k == 1);
  CHECK(p1.pairs[0].weight == Rational(1, 4));
  CHECK(theta_analytic(p1) == doctest::Approx(0.75));
  // period-3 point
  CHECK(theta_analytic(pi_set(T, {Rational(1, 7)}, 8)) == doctest::Approx(0.875));
  // non-periodic center: empty set, theta = 1
  CHECK(pi_set(T, {Rational(1, 10)}, 8).pairs.empty());
  // both points of the 2-cycle: everything returns, theta = 0
  CHECK(theta_analytic(pi_set(T, {Rational(1, 3), Rational(2, 3)}, 8)) == doctest::Approx(0.0));
}
