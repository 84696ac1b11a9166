#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "openrates/transfer.hpp"

using namespace openrates;

TEST_CASE("aligned grids land on the lcm lattice") {
  IntervalMap T = IntervalMap::doubling();
  Hole h = Hole::from_centers({Rational(1, 3)}, Rational(1, 256));
  UlamGrid g = UlamGrid::aligned(T, h);
  CHECK(g.m() == 768);
  CHECK(g.locate(Rational(1, 3)) == 256);
  CHECK(g.locate(Rational(1)) == 767);
  CHECK(g.width(0) == Rational(1, 768));
}

TEST_CASE("ulam matrix of the doubling map is column-stochastic") {
  IntervalMap T = IntervalMap::doubling();
  UlamGrid g = UlamGrid::uniform(8);
  TransferMatrix M = assemble_ulam(T, g);
  for (long j = 0; j < M.m; ++j) {
    double s = 0.0;
    for (auto& [i, v] : M.cols[j]) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  }
  // total mass preserved
  std::vector<double> x(8, 0.125);
  CHECK(detail::sum(M.apply(x)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("markov-exact assembly matches the generic one on aligned grids") {
  IntervalMap T = IntervalMap::doubling();
  Hole h = Hole::from_centers({Rational(1, 3)}, Rational(1, 64));
  UlamGrid g = UlamGrid::aligned(T, h);
  TransferMatrix a = assemble_ulam(T, g);
  TransferMatrix b = assemble_markov_exact(T, g);
  REQUIRE(a.m == b.m);
  for (long j = 0; j < a.m; ++j) {
    REQUIRE(a.cols[j].size() == b.cols[j].size());
    for (size_t k = 0; k < a.cols[j].size(); ++k) {
      CHECK(a.cols[j][k].first == b.cols[j][k].first);
      CHECK(a.cols[j][k].second == doctest::Approx(b.cols[j][k].second).epsilon(1e-15));
    }
  }
}

TEST_CASE("open operator scales columns by the surviving fraction") {
  IntervalMap T = IntervalMap::doubling();
  Hole h = Hole::from_intervals({{Rational(0), Rational(1, 2)}});
  UlamGrid g = UlamGrid::uniform(2);
  TransferMatrix open = open_operator(assemble_ulam(T, g), h, g);
  // column 0 is inside the hole: fully removed
  double c0 = 0.0, c1 = 0.0;
  for (auto& [i, v] : open.cols[0]) c0 += v;
  for (auto& [i, v] : open.cols[1]) c1 += v;
  CHECK(c0 == 0.0);
  CHECK(c1 == doctest::Approx(1.0));
}

TEST_CASE("leading triple of the closed operator") {
  IntervalMap T = IntervalMap::doubling();
  TransferMatrix M = assemble_ulam(T, UlamGrid::uniform(16));
  SpectralTriple t = leading_triple(M);
  CHECK(t.lambda == doctest::Approx(1.0).epsilon(1e-12));
  for (double p : t.phi) CHECK(p == doctest::Approx(1.0 / 16).epsilon(1e-10));
  // nu is the flat left eigenvector, normalized by nu(phi) = 1
  for (double n : t.nu) CHECK(n == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(t.residual < 1e-12);
}

TEST_CASE("hole [0,1/2): lambda = 1/2 and escape rate log 2") {
  IntervalMap T = IntervalMap::doubling();
  Hole h = Hole::from_intervals({{Rational(0), Rational(1, 2)}});
  UlamGrid g = UlamGrid::uniform(4);
  TransferMatrix open = open_operator(assemble_ulam(T, g), h, g);
  SpectralTriple t = leading_triple(open);
  CHECK(t.lambda == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(escape_rate(t) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("small hole: 1 - lambda is near theta * mu0(hole)") {
  IntervalMap T = IntervalMap::doubling();
  Hole h = Hole::from_centers({Rational(1, 3)}, Rational(1, 1024));
  UlamGrid g = UlamGrid::aligned(T, h);
  SpectralTriple t = leading_triple(open_operator(assemble_ulam(T, g), h, g));
  double delta = to_double(h.length());
  CHECK((1.0 - t.lambda) / delta == doctest::Approx(0.75).epsilon(0.02));
  CHECK(t.gap > 0.05);
}

TEST_CASE("degenerate and reducible supports are reported") {
  // full hole: zero operator
  IntervalMap T = IntervalMap::doubling();
  Hole h = Hole::from_intervals({{Rational(0), Rational(1)}});
  UlamGrid g = UlamGrid::uniform(2);
  SpectralTriple t = leading_triple(open_operator(assemble_ulam(T, g), h, g));
  CHECK(t.degenerate);
  CHECK(t.lambda == 0.0);
  // two disjoint closed cycles cannot have a unique leading triple
  TransferMatrix M;
  M.m = 4;
  M.kind = TransferMatrix::Kind::closed;
  M.widths = {0.25, 0.25, 0.25, 0.25};
  M.cols = {{{1, 1.0}}, {{0, 1.0}}, {{3, 1.0}}, {{2, 1.0}}};
  CHECK_THROWS(leading_triple(M));
}

TEST_CASE("triplet export") {
  IntervalMap T = IntervalMap::doubling();
  TransferMatrix M = assemble_ulam(T, UlamGrid::uniform(4));
  std::ostringstream os;
  M.to_triplet_csv(os);
  std::string s = os.str();
  CHECK(s.rfind("row,col,value\n", 0) == 0);
  // 4 columns x 2 target bins each
  CHECK(std::count(s.begin(), s.end(), '\n') == 9);
  CHECK(s.find("0.5") != std::string::npos);
}
