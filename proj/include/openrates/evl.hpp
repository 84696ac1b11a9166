#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "openrates/hitting.hpp"
#include "openrates/maps.hpp"

namespace openrates {

/// Distance-based observable X(x) = h(|x - center|) with h strictly
/// decreasing, so level sets {X > z} are intervals shrinking to the
/// center as z approaches z_max = h(0).
struct Observable {
  double center = 0.5;

  // h(d) = -d; other strictly decreasing profiles rescale the level
  // parameter but generate the same interval family.
  double value(double x) const { return -std::abs(x - center); }
  double z_max() const { return 0.0; }
  double level_radius(double z) const { return -z; }  // {X > z} = (center-r, center+r)

  Hole level_set(double z) const {
    double r = level_radius(z);
    if (r <= 0.0) return Hole::empty();
    return Hole::from_centers({rational_from_double(center)}, rational_from_double(r));
  }
};

/// z_n values solving n * mu0{X > z_n} = t.
struct LevelSequence {
  double t = 0.0;
  std::vector<long> n_values;
  std::vector<double> z_values;
  std::vector<double> level_mass;  // mu0{X > z_n}, for the invariant check
};

/// Monotone root finding (bisection on the level-set radius) against
/// the exact mu0-mass of the candidate interval.
inline LevelSequence levels_for(double t, const std::vector<long>& n_list, const Observable& obs,
                                const StepFunction& phi0, double measure_tol = 1e-14) {
  if (t <= 0.0) throw std::invalid_argument("levels_for: t must be positive");
  LevelSequence seq;
  seq.t = t;
  auto mass_of_radius = [&](double r) {
    Rational c = rational_from_double(obs.center);
    Rational rr = rational_from_double(r);
    return to_double(phi0.integral(normalize_intervals({{c - rr, c + rr}})));
  };
  for (long n : n_list) {
    if (n < 1) throw std::invalid_argument("levels_for: n values must be >= 1");
    double target = t / static_cast<double>(n);
    if (target > mass_of_radius(1.0))
      throw std::invalid_argument("levels_for: t too large for the observable's range");
    double lo = 0.0, hi = 1.0;
    while (mass_of_radius(hi) - target > measure_tol || target - mass_of_radius(lo) > measure_tol) {
      double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (mass_of_radius(mid) < target ? lo : hi) = mid;
    }
    double r = 0.5 * (lo + hi);
    seq.n_values.push_back(n);
    seq.z_values.push_back(-r);
    seq.level_mass.push_back(mass_of_radius(r));
  }
  return seq;
}

/// exp(-t * theta), the predicted limit of nu0{max <= z_n}.
inline double max_law_predicted(double t, double theta) {
  if (t <= 0.0) throw std::invalid_argument("max_law_predicted: t must be positive");
  if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("max_law_predicted: theta outside [0,1]");
  return std::exp(-t * theta);
}

struct MaxLawPoint {
  long n = 0;
  double z_n = 0.0;
  double empirical = 0.0;  // nu0{max(X_0..X_{n-1}) <= z_n}
  double stderr_ = 0.0;
};

/// Monte Carlo estimate via the hitting-time equivalence: the maximum
/// over n steps exceeds z_n iff the orbit enters V_{z_n} before time n.
inline std::vector<MaxLawPoint> max_law_empirical(const IntervalMap& map, const Observable& obs,
                                                  const LevelSequence& levels,
                                                  std::uint64_t samples, std::uint64_t seed,
                                                  unsigned jobs = 1) {
  std::vector<MaxLawPoint> out;
  for (size_t i = 0; i < levels.n_values.size(); ++i) {
    long n = levels.n_values[i];
    MaxLawPoint pt;
    pt.n = n;
    pt.z_n = levels.z_values[i];
    if (pt.z_n >= obs.z_max()) {
      pt.empirical = 1.0;
      out.push_back(pt);
      continue;
    }
    Hole hole = obs.level_set(pt.z_n);
    SurvivalCurve curve =
        survival_montecarlo(map, hole, n, samples, seed + i, MeasureKind::nu0, jobs);
    pt.empirical = curve.values[n];
    pt.stderr_ = curve.stderr_band[n];
    out.push_back(pt);
  }
  return out;
}

}  // namespace openrates
