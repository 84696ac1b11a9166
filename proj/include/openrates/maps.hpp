#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "openrates/rational.hpp"
#include "openrates/step_function.hpp"

namespace openrates {

/// One affine monotone branch x -> a*x + b on [lo, hi).
/// Uniform expansion |a| > 1 is enforced at construction.
struct Branch {
  Rational lo, hi, a, b;

  Branch(Rational lo_, Rational hi_, Rational a_, Rational b_)
      : lo(std::move(lo_)), hi(std::move(hi_)), a(std::move(a_)), b(std::move(b_)) {
    if (lo >= hi) throw std::invalid_argument("Branch: lo >= hi");
    if (abs(a) <= 1) throw std::invalid_argument("Branch: |slope| <= 1 violates uniform expansion");
    auto inside = [](const Rational& y) { return y >= 0 && y <= 1; };
    if (!inside(image_lo()) || !inside(image_hi()))
      throw std::invalid_argument("Branch: image leaves [0,1]");
  }

  Rational apply(const Rational& x) const { return a * x + b; }
  double apply(double x) const { return to_double(a) * x + to_double(b); }
  Rational image_lo() const { return a > 0 ? apply(lo) : apply(hi); }
  Rational image_hi() const { return a > 0 ? apply(hi) : apply(lo); }
  Rational inverse(const Rational& y) const { return (y - b) / a; }
  double slope() const { return to_double(a); }
};

/// Piecewise monotone expanding interval map (Rychlik data with
/// g = 1/|T'| on branch interiors). Immutable after construction.
class IntervalMap {
 public:
  explicit IntervalMap(std::vector<Branch> branches, std::string name = "custom")
      : branches_(std::move(branches)), name_(std::move(name)) {
    if (branches_.empty()) throw std::invalid_argument("IntervalMap: no branches");
    std::sort(branches_.begin(), branches_.end(),
              [](const Branch& x, const Branch& y) { return x.lo < y.lo; });
    if (branches_.front().lo != 0 || branches_.back().hi != 1)
      throw std::invalid_argument("IntervalMap: branches must cover [0,1]");
    for (size_t i = 0; i + 1 < branches_.size(); ++i)
      if (branches_[i].hi != branches_[i + 1].lo)
        throw std::invalid_argument("IntervalMap: branch domains must tile [0,1]");
    for (auto& br : branches_) {
      singular_.push_back(br.lo);
    }
    singular_.push_back(1);
  }

  static IntervalMap doubling() {
    return IntervalMap({Branch(0, Rational(1, 2), 2, 0), Branch(Rational(1, 2), 1, 2, -1)},
                       "doubling");
  }

  static IntervalMap tent() {
    return IntervalMap({Branch(0, Rational(1, 2), 2, 0), Branch(Rational(1, 2), 1, -2, 2)},
                       "tent");
  }

  /// Map spec from JSON: {"preset":"doubling"|"tent"} or
  /// {"branches":[{"lo":..,"hi":..,"a":..,"b":..},...]} with entries
  /// given as numbers or "p/q" strings.
  static IntervalMap from_json(const nlohmann::json& j) {
    if (j.contains("preset")) {
      std::string p = j.at("preset").get<std::string>();
      if (p == "doubling") return doubling();
      if (p == "tent") return tent();
      throw std::invalid_argument("IntervalMap::from_json: unknown preset '" + p + "'");
    }
    auto num = [](const nlohmann::json& v) -> Rational {
      if (v.is_string()) return parse_rational(v.get<std::string>());
      return rational_from_double(v.get<double>());
    };
    std::vector<Branch> bs;
    for (const auto& bj : j.at("branches"))
      bs.emplace_back(num(bj.at("lo")), num(bj.at("hi")), num(bj.at("a")), num(bj.at("b")));
    return IntervalMap(std::move(bs), j.value("name", std::string("custom")));
  }

  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<Rational>& singular_set() const { return singular_; }
  const std::string& name() const { return name_; }

  double min_expansion() const {
    double m = std::abs(branches_.front().slope());
    for (auto& br : branches_) m = std::min(m, std::abs(br.slope()));
    return m;
  }

  /// Right-continuous branch convention at partition points; x = 1
  /// belongs to the last branch.
  const Branch& branch_at(const Rational& x) const {
    for (auto& br : branches_)
      if (x >= br.lo && x < br.hi) return br;
    return branches_.back();
  }
  const Branch& branch_at(double x) const {
    for (auto& br : branches_)
      if (x >= to_double(br.lo) && x < to_double(br.hi)) return br;
    return branches_.back();
  }

  double eval(double x) const {
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("IntervalMap::eval: x outside [0,1]");
    double y = branch_at(x).apply(x);
    return std::min(std::max(y, 0.0), 1.0);
  }
  Rational eval(const Rational& x) const { return branch_at(x).apply(x); }

  std::vector<double> orbit(double x, int n) const {
    if (n < 0) throw std::invalid_argument("IntervalMap::orbit: n < 0");
    std::vector<double> out{x};
    out.reserve(static_cast<size_t>(n) + 1);
    for (int i = 0; i < n; ++i) out.push_back(eval(out.back()));
    return out;
  }
  std::vector<Rational> orbit(const Rational& x, int n) const {
    std::vector<Rational> out{x};
    for (int i = 0; i < n; ++i) out.push_back(eval(out.back()));
    return out;
  }

  std::optional<int> detect_period(double x, int k_max = 32, double tol = 1e-12) const {
    if (tol <= 0) throw std::invalid_argument("detect_period: tol must be positive");
    double y = x;
    for (int p = 1; p <= k_max; ++p) {
      y = eval(y);
      if (std::abs(y - x) < tol) return p;
    }
    return std::nullopt;
  }

  /// Exact periodicity decision for rational points of a rational map.
  std::optional<int> detect_period_exact(const Rational& x, int k_max = 32) const {
    Rational y = x;
    for (int p = 1; p <= k_max; ++p) {
      y = eval(y);
      if (y == x) return p;
    }
    return std::nullopt;
  }

  /// Pushforward P0 f of a piecewise-constant density, exact:
  /// (P0 f)(y) = sum over branches 1/|T'| * f(T_branch^{-1} y).
  StepFunction transfer(const StepFunction& f) const {
    // Collect breakpoints: branch image endpoints and images of f's
    // breakpoints that fall inside each branch.
    std::vector<Rational> edges{0, 1};
    for (auto& br : branches_) {
      edges.push_back(br.image_lo());
      edges.push_back(br.image_hi());
      for (auto& e : f.edges())
        if (e > br.lo && e < br.hi) edges.push_back(br.apply(e));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    while (edges.front() < 0) edges.erase(edges.begin());
    while (edges.back() > 1) edges.pop_back();

    std::vector<Rational> values(edges.size() - 1, Rational(0));
    for (auto& br : branches_) {
      Rational g = Rational(1) / abs(br.a);
      Rational ilo = br.image_lo(), ihi = br.image_hi();
      for (size_t i = 0; i + 1 < edges.size(); ++i) {
        if (edges[i] >= ilo && edges[i + 1] <= ihi) {
          Rational mid = (edges[i] + edges[i + 1]) / 2;
          values[i] += g * f.value_at(br.inverse(mid));
        }
      }
    }
    StepFunction out(std::move(edges), std::move(values));
    out.compress();
    return out;
  }

  /// The open-system action P_eps f = P0(1_{complement(A)} f).
  StepFunction transfer_open(const StepFunction& f, const StepFunction& hole_complement) const {
    return transfer(multiply(f, hole_complement));
  }

  /// Finite partition closed under taking branch-endpoint images; its
  /// cells carry the exact action of P0 on piecewise-constant
  /// densities when the map is Markov. Throws if no closure is found.
  std::vector<Rational> markov_partition_points(int max_rounds = 64) const {
    std::set<Rational> pts(singular_.begin(), singular_.end());
    pts.insert(0);
    pts.insert(1);
    for (int round = 0; round < max_rounds; ++round) {
      std::set<Rational> next = pts;
      for (auto& p : pts)
        if (p < 1) next.insert(eval(p));
      next.insert(eval(Rational(1)));
      if (next == pts) return {pts.begin(), pts.end()};
      pts = std::move(next);
    }
    throw std::runtime_error("markov_partition_points: branch-endpoint orbit closure not found (map not Markov?)");
  }

  /// Exact invariant density for piecewise-linear Markov maps, as a
  /// StepFunction with rational values, normalized to integral 1.
  StepFunction invariant_density_exact() const {
    auto pts = markov_partition_points();
    size_t n = pts.size() - 1;
    // action matrix on cell densities: P0(1_{C_j}) = sum_i c[i][j] 1_{C_i}
    std::vector<std::vector<Rational>> c(n, std::vector<Rational>(n, Rational(0)));
    for (size_t j = 0; j < n; ++j) {
      StepFunction g = transfer(StepFunction::indicator({{pts[j], pts[j + 1]}}));
      for (auto& e : g.edges())
        if (!std::binary_search(pts.begin(), pts.end(), e))
          throw std::runtime_error("invariant_density_exact: map is not Markov on its partition closure");
      for (size_t i = 0; i < n; ++i) c[i][j] = g.value_at((pts[i] + pts[i + 1]) / 2);
    }
    // solve (C - I) x = 0 by exact Gaussian elimination
    std::vector<std::vector<Rational>> m(n, std::vector<Rational>(n));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) m[i][j] = c[i][j] - Rational(i == j ? 1 : 0);
    std::vector<size_t> pivot_col;
    size_t row = 0;
    for (size_t col = 0; col < n && row < n; ++col) {
      size_t p = row;
      while (p < n && m[p][col] == 0) ++p;
      if (p == n) continue;
      std::swap(m[p], m[row]);
      for (size_t r = 0; r < n; ++r) {
        if (r == row || m[r][col] == 0) continue;
        Rational f = m[r][col] / m[row][col];
        for (size_t k = col; k < n; ++k) m[r][k] -= f * m[row][k];
      }
      pivot_col.push_back(col);
      ++row;
    }
    if (row == n) throw std::runtime_error("invariant_density_exact: kernel of P0 - I is trivial");
    std::vector<Rational> x(n, Rational(0));
    std::vector<bool> is_pivot(n, false);
    for (auto pc : pivot_col) is_pivot[pc] = true;
    size_t free_col = 0;
    while (is_pivot[free_col]) ++free_col;
    x[free_col] = 1;
    for (size_t r = pivot_col.size(); r-- > 0;) {
      Rational s = 0;
      for (size_t k = pivot_col[r] + 1; k < n; ++k) s += m[r][k] * x[k];
      x[pivot_col[r]] = -s / m[r][pivot_col[r]];
    }
    StepFunction phi(std::vector<Rational>(pts.begin(), pts.end()), std::move(x));
    Rational total = phi.integral();
    if (total <= 0) throw std::runtime_error("invariant_density_exact: non-positive invariant density");
    std::vector<Rational> vals = phi.values();
    for (auto& v : vals) v /= total;
    return StepFunction(std::vector<Rational>(pts.begin(), pts.end()), std::move(vals)).compress();
  }

 private:
  std::vector<Branch> branches_;
  std::vector<Rational> singular_;
  std::string name_;
};

/// The rare-event set A_eps: union of eps-neighbourhoods of a center
/// set V (clipped to [0,1], merged), or explicit intervals.
struct Hole {
  std::vector<Rational> centers;
  Rational radius = 0;
  IntervalList intervals;

  static Hole from_centers(std::vector<Rational> centers, const Rational& eps) {
    if (eps <= 0) throw std::invalid_argument("Hole: radius must be positive");
    Hole h;
    h.centers = std::move(centers);
    h.radius = eps;
    IntervalList iv;
    for (auto& v : h.centers) iv.emplace_back(v - eps, v + eps);
    h.intervals = normalize_intervals(iv);
    if (h.intervals.empty()) throw std::invalid_argument("Hole: empty after clipping to [0,1]");
    return h;
  }

  static Hole from_intervals(IntervalList iv) {
    Hole h;
    h.intervals = normalize_intervals(std::move(iv));
    return h;
  }

  static Hole empty() { return Hole{}; }

  bool is_empty() const { return intervals.empty(); }
  Rational length() const { return total_length(intervals); }
  StepFunction indicator() const { return StepFunction::indicator(intervals); }

  StepFunction complement_indicator() const {
    auto f = StepFunction::indicator(intervals);
    std::vector<Rational> vals = f.values();
    for (auto& v : vals) v = Rational(1) - v;
    return StepFunction(std::vector<Rational>(f.edges()), std::move(vals)).compress();
  }

  bool contains(double x) const {
    for (auto& [a, b] : intervals)
      if (x >= to_double(a) && x < to_double(b)) return true;
    return false;
  }
};

/// Pairs (x, k) with x in V, T^{k+1}x in V and T^j x not in V for
/// j = 1..k; weight 1/|(T^{k+1})'(x)|.
struct PiPair {
  Rational x;
  int k;
  Rational weight;
};

struct PiSet {
  std::vector<PiPair> pairs;

  Rational weight_sum() const {
    Rational s = 0;
    for (auto& p : pairs) s += p.weight;
    return s;
  }
};

inline PiSet pi_set(const IntervalMap& map, const std::vector<Rational>& V, int k_max) {
  std::set<Rational> vset(V.begin(), V.end());
  PiSet out;
  for (auto& v : V) {
    Rational y = v;
    Rational deriv = 1;
    for (int k = 0; k <= k_max; ++k) {
      // derivative across the step y -> T(y); the right-continuous
      // branch convention gives every point a well-defined one-sided slope
      const Branch& br = map.branch_at(y);
      deriv *= br.a;
      y = br.apply(y);
      if (vset.count(y)) {
        out.pairs.push_back({v, k, Rational(1) / abs(deriv)});
        break;  // first return only: larger k would violate T^j x not in V
      }
    }
  }
  return out;
}

/// theta = 1 - sum of Pi weights (the analytic extremal index of a
/// finite center set under a Rychlik map).
inline double theta_analytic(const PiSet& pi) { return to_double(Rational(1) - pi.weight_sum()); }

}  // namespace openrates
