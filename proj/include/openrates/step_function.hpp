#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

#include "openrates/rational.hpp"

namespace openrates {

/// A sorted list of disjoint half-open intervals [lo, hi) inside [0,1].
using IntervalList = std::vector<std::pair<Rational, Rational>>;

/// Merges overlapping/touching intervals and clips to [0,1].
inline IntervalList normalize_intervals(IntervalList iv) {
  IntervalList out;
  std::sort(iv.begin(), iv.end());
  for (auto& [lo, hi] : iv) {
    Rational a = std::max(lo, Rational(0));
    Rational b = std::min(hi, Rational(1));
    if (a >= b) continue;
    if (!out.empty() && out.back().second >= a)
      out.back().second = std::max(out.back().second, b);
    else
      out.emplace_back(a, b);
  }
  return out;
}

inline Rational total_length(const IntervalList& iv) {
  Rational s = 0;
  for (auto& [a, b] : iv) s += b - a;
  return s;
}

/// Right-continuous piecewise-constant function on [0,1) with exact
/// rational breakpoints and values. The workhorse behind the exact
/// transfer-operator and survival-set computations: pushing such a
/// function forward under a piecewise-affine map yields another one.
class StepFunction {
 public:
  StepFunction() : edges_{0, 1}, values_{0} {}

  StepFunction(std::vector<Rational> edges, std::vector<Rational> values)
      : edges_(std::move(edges)), values_(std::move(values)) {
    if (edges_.size() != values_.size() + 1 || edges_.front() != 0 || edges_.back() != 1)
      throw std::invalid_argument("StepFunction: edges must run from 0 to 1 with one value per cell");
    for (size_t i = 0; i + 1 < edges_.size(); ++i)
      if (edges_[i] >= edges_[i + 1]) throw std::invalid_argument("StepFunction: edges not increasing");
  }

  static StepFunction constant(const Rational& c) { return StepFunction({0, 1}, {c}); }

  static StepFunction indicator(const IntervalList& intervals) {
    IntervalList iv = normalize_intervals(intervals);
    std::vector<Rational> edges{0};
    std::vector<Rational> values;
    for (auto& [a, b] : iv) {
      if (a > edges.back()) {
        values.push_back(0);
        edges.push_back(a);
      }
      values.push_back(1);
      edges.push_back(b);
    }
    if (edges.back() < 1) {
      values.push_back(0);
      edges.push_back(1);
    }
    return StepFunction(std::move(edges), std::move(values));
  }

  const std::vector<Rational>& edges() const { return edges_; }
  const std::vector<Rational>& values() const { return values_; }
  size_t cells() const { return values_.size(); }

  const Rational& value_at(const Rational& x) const {
    // right-continuous; x = 1 returns the last cell's value
    auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
    size_t i = static_cast<size_t>(it - edges_.begin());
    if (i == 0) throw std::invalid_argument("StepFunction::value_at: x < 0");
    return values_[std::min(i - 1, values_.size() - 1)];
  }

  Rational integral() const {
    Rational s = 0;
    for (size_t i = 0; i < values_.size(); ++i) s += values_[i] * (edges_[i + 1] - edges_[i]);
    return s;
  }

  Rational integral(const Rational& lo, const Rational& hi) const {
    Rational s = 0;
    for (size_t i = 0; i < values_.size(); ++i) {
      Rational a = std::max(lo, edges_[i]);
      Rational b = std::min(hi, edges_[i + 1]);
      if (a < b) s += values_[i] * (b - a);
    }
    return s;
  }

  Rational integral(const IntervalList& iv) const {
    Rational s = 0;
    for (auto& [a, b] : iv) s += integral(a, b);
    return s;
  }

  /// Merge adjacent cells with equal values.
  StepFunction& compress() {
    std::vector<Rational> e{edges_.front()};
    std::vector<Rational> v;
    for (size_t i = 0; i < values_.size(); ++i) {
      if (!v.empty() && v.back() == values_[i])
        e.back() = edges_[i + 1];
      else {
        v.push_back(values_[i]);
        e.push_back(edges_[i + 1]);
      }
    }
    edges_ = std::move(e);
    values_ = std::move(v);
    return *this;
  }

  friend StepFunction multiply(const StepFunction& f, const StepFunction& g) {
    std::vector<Rational> edges;
    edges.reserve(f.edges_.size() + g.edges_.size());
    std::merge(f.edges_.begin(), f.edges_.end(), g.edges_.begin(), g.edges_.end(),
               std::back_inserter(edges));
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::vector<Rational> values;
    values.reserve(edges.size() - 1);
    size_t fi = 0, gi = 0;
    for (size_t i = 0; i + 1 < edges.size(); ++i) {
      while (f.edges_[fi + 1] <= edges[i]) ++fi;
      while (g.edges_[gi + 1] <= edges[i]) ++gi;
      values.push_back(f.values_[fi] * g.values_[gi]);
    }
    StepFunction out(std::move(edges), std::move(values));
    out.compress();
    return out;
  }

  friend StepFunction add(const StepFunction& f, const StepFunction& g) {
    std::vector<Rational> edges;
    std::merge(f.edges_.begin(), f.edges_.end(), g.edges_.begin(), g.edges_.end(),
               std::back_inserter(edges));
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::vector<Rational> values;
    size_t fi = 0, gi = 0;
    for (size_t i = 0; i + 1 < edges.size(); ++i) {
      while (f.edges_[fi + 1] <= edges[i]) ++fi;
      while (g.edges_[gi + 1] <= edges[i]) ++gi;
      values.push_back(f.values_[fi] + g.values_[gi]);
    }
    StepFunction out(std::move(edges), std::move(values));
    out.compress();
    return out;
  }

  /// Sorted support of nonzero values, as an interval list.
  IntervalList support() const {
    IntervalList out;
    for (size_t i = 0; i < values_.size(); ++i)
      if (values_[i] != 0) out.emplace_back(edges_[i], edges_[i + 1]);
    return normalize_intervals(out);
  }

 private:
  std::vector<Rational> edges_;
  std::vector<Rational> values_;
};

}  // namespace openrates
