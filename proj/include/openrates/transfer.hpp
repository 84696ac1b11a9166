#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "openrates/maps.hpp"
#include "openrates/rational.hpp"

namespace openrates {

/// Discretization grid on [0,1]: m bins with exact rational edges.
struct UlamGrid {
  std::vector<Rational> edges;  // m+1 increasing, 0 .. 1

  explicit UlamGrid(std::vector<Rational> e) : edges(std::move(e)) {
    if (edges.size() < 2 || edges.front() != 0 || edges.back() != 1)
      throw std::invalid_argument("UlamGrid: edges must run from 0 to 1");
    for (size_t i = 0; i + 1 < edges.size(); ++i)
      if (edges[i] >= edges[i + 1]) throw std::invalid_argument("UlamGrid: edges not increasing");
  }

  static UlamGrid uniform(long m) {
    if (m < 1) throw std::invalid_argument("UlamGrid: m < 1");
    std::vector<Rational> e;
    e.reserve(static_cast<size_t>(m) + 1);
    for (long j = 0; j <= m; ++j) e.emplace_back(Rational(BigInt(j), BigInt(m)));
    return UlamGrid(std::move(e));
  }

  /// Smallest uniform grid whose lattice contains all branch and hole
  /// endpoints and is preserved by the map (needs integer slopes).
  /// On such a grid the Ulam discretization is exact.
  static UlamGrid aligned(const IntervalMap& map, const Hole& hole, long min_bins = 1) {
    BigInt L = 1;
    auto fold = [&L](const Rational& r) { L = lcm_big(L, denominator(r)); };
    for (auto& br : map.branches()) {
      if (denominator(br.a) != 1)
        throw std::invalid_argument("UlamGrid::aligned: needs integer branch slopes");
      fold(br.lo);
      fold(br.hi);
      fold(br.b);
    }
    for (auto& [a, b] : hole.intervals) {
      fold(a);
      fold(b);
    }
    L = std::max(L, BigInt(min_bins));
    if (L > BigInt(1) << 24) throw std::invalid_argument("UlamGrid::aligned: lattice too fine");
    return uniform(L.convert_to<long>());
  }

  long m() const { return static_cast<long>(edges.size()) - 1; }
  Rational width(long j) const { return edges[j + 1] - edges[j]; }

  /// Index of the bin containing x (right-continuous; x=1 -> last bin).
  long locate(const Rational& x) const {
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    long i = static_cast<long>(it - edges.begin()) - 1;
    return std::min(std::max(i, 0L), m() - 1);
  }

  std::vector<double> widths_double() const {
    std::vector<double> w(m());
    for (long j = 0; j < m(); ++j) w[j] = to_double(width(j));
    return w;
  }
};

/// Finite-rank discretization of P0 (closed) or P_eps (open), stored
/// column-sparse. Acts on bin-mass vectors: column j holds the mass
/// fractions bin j sends out, so closed matrices are column-stochastic.
struct TransferMatrix {
  enum class Kind { closed, open };

  long m = 0;
  Kind kind = Kind::closed;
  std::vector<std::vector<std::pair<long, double>>> cols;
  std::vector<double> widths;
  std::vector<std::vector<std::pair<long, Rational>>> exact_cols;  // filled by assemble_markov_exact

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(m, 0.0);
    for (long j = 0; j < m; ++j) {
      double xj = x[j];
      if (xj == 0.0) continue;
      for (auto& [i, v] : cols[j]) y[i] += v * xj;
    }
    return y;
  }

  std::vector<double> apply_transpose(const std::vector<double>& x) const {
    std::vector<double> y(m, 0.0);
    for (long j = 0; j < m; ++j) {
      double s = 0.0;
      for (auto& [i, v] : cols[j]) s += v * x[i];
      y[j] = s;
    }
    return y;
  }

  /// Sparse triplet export: one "row,col,value" line per entry.
  void to_triplet_csv(std::ostream& os) const {
    os << "row,col,value\n";
    char buf[64];
    for (long j = 0; j < m; ++j)
      for (auto& [i, v] : cols[j]) {
        std::snprintf(buf, sizeof(buf), "%ld,%ld,%.17g\n", i, j, v);
        os << buf;
      }
  }
};

/// M[i][j] = Leb(B_j cap T^{-1} B_i) / Leb(B_j), assembled exactly by
/// rational interval intersection and rounded once to double.
inline TransferMatrix assemble_ulam(const IntervalMap& map, const UlamGrid& grid,
                                    bool keep_exact = false) {
  long m = grid.m();
  if (m < static_cast<long>(map.branches().size()))
    throw std::invalid_argument("assemble_ulam: grid coarser than branch partition");
  TransferMatrix M;
  M.m = m;
  M.kind = TransferMatrix::Kind::closed;
  M.cols.resize(m);
  M.widths = grid.widths_double();
  std::vector<std::vector<std::pair<long, Rational>>> acc(m);

  for (auto& br : map.branches()) {
    Rational inv_slope = Rational(1) / abs(br.a);
    long j0 = grid.locate(br.lo);
    for (long j = j0; j < m && grid.edges[j] < br.hi; ++j) {
      Rational slo = std::max(br.lo, grid.edges[j]);
      Rational shi = std::min(br.hi, grid.edges[j + 1]);
      if (slo >= shi) continue;
      Rational y0 = br.apply(slo), y1 = br.apply(shi);
      if (y0 > y1) std::swap(y0, y1);
      Rational wj = grid.width(j);
      for (long i = grid.locate(y0); i < m && grid.edges[i] < y1; ++i) {
        Rational olap = std::min(y1, grid.edges[i + 1]) - std::max(y0, grid.edges[i]);
        if (olap <= 0) continue;
        acc[j].emplace_back(i, olap * inv_slope / wj);
      }
    }
  }
  for (long j = 0; j < m; ++j) {
    auto& col = acc[j];
    std::sort(col.begin(), col.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<long, Rational>> merged;
    for (auto& [i, v] : col) {
      if (!merged.empty() && merged.back().first == i)
        merged.back().second += v;
      else
        merged.emplace_back(i, v);
    }
    M.cols[j].reserve(merged.size());
    for (auto& [i, v] : merged) M.cols[j].emplace_back(i, to_double(v));
    if (keep_exact) {
      if (M.exact_cols.empty()) M.exact_cols.resize(m);
      M.exact_cols[j] = std::move(merged);
    }
  }
  return M;
}

/// Exact finite-rank action of P0 on densities piecewise constant over
/// a Markov partition; rational entries, no discretization error.
/// Throws if any branch image of a grid cell misaligns with the grid.
inline TransferMatrix assemble_markov_exact(const IntervalMap& map, const UlamGrid& grid) {
  for (auto& br : map.branches()) {
    auto on_grid = [&grid](const Rational& x) {
      return std::binary_search(grid.edges.begin(), grid.edges.end(), x);
    };
    if (!on_grid(br.lo) || !on_grid(br.hi))
      throw std::invalid_argument("assemble_markov_exact: branch endpoint off grid");
    for (auto& e : grid.edges)
      if (e >= br.lo && e <= br.hi && !on_grid(br.apply(e)))
        throw std::invalid_argument("assemble_markov_exact: Markov property fails (cell image misaligned)");
  }
  return assemble_ulam(map, grid, /*keep_exact=*/true);
}

inline TransferMatrix assemble_markov_exact(const IntervalMap& map) {
  auto pts = map.markov_partition_points();
  return assemble_markov_exact(map, UlamGrid(std::move(pts)));
}

/// Applies the indicator multiplication before M: column j is scaled
/// by Leb(B_j \ A_eps)/Leb(B_j), fractional for partially covered bins.
inline TransferMatrix open_operator(const TransferMatrix& closed, const Hole& hole,
                                    const UlamGrid& grid) {
  TransferMatrix M = closed;
  M.kind = TransferMatrix::Kind::open;
  M.exact_cols.clear();
  for (long j = 0; j < M.m; ++j) {
    Rational olap = 0;
    for (auto& [a, b] : hole.intervals) {
      Rational lo = std::max(a, grid.edges[j]);
      Rational hi = std::min(b, grid.edges[j + 1]);
      if (lo < hi) olap += hi - lo;
    }
    if (olap == 0) continue;
    double keep = to_double((grid.width(j) - olap) / grid.width(j));
    if (keep <= 0.0) {
      M.cols[j].clear();
    } else {
      for (auto& [i, v] : M.cols[j]) v *= keep;
    }
  }
  return M;
}

/// Leading eigenvalue with right eigenvector (mass vector), left
/// eigenfunctional, spectral-gap estimate and solver diagnostics.
struct SpectralTriple {
  double lambda = 0.0;
  std::vector<double> phi;  // nu0(phi) = sum = 1
  std::vector<double> nu;   // nu(phi) = 1
  double gap = 0.0;         // 1 - |lambda_2| / lambda
  long iterations = 0;
  double residual = 0.0;
  bool degenerate = false;

  double nu_pairing(const std::vector<double>& mass) const {
    double s = 0.0;
    for (size_t i = 0; i < nu.size(); ++i) s += nu[i] * mass[i];
    return s;
  }
};

namespace detail {

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

/// Counts closed communicating classes among bins that still emit
/// mass; more than one makes the leading eigenvector ambiguous.
inline void check_irreducible_support(const TransferMatrix& M) {
  long m = M.m;
  std::vector<char> sender(m, 0);
  for (long j = 0; j < m; ++j) sender[j] = !M.cols[j].empty();
  // Kosaraju on the sender-induced subgraph
  std::vector<std::vector<long>> radj(m);
  for (long j = 0; j < m; ++j)
    if (sender[j])
      for (auto& [i, v] : M.cols[j])
        if (v > 0 && sender[i]) radj[i].push_back(j);
  std::vector<long> order;
  order.reserve(m);
  std::vector<char> seen(m, 0);
  for (long s = 0; s < m; ++s) {
    if (!sender[s] || seen[s]) continue;
    std::vector<std::pair<long, size_t>> stack{{s, 0}};
    seen[s] = 1;
    while (!stack.empty()) {
      auto [u, k] = stack.back();
      if (k < M.cols[u].size()) {
        ++stack.back().second;
        long w = M.cols[u][k].first;
        if (M.cols[u][k].second > 0 && sender[w] && !seen[w]) {
          seen[w] = 1;
          stack.emplace_back(w, 0);
        }
      } else {
        order.push_back(u);
        stack.pop_back();
      }
    }
  }
  std::vector<long> comp(m, -1);
  long ncomp = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (comp[*it] != -1) continue;
    std::vector<long> stack{*it};
    comp[*it] = ncomp;
    while (!stack.empty()) {
      long u = stack.back();
      stack.pop_back();
      for (long w : radj[u])
        if (comp[w] == -1) {
          comp[w] = ncomp;
          stack.push_back(w);
        }
    }
    ++ncomp;
  }
  std::vector<char> closed_class(ncomp, 1), has_edge(ncomp, 0);
  for (long j = 0; j < m; ++j) {
    if (!sender[j]) continue;
    for (auto& [i, v] : M.cols[j]) {
      if (v <= 0 || !sender[i]) continue;
      if (comp[i] != comp[j])
        closed_class[comp[j]] = 0;
      else
        has_edge[comp[j]] = 1;
    }
  }
  long recurrent = 0;
  for (long c = 0; c < ncomp; ++c) recurrent += (closed_class[c] && has_edge[c]);
  if (recurrent > 1)
    throw std::invalid_argument("leading_triple: matrix reducible on surviving support (" +
                                std::to_string(recurrent) + " closed classes)");
}

}  // namespace detail

/// Power iteration on M and its transpose; the gap comes from deflated
/// power iteration on M - lambda * phi (x) nu, the discrete remainder.
inline SpectralTriple leading_triple(const TransferMatrix& M, double tol = 1e-13,
                                     long max_iter = 1000000) {
  SpectralTriple t;
  long m = M.m;
  bool all_empty = true;
  for (auto& c : M.cols)
    if (!c.empty()) {
      all_empty = false;
      break;
    }
  if (all_empty) {
    t.degenerate = true;
    return t;
  }
  detail::check_irreducible_support(M);

  std::vector<double> x = M.widths;  // start from Lebesgue mass
  double s = detail::sum(x);
  for (auto& v : x) v /= s;
  double lambda = 0.0, prev = -1.0;
  long it = 0;
  for (; it < max_iter; ++it) {
    std::vector<double> y = M.apply(x);
    lambda = detail::sum(y);
    if (lambda <= 0.0) {
      t.degenerate = true;
      t.lambda = 0.0;
      return t;
    }
    for (auto& v : y) v /= lambda;
    x = std::move(y);
    if (std::abs(lambda - prev) < tol * std::max(lambda, 1e-30)) break;
    prev = lambda;
  }
  if (it == max_iter)
    throw std::runtime_error("leading_triple: no convergence (near-degenerate second eigenvalue?)");
  t.lambda = lambda;
  t.phi = x;
  t.iterations = it + 1;

  // left eigenvector
  std::vector<double> y(m, 1.0);
  prev = -1.0;
  for (long k = 0; k < max_iter; ++k) {
    std::vector<double> z = M.apply_transpose(y);
    double mu = detail::sum(z) / m;
    if (mu <= 0.0) break;
    for (auto& v : z) v /= mu;
    y = std::move(z);
    if (std::abs(mu - prev) < tol * std::max(mu, 1e-30)) break;
    prev = mu;
  }
  double pair = 0.0;
  for (long i = 0; i < m; ++i) pair += y[i] * t.phi[i];
  if (pair <= 0.0) throw std::runtime_error("leading_triple: degenerate left/right pairing");
  for (auto& v : y) v /= pair;
  t.nu = std::move(y);

  // residual ||M phi - lambda phi||_1
  std::vector<double> r = M.apply(t.phi);
  double res = 0.0;
  for (long i = 0; i < m; ++i) res += std::abs(r[i] - lambda * t.phi[i]);
  t.residual = res;

  // second eigenvalue estimate by deflated power iteration
  std::vector<double> z(m);
  for (long i = 0; i < m; ++i) z[i] = (i % 2 ? 1.0 : -1.0) * M.widths[i];
  auto deflate = [&](std::vector<double>& w) {
    double c = 0.0;
    for (long i = 0; i < m; ++i) c += t.nu[i] * w[i];
    for (long i = 0; i < m; ++i) w[i] -= c * t.phi[i];
  };
  deflate(z);
  double norm = 0.0;
  for (double v : z) norm += std::abs(v);
  double lam2 = 0.0, prev2 = -1.0;
  for (long k = 0; k < 2000 && norm > 1e-280; ++k) {
    for (auto& v : z) v /= norm;
    z = M.apply(z);
    deflate(z);
    norm = 0.0;
    for (double v : z) norm += std::abs(v);
    lam2 = norm;
    if (k > 20 && std::abs(lam2 - prev2) < 1e-10 * std::max(lam2, 1e-30)) break;
    prev2 = lam2;
  }
  lam2 = std::min(lam2, lambda);
  t.gap = 1.0 - lam2 / lambda;
  return t;
}

/// Escape rate -log(lambda); +infinity when everything escapes.
inline double escape_rate(const SpectralTriple& t) {
  if (t.lambda <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(t.lambda);
}

}  // namespace openrates
