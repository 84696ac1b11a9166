#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "openrates/maps.hpp"
#include "openrates/step_function.hpp"
#include "openrates/transfer.hpp"

namespace openrates {

/// q_{k,eps}: conditional probabilities of first return to the hole at
/// time k+1 given a start in the hole. Full sum is 1 by Kac; `tail`
/// carries the exact remaining mass beyond the computed N terms.
struct QSeries {
  double epsilon = 0.0;
  std::vector<double> q;
  double delta = 0.0;  // mu0(A_eps)
  double eta = 0.0;    // eta_eps proxy
  double tail = 0.0;   // sum_{k >= N} q_k (exact telescoped remainder)
  std::string method;  // "exact-interval" | "matrix"
  std::vector<Rational> q_exact;  // populated by the exact-interval route
  Rational tail_exact = 0;
  Rational delta_exact = 0;

  double partial_sum() const {
    double s = 0.0;
    for (double v : q) s += v;
    return s;
  }
};

/// Delta_eps = integral of phi0 over the hole, exact.
inline Rational mu0_hole_exact(const StepFunction& phi0, const Hole& hole) {
  return phi0.integral(hole.intervals);
}

/// Delta_eps from a discretized density (per-bin values of phi0), with
/// exact sub-bin proration of partially covered bins.
inline double mu0_hole(const std::vector<double>& phi0_density, const Hole& hole,
                       const UlamGrid& grid) {
  if (static_cast<long>(phi0_density.size()) != grid.m())
    throw std::invalid_argument("mu0_hole: density size mismatch");
  double s = 0.0;
  for (long j = 0; j < grid.m(); ++j) {
    Rational olap = 0;
    for (auto& [a, b] : hole.intervals) {
      Rational lo = std::max(a, grid.edges[j]);
      Rational hi = std::min(b, grid.edges[j + 1]);
      if (lo < hi) olap += hi - lo;
    }
    if (olap != 0) s += phi0_density[j] * to_double(olap);
  }
  return s;
}

/// eta_eps proxy: Delta_eps * sup(1/phi0 on A_eps).
inline double eta_hat(const StepFunction& phi0, const Hole& hole) {
  Rational inf_phi = -1;
  for (size_t i = 0; i < phi0.values().size(); ++i) {
    for (auto& [a, b] : hole.intervals) {
      if (std::max(a, phi0.edges()[i]) < std::min(b, phi0.edges()[i + 1])) {
        if (inf_phi < 0 || phi0.values()[i] < inf_phi) inf_phi = phi0.values()[i];
      }
    }
  }
  if (inf_phi <= 0) throw std::runtime_error("eta_hat: phi0 vanishes on the hole");
  return to_double(mu0_hole_exact(phi0, hole) / inf_phi);
}

/// kappa_N estimate (1-gap)^N / gap from the measured spectral gap.
inline double kappa_hat(long N, double gap) {
  if (gap >= 1.0) return 0.0;
  if (gap <= 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(1.0 - gap, static_cast<double>(N)) / gap;
}

/// N(eps) = ceil(log eta / log(1-gap)), the proof's balance point.
inline long select_N(double eta, double gap) {
  if (eta <= 0.0) return 1;
  if (gap >= 1.0 - 1e-12) return 1;
  double n = std::ceil(std::log(eta) / std::log(1.0 - gap));
  return std::max(1L, static_cast<long>(n));
}

/// delta_eps = min_N (N * eta + kappa_N).
inline double delta_eps_bound(double eta, double gap) {
  long n_star = select_N(eta, gap);
  double best = std::numeric_limits<double>::infinity();
  for (long N = 1; N <= 4 * n_star + 8; ++N) best = std::min(best, N * eta + kappa_hat(N, gap));
  return best;
}

/// Exact-interval route: propagates v_0 = P0(1_A phi0) through the open
/// operator and reads off q_k = integral_A v_k / Delta, all rational.
inline QSeries q_k_series(const IntervalMap& map, const Hole& hole, const StepFunction& phi0,
                          long N) {
  if (N < 1) throw std::invalid_argument("q_k_series: N must be >= 1");
  Rational delta = mu0_hole_exact(phi0, hole);
  if (delta == 0)
    throw std::domain_error("q_k_series: mu0(A_eps) = 0, the q_{k,eps} are not well defined");
  QSeries out;
  out.method = "exact-interval";
  out.epsilon = to_double(hole.radius);
  out.delta = to_double(delta);
  out.delta_exact = delta;
  out.eta = eta_hat(phi0, hole);
  StepFunction ind_a = hole.indicator();
  StepFunction ind_ac = hole.complement_indicator();
  StepFunction v = map.transfer(multiply(phi0, ind_a));
  for (long k = 0; k < N; ++k) {
    Rational num = v.integral(hole.intervals);
    out.q_exact.push_back(num / delta);
    out.q.push_back(to_double(out.q_exact.back()));
    v = map.transfer(multiply(v, ind_ac));
  }
  out.tail_exact = v.integral() / delta;  // telescoped sum_{k>=N} q_k
  out.tail = to_double(out.tail_exact);
  return out;
}

/// Matrix route: q_k = nu0((P0 - P_eps) P_eps^k (P0 - P_eps)(phi0)) / Delta
/// on a discretization grid; cross-checks the exact-interval route.
inline QSeries q_k_series_matrix(const TransferMatrix& closed, const TransferMatrix& open,
                                 const std::vector<double>& phi0_mass, const Hole& hole,
                                 const UlamGrid& grid, long N) {
  if (N < 1) throw std::invalid_argument("q_k_series_matrix: N must be >= 1");
  auto diff_apply = [&](const std::vector<double>& x) {
    std::vector<double> a = closed.apply(x), b = open.apply(x);
    for (long i = 0; i < closed.m; ++i) a[i] -= b[i];
    return a;
  };
  std::vector<double> u = diff_apply(phi0_mass);
  double delta = detail::sum(u);
  if (delta <= 0) throw std::domain_error("q_k_series_matrix: mu0(A_eps) = 0");
  QSeries out;
  out.method = "matrix";
  out.epsilon = to_double(hole.radius);
  out.delta = delta;
  (void)grid;
  out.eta = delta;  // refined by callers holding the exact phi0
  for (long k = 0; k < N; ++k) {
    out.q.push_back(detail::sum(diff_apply(u)) / delta);
    u = open.apply(u);
  }
  out.tail = detail::sum(u) / delta;
  return out;
}

/// theta_{N,eps} = 1 - sum_{k<N} lambda^{-k} q_{k,eps}.
inline double theta_truncated(double lambda_eps, const QSeries& qs, long N) {
  if (lambda_eps <= 0.0 || lambda_eps > 1.0 + 1e-12)
    throw std::invalid_argument("theta_truncated: lambda outside (0,1]");
  if (N > static_cast<long>(qs.q.size()))
    throw std::invalid_argument("theta_truncated: N exceeds series length");
  double s = 0.0, w = 1.0;
  for (long k = 0; k < N; ++k) {
    s += w * qs.q[k];
    w /= lambda_eps;
  }
  return 1.0 - s;
}

/// exp(-theta * delta), the first-order eigenvalue prediction.
inline double eigenvalue_prediction(double theta, double delta) {
  return std::exp(-theta * delta);
}

struct RichardsonFit {
  double value = 0.0;
  double order = 0.0;      // estimated leading order in eps
  bool converged = false;  // differences already below rounding
};

/// Extrapolates f(eps) -> f(0) from a decreasing eps sequence with an
/// (approximately) constant ratio; the order is estimated from data.
inline RichardsonFit richardson_extrapolate(const std::vector<double>& eps,
                                            const std::vector<double>& f) {
  if (eps.size() != f.size() || eps.size() < 3)
    throw std::invalid_argument("richardson_extrapolate: need >= 3 samples");
  size_t n = f.size();
  double d1 = f[n - 2] - f[n - 3];
  double d2 = f[n - 1] - f[n - 2];
  double r = eps[n - 1] / eps[n - 2];
  RichardsonFit fit;
  if (std::abs(d2) < 1e-14) {
    fit.value = f[n - 1];
    fit.converged = true;
    return fit;
  }
  double rho = d2 / d1;
  if (!(rho > 1e-6 && rho < 0.95)) rho = r;  // fall back to first order
  fit.value = f[n - 1] + d2 * rho / (1.0 - rho);
  fit.order = std::log(rho) / std::log(r);
  return fit;
}

struct ExtremalIndexEstimate {
  std::vector<double> epsilons;
  std::vector<double> theta_N_eps;
  std::vector<double> diagnostics;  // (1 - lambda_eps) / Delta_eps
  std::vector<double> lambdas;
  std::vector<double> deltas;
  std::vector<double> kac_partial;
  double theta_extrapolated = 0.0;
  double fit_order = 0.0;
  long N = 0;
  bool warning_nonmonotone = false;
};

struct ThetaLimitOptions {
  long N = 40;
  long grid_m = 0;       // 0: Markov-aligned grid per epsilon
  double tol = 1e-13;
  long max_iter = 1000000;
};

/// theta_{N,eps} along an eps-sweep with extrapolation to eps = 0 and
/// the (1-lambda)/Delta diagnostics of the eigenvalue formula.
inline ExtremalIndexEstimate theta_limit(const IntervalMap& map, const std::vector<Rational>& V,
                                         const std::vector<Rational>& eps_list,
                                         const ThetaLimitOptions& opt = {}) {
  if (eps_list.size() < 3) throw std::invalid_argument("theta_limit: need >= 3 epsilons");
  for (size_t i = 0; i + 1 < eps_list.size(); ++i)
    if (eps_list[i] <= eps_list[i + 1])
      throw std::invalid_argument("theta_limit: eps_list must be strictly decreasing");
  StepFunction phi0 = map.invariant_density_exact();
  ExtremalIndexEstimate est;
  est.N = opt.N;
  for (auto& eps : eps_list) {
    Hole hole = Hole::from_centers(V, eps);
    UlamGrid grid = opt.grid_m > 0 ? UlamGrid::uniform(opt.grid_m) : UlamGrid::aligned(map, hole);
    TransferMatrix closed = assemble_ulam(map, grid);
    TransferMatrix open = open_operator(closed, hole, grid);
    SpectralTriple triple = leading_triple(open, opt.tol, opt.max_iter);
    QSeries qs = q_k_series(map, hole, phi0, opt.N);
    double theta_ne = theta_truncated(triple.lambda, qs, opt.N);
    est.epsilons.push_back(to_double(eps));
    est.lambdas.push_back(triple.lambda);
    est.deltas.push_back(qs.delta);
    est.theta_N_eps.push_back(theta_ne);
    est.diagnostics.push_back((1.0 - triple.lambda) / qs.delta);
    est.kac_partial.push_back(qs.partial_sum());
  }
  auto fit = richardson_extrapolate(est.epsilons, est.theta_N_eps);
  est.theta_extrapolated = fit.value;
  est.fit_order = fit.order;
  // eq. (KL09) consistency: |diag - theta_{N,eps}| should shrink with eps
  double prev = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < est.epsilons.size(); ++i) {
    double gap_i = std::abs(est.diagnostics[i] - est.theta_N_eps[i]);
    if (gap_i > prev * 1.05 && gap_i > 1e-12) est.warning_nonmonotone = true;
    prev = gap_i;
  }
  return est;
}

}  // namespace openrates
