#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "openrates/maps.hpp"
#include "openrates/rare_events.hpp"
#include "openrates/rng.hpp"
#include "openrates/transfer.hpp"

namespace openrates {

enum class MeasureKind { nu0, mu0 };

/// n -> measure{tau_eps >= n}; s(0) = 1, nonincreasing. An optional
/// geometric tail (coeff * lambda^n) extends the curve past the last
/// stored index once the remainder term is negligible.
struct SurvivalCurve {
  MeasureKind measure = MeasureKind::nu0;
  double epsilon = 0.0;
  std::vector<double> values;
  std::string method;
  bool truncated = false;        // exact route hit its interval-count cap
  double tail_lambda = -1.0;     // < 0: no tail extension
  double tail_coeff = 0.0;
  std::vector<double> stderr_band;  // Monte Carlo only

  long horizon() const { return static_cast<long>(values.size()) - 1; }

  bool can_eval(long n) const { return n <= horizon() || tail_lambda >= 0.0; }

  double at(long n) const {
    if (n <= horizon()) return values[n];
    if (tail_lambda < 0.0) throw std::out_of_range("SurvivalCurve: n beyond horizon");
    return tail_coeff * std::pow(tail_lambda, static_cast<double>(n));
  }
};

/// Brute-force oracle: propagates the surviving density exactly through
/// P_eps with rational arithmetic; s(n) = nu0(P_eps^n phi).
inline SurvivalCurve survival_exact(const IntervalMap& map, const Hole& hole, long n_max,
                                    MeasureKind measure, size_t breakpoint_cap = 200000) {
  SurvivalCurve out;
  out.measure = measure;
  out.epsilon = to_double(hole.radius);
  out.method = "exact";
  StepFunction f = measure == MeasureKind::mu0 ? map.invariant_density_exact()
                                               : StepFunction::constant(1);
  StepFunction ind_ac = hole.complement_indicator();
  out.values.push_back(to_double(f.integral()));
  for (long n = 1; n <= n_max; ++n) {
    f = map.transfer(multiply(f, ind_ac));
    out.values.push_back(to_double(f.integral()));
    if (f.cells() > breakpoint_cap) {
      out.truncated = (n < n_max);
      break;
    }
  }
  return out;
}

/// s(n) = nu0(M_eps^n x) by repeated matrix-vector products; x is the
/// initial bin-mass vector (Lebesgue widths for nu0, phi0 mass for mu0).
inline SurvivalCurve survival_operator(const TransferMatrix& M_eps,
                                       const std::vector<double>& init_mass, long n_max) {
  SurvivalCurve out;
  out.method = "operator";
  std::vector<double> x = init_mass;
  out.values.push_back(detail::sum(x));
  for (long n = 1; n <= n_max; ++n) {
    x = M_eps.apply(x);
    out.values.push_back(detail::sum(x));
  }
  return out;
}

/// lambda^n nu_eps(phi) with an error band C lambda^n (1-gap)^n, C
/// fitted against observed curve values over a burn-in window.
struct SpectralSurvival {
  double lambda = 0.0;
  double gap = 0.0;
  double nu_phi = 0.0;  // nu_eps(phi)
  double C = 0.0;       // fitted band constant

  double estimate(long n) const { return nu_phi * std::pow(lambda, static_cast<double>(n)); }
  double band(long n) const {
    return C * std::pow(lambda, static_cast<double>(n)) *
           std::pow(1.0 - gap, static_cast<double>(n));
  }
};

inline SpectralSurvival fit_spectral(const SpectralTriple& triple, double nu_phi,
                                     const SurvivalCurve& observed, long n_fit = 20) {
  SpectralSurvival s;
  s.lambda = triple.lambda;
  s.gap = triple.gap;
  s.nu_phi = nu_phi;
  double c = 0.0;
  long n_hi = std::min<long>(n_fit, observed.horizon());
  for (long n = 0; n <= n_hi; ++n) {
    double denom = std::pow(s.lambda, static_cast<double>(n)) *
                   std::pow(1.0 - s.gap, static_cast<double>(n));
    if (denom < 1e-280) break;
    c = std::max(c, std::abs(observed.at(n) - s.estimate(n)) / denom);
  }
  s.C = c;
  return s;
}

/// xi_eps = theta_{N,eps} + O(kappa_N); the kappa term only bounds the
/// error, so the scaling factor itself is the truncated index.
inline double xi_epsilon(double theta_N_eps, double kappa_N_fit) {
  (void)kappa_N_fit;
  return theta_N_eps;
}

/// Per-t record of |mu0{tau >= t/(xi Delta)} - e^{-t}| against the
/// sharp bound shape (t v 1) e^{-t} delta_eps.
struct ScalingReport {
  double xi_eps = 0.0;
  double delta_eps = 0.0;  // min_N (N eta + kappa_N)
  double C_hat = 0.0;      // max_t error / ((t v 1) e^{-t} delta_eps)
  struct Row {
    double t = 0.0;
    double survival = 0.0;
    double error = 0.0;
    double bound_shape = 0.0;  // (t v 1) e^{-t} delta_eps
    bool small_n_regime = false;
  };
  std::vector<Row> rows;
  std::vector<double> omitted_t;  // beyond curve horizon
};

inline ScalingReport exp_error_curve(const SurvivalCurve& curve, double xi, double delta,
                                     double delta_eps, const std::vector<double>& t_grid,
                                     double small_n_threshold = 0.0) {
  if (curve.measure != MeasureKind::mu0)
    throw std::invalid_argument("exp_error_curve: needs a mu0 survival curve");
  ScalingReport rep;
  rep.xi_eps = xi;
  rep.delta_eps = delta_eps;
  for (double t : t_grid) {
    if (t <= 0.0) continue;
    long n = static_cast<long>(std::floor(t / (xi * delta)));
    if (!curve.can_eval(n)) {
      rep.omitted_t.push_back(t);
      continue;
    }
    ScalingReport::Row row;
    row.t = t;
    row.survival = curve.at(n);
    row.error = std::abs(row.survival - std::exp(-t));
    row.bound_shape = std::max(t, 1.0) * std::exp(-t) * delta_eps;
    row.small_n_regime = (n <= static_cast<long>(small_n_threshold));
    if (row.bound_shape > 0.0) rep.C_hat = std::max(rep.C_hat, row.error / row.bound_shape);
    rep.rows.push_back(row);
  }
  return rep;
}

namespace detail {

struct McBlockResult {
  std::vector<std::uint64_t> tau_hist;  // index n: #samples with tau == n; last: tau >= n_max
};

/// One deterministic sample block. Trajectories are iterated in double
/// precision with a per-step dither of size 2^-52: piecewise-linear
/// maps with integer slopes are exact in binary and would otherwise
/// deplete their mantissa bits after ~53 steps.
inline McBlockResult mc_block(const IntervalMap& map, const Hole& hole, long n_max,
                              std::uint64_t samples, Xoshiro256 rng, MeasureKind measure,
                              const std::vector<double>& cdf_edges,
                              const std::vector<double>& cdf_values) {
  McBlockResult res;
  res.tau_hist.assign(static_cast<size_t>(n_max) + 1, 0);
  struct Seg { double lo, hi, a, b; };
  std::vector<Seg> segs;
  for (auto& br : map.branches())
    segs.push_back({to_double(br.lo), to_double(br.hi), to_double(br.a), to_double(br.b)});
  struct Hiv { double lo, hi; };
  std::vector<Hiv> holes;
  for (auto& [a, b] : hole.intervals) holes.push_back({to_double(a), to_double(b)});

  // x -> kx mod 1 (every branch has the same slope and vanishes at its left
  // edge) with a single hole interval admits a pipelined inner loop; its
  // stream differs from the generic path but is equally deterministic
  bool affine_mod = !map.branches().empty();
  for (auto& br : map.branches())
    if (br.a != map.branches()[0].a || br.a * br.lo + br.b != 0) affine_mod = false;
  if (affine_mod && holes.size() == 1) {
    // Interleave independent trajectories so the serially dependent
    // x -> slope*x mod 1 chains pipeline; each lane drives its dither
    // from a one-word LCG seeded off the block stream, so refill order
    // does not perturb lanes and lane state stays register-resident.
    const double slope = segs[0].a, hlo = holes[0].lo, hhi = holes[0].hi;
    constexpr int kLanes = 8;
    double x[kLanes];
    long step[kLanes];
    std::uint64_t dstate[kLanes];
    std::uint64_t drawn = 0;
    auto refill = [&](int l) {
      double u = rng.uniform();
      if (measure == MeasureKind::nu0) {
        x[l] = u;
      } else {
        size_t lo = 0, hi = cdf_values.size() - 1;
        while (lo + 1 < hi) {
          size_t mid = (lo + hi) / 2;
          (cdf_values[mid] <= u ? lo : hi) = mid;
        }
        double span = cdf_values[lo + 1] - cdf_values[lo];
        double frac = span > 0.0 ? (u - cdf_values[lo]) / span : 0.0;
        x[l] = cdf_edges[lo] + frac * (cdf_edges[lo + 1] - cdf_edges[lo]);
      }
      dstate[l] = rng.next();
      step[l] = 0;
      ++drawn;
    };
    int lanes = static_cast<int>(std::min<std::uint64_t>(kLanes, samples));
    for (int l = 0; l < lanes; ++l) refill(l);
    // Main phase: while all lanes are occupied, run branchless batches.
    // A lane keeps iterating past its first hole entry inside a batch
    // (the trajectory after the recorded hit is discarded); exits and
    // refills are resolved between batches.
    while (lanes == kLanes) {
      long room = n_max;
      for (int l = 0; l < kLanes; ++l) room = std::min(room, n_max - step[l]);
      const long batch = std::min<long>(64, room);
      long hit[kLanes];
      for (int l = 0; l < kLanes; ++l) hit[l] = n_max + 1;
      // dither every 4th step: integer-slope maps shed one mantissa bit
      // per step, and rounding keeps only the bits of an injection above
      // 2^-53, so a [0, 2^-44) injection each 4 steps replenishes ~9
      // effective bits per 4 lost at a quarter of the generator cost
      // while staying ~9 orders below any hole width of interest
      for (long s2 = 0; s2 < batch; ++s2) {
        const bool dither = (s2 & 3) == 0;
        for (int l = 0; l < kLanes; ++l) {
          double xv = x[l];
          bool in_hole = xv >= hlo && xv < hhi;
          hit[l] = (in_hole && hit[l] > n_max) ? step[l] + s2 : hit[l];
          double y = slope * xv;
          y -= static_cast<double>(static_cast<long>(y));
          if (dither) {
            dstate[l] = dstate[l] * 6364136223846793005ull + 1442695040888963407ull;
            y += static_cast<double>(dstate[l] >> 20) * 0x1.0p-64;
            y = y >= 1.0 ? y - 1.0 : y;
          }
          x[l] = y;
        }
      }
      // descending so a compaction always swaps in an already-resolved lane
      for (int l = kLanes - 1; l >= 0; --l) {
        if (hit[l] <= n_max) {
          ++res.tau_hist[hit[l]];
        } else if (step[l] + batch == n_max) {
          ++res.tau_hist[n_max];
        } else {
          step[l] += batch;
          continue;
        }
        if (drawn < samples) {
          refill(l);
        } else {
          --lanes;
          x[l] = x[lanes];
          step[l] = step[lanes];
          dstate[l] = dstate[lanes];
        }
      }
    }
    while (lanes > 0) {
      for (int l = 0; l < lanes; ++l) {
        double xv = x[l];
        bool in_hole = xv >= hlo && xv < hhi;
        if (in_hole || step[l] == n_max) {
          ++res.tau_hist[in_hole ? step[l] : n_max];
          if (drawn < samples) {
            refill(l);
          } else {
            --lanes;
            x[l] = x[lanes];
            step[l] = step[lanes];
            dstate[l] = dstate[lanes];
          }
          --l;
          continue;
        }
        double y = slope * xv;
        y -= static_cast<double>(static_cast<long>(y));  // y >= 0: trunc == floor
        dstate[l] = dstate[l] * 6364136223846793005ull + 1442695040888963407ull;
        y += static_cast<double>(dstate[l] >> 12) * 0x1.0p-104;  // dither
        if (y >= 1.0) y -= 1.0;
        x[l] = y;
        ++step[l];
      }
    }
    return res;
  }

  for (std::uint64_t s = 0; s < samples; ++s) {
    double x;
    if (measure == MeasureKind::nu0) {
      x = rng.uniform();
    } else {
      // inverse CDF of the discretized phi0
      double u = rng.uniform();
      size_t lo = 0, hi = cdf_values.size() - 1;
      while (lo + 1 < hi) {
        size_t mid = (lo + hi) / 2;
        (cdf_values[mid] <= u ? lo : hi) = mid;
      }
      double span = cdf_values[lo + 1] - cdf_values[lo];
      double frac = span > 0.0 ? (u - cdf_values[lo]) / span : 0.0;
      x = cdf_edges[lo] + frac * (cdf_edges[lo + 1] - cdf_edges[lo]);
    }
    long tau = n_max;
    for (long i = 0; i < n_max; ++i) {
      bool inside = false;
      for (auto& h : holes)
        if (x >= h.lo && x < h.hi) {
          inside = true;
          break;
        }
      if (inside) {
        tau = i;
        break;
      }
      double y = segs.back().a * x + segs.back().b;
      for (auto& sg : segs)
        if (x >= sg.lo && x < sg.hi) {
          y = sg.a * x + sg.b;
          break;
        }
      y += static_cast<double>(rng.next() >> 12) * 0x1.0p-104;  // dither
      if (y >= 1.0) y -= 1.0;
      if (y < 0.0) y = 0.0;
      x = y;
    }
    ++res.tau_hist[tau];
  }
  return res;
}

}  // namespace detail

/// Empirical survival with binomial standard-error bands; deterministic
/// given (seed, samples) regardless of the number of worker threads
/// (fixed-size blocks with seed-derived substreams, merged by index).
inline SurvivalCurve survival_montecarlo(const IntervalMap& map, const Hole& hole, long n_max,
                                         std::uint64_t samples, std::uint64_t seed,
                                         MeasureKind measure, unsigned jobs = 1) {
  if (samples < 1) throw std::invalid_argument("survival_montecarlo: samples >= 1 required");
  std::vector<double> cdf_edges, cdf_values;
  if (measure == MeasureKind::mu0) {
    StepFunction phi0 = map.invariant_density_exact();
    cdf_edges.reserve(phi0.edges().size());
    cdf_values.reserve(phi0.edges().size());
    double acc = 0.0;
    cdf_values.push_back(0.0);
    for (size_t i = 0; i < phi0.values().size(); ++i) {
      cdf_edges.push_back(to_double(phi0.edges()[i]));
      acc += to_double(phi0.values()[i] * (phi0.edges()[i + 1] - phi0.edges()[i]));
      cdf_values.push_back(acc);
    }
    cdf_edges.push_back(1.0);
    cdf_values.back() = 1.0;
  }

  constexpr std::uint64_t kBlock = 1 << 16;
  std::uint64_t n_blocks = (samples + kBlock - 1) / kBlock;
  std::vector<detail::McBlockResult> results(n_blocks);
  auto run_block = [&](std::uint64_t b) {
    std::uint64_t count = std::min(kBlock, samples - b * kBlock);
    results[b] = detail::mc_block(map, hole, n_max, count, Xoshiro256::substream(seed, b),
                                  measure, cdf_edges, cdf_values);
  };
  if (jobs <= 1 || n_blocks == 1) {
    for (std::uint64_t b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    std::uint64_t next = 0;
    std::mutex mtx;
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::uint64_t b;
          {
            std::lock_guard<std::mutex> lk(mtx);
            if (next >= n_blocks) return;
            b = next++;
          }
          run_block(b);
        }
      });
    for (auto& th : pool) th.join();
  }

  std::vector<std::uint64_t> hist(static_cast<size_t>(n_max) + 1, 0);
  for (auto& r : results)
    for (size_t i = 0; i < hist.size(); ++i) hist[i] += r.tau_hist[i];

  SurvivalCurve out;
  out.measure = measure;
  out.epsilon = to_double(hole.radius);
  out.method = "montecarlo";
  out.values.resize(static_cast<size_t>(n_max) + 1);
  out.stderr_band.resize(out.values.size());
  std::uint64_t surviving = samples;
  double inv = 1.0 / static_cast<double>(samples);
  for (long n = 0; n <= n_max; ++n) {
    double p = static_cast<double>(surviving) * inv;
    out.values[n] = p;
    out.stderr_band[n] = std::sqrt(std::max(p * (1.0 - p) * inv, 0.0));
    if (n < n_max) surviving -= hist[n];
  }
  return out;
}

}  // namespace openrates
