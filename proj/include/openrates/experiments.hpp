#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "evl.hpp"
#include "hitting.hpp"
#include "io.hpp"
#include "maps.hpp"
#include "rare_events.hpp"
#include "sft.hpp"
#include "transfer.hpp"

namespace openrates {

/// Mapped to exit code 2 by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mapped to exit code 3 by the CLI.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cfg {

inline const Json& require(const Json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing required field '" + key + "'");
  return j.at(key);
}

inline Rational rational_field(const Json& v) {
  try {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    return rational_from_double(v.get<double>());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: bad rational value: ") + e.what());
  }
}

inline std::vector<Rational> rational_list(const Json& j, const std::string& key) {
  std::vector<Rational> out;
  for (auto& v : require(j, key)) out.push_back(rational_field(v));
  return out;
}

/// Strictly decreasing, positive, nonempty.
inline std::vector<Rational> epsilon_sweep(const Json& j) {
  auto eps = rational_list(j, "epsilons");
  if (eps.empty()) throw ConfigError("config: 'epsilons' must be nonempty");
  for (auto& e : eps)
    if (e <= 0) throw ConfigError("config: epsilons must be positive");
  for (size_t i = 0; i + 1 < eps.size(); ++i)
    if (eps[i] <= eps[i + 1]) throw ConfigError("config: epsilons must be strictly decreasing");
  return eps;
}

inline IntervalMap map_field(const Json& j) {
  try {
    return IntervalMap::from_json(require(j, "map"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: bad map spec: ") + e.what());
  }
}

inline long positive_long(const Json& j, const std::string& key, long fallback) {
  long v = j.value(key, fallback);
  if (v < 1) throw ConfigError("config: '" + key + "' must be positive");
  return v;
}

inline std::uint64_t seed_field(const Json& j) {
  if (!j.contains("seed"))
    throw ConfigError("config: 'seed' is mandatory for Monte Carlo subcommands");
  return j.at("seed").get<std::uint64_t>();
}

}  // namespace cfg

inline void ensure_converged(const SpectralTriple& t, const std::string& what) {
  if (t.degenerate) return;  // zero operator: escape in one step, legitimate
  if (!(t.residual < 1e-8))
    throw ConvergenceError(what + ": power iteration residual " + format_double(t.residual));
}

// ---------------------------------------------------------------------------
// escape-rate / extremal-index sweep

/// Sweep lambda_eps, Delta_eps, theta_{N,eps} and the (1-lambda)/Delta
/// diagnostic over epsilons; extrapolates theta to eps -> 0. Writes
/// <prefix>_sweep.csv and <prefix>_summary.json under out_dir.
inline ExtremalIndexEstimate run_escape_rate(const Json& config,
                                             const std::filesystem::path& out_dir,
                                             const std::string& prefix = "escape_rate") {
  IntervalMap map = cfg::map_field(config);
  std::vector<Rational> centers = cfg::rational_list(config, "centers");
  std::vector<Rational> eps = cfg::epsilon_sweep(config);
  if (eps.size() < 3) throw ConfigError("config: escape-rate sweep needs >= 3 epsilons");
  ThetaLimitOptions opt;
  opt.N = cfg::positive_long(config, "N", 40);
  opt.grid_m = config.value("grid_m", 0L);

  // flag (and drop) epsilons whose hole carries no invariant mass
  StepFunction phi0 = map.invariant_density_exact();
  std::vector<Rational> usable;
  std::vector<double> flagged;
  for (auto& e : eps) {
    Hole h = Hole::from_centers(centers, e);
    if (mu0_hole_exact(phi0, h) > 0)
      usable.push_back(e);
    else
      flagged.push_back(to_double(e));
  }
  if (usable.size() < 3)
    throw ConfigError("config: fewer than 3 epsilons with mu0(A_eps) > 0");

  ExtremalIndexEstimate est;
  try {
    est = theta_limit(map, centers, usable, opt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  CsvWriter csv({"epsilon", "delta", "lambda", "theta_N_eps", "diag", "kac_partial_sum"}, config);
  for (size_t i = 0; i < est.epsilons.size(); ++i)
    csv.add_row({est.epsilons[i], est.deltas[i], est.lambdas[i], est.theta_N_eps[i],
                 est.diagnostics[i], est.kac_partial[i]});
  csv.write(out_dir / (prefix + "_sweep.csv"));

  Json summary;
  summary["schema"] = "openrates-json-1";
  summary["config"] = config;
  summary["theta_extrapolated"] = est.theta_extrapolated;
  summary["fit_order"] = est.fit_order;
  summary["N"] = est.N;
  summary["diag_nonmonotone_warning"] = est.warning_nonmonotone;
  summary["flagged_epsilons_zero_mass"] = flagged;
  summary["fit_residual"] =
      est.theta_N_eps.size() >= 2
          ? std::abs(est.theta_extrapolated - est.theta_N_eps.back())
          : 0.0;
  write_json(out_dir / (prefix + "_summary.json"), summary);
  return est;
}

// ---------------------------------------------------------------------------
// hitting-time study

struct HittingResult {
  double epsilon = 0.0;
  SurvivalCurve exact_nu0;
  SurvivalCurve exact_mu0;
  SurvivalCurve operator_nu0;
  SpectralSurvival spectral;
  SpectralTriple triple;
  double theta_N_eps = 0.0;
  ScalingReport scaling;
  SurvivalCurve monte_carlo;  // empty unless samples were requested
  bool has_monte_carlo = false;
};

/// One epsilon of the hitting study on a Markov-aligned grid.
inline HittingResult hitting_single(const IntervalMap& map, const std::vector<Rational>& centers,
                                    const Rational& eps, long n_max, long N,
                                    const std::vector<double>& t_grid, std::uint64_t mc_samples,
                                    std::uint64_t seed, unsigned jobs) {
  HittingResult r;
  r.epsilon = to_double(eps);
  Hole hole = Hole::from_centers(centers, eps);
  StepFunction phi0 = map.invariant_density_exact();

  r.exact_nu0 = survival_exact(map, hole, n_max, MeasureKind::nu0);
  r.exact_mu0 = survival_exact(map, hole, n_max, MeasureKind::mu0);

  UlamGrid grid = UlamGrid::aligned(map, hole);
  TransferMatrix closed = assemble_ulam(map, grid);
  TransferMatrix open = open_operator(closed, hole, grid);
  std::vector<double> leb_mass = grid.widths_double();
  r.operator_nu0 = survival_operator(open, leb_mass, n_max);
  r.triple = leading_triple(open);
  ensure_converged(r.triple, "hitting");
  double nu_phi = r.triple.nu_pairing(leb_mass);
  r.spectral = fit_spectral(r.triple, nu_phi, r.operator_nu0);

  QSeries qs = q_k_series(map, hole, phi0, N);
  r.theta_N_eps = theta_truncated(r.triple.lambda, qs, N);
  double eta = qs.eta;
  double deps = delta_eps_bound(eta, r.triple.gap);
  double xi = xi_epsilon(r.theta_N_eps, kappa_hat(N, r.triple.gap));
  // scaling curve: operator propagation (exact on the aligned grid)
  // with a geometric lambda^n tail; the remainder decays like
  // (1-gap)^n, negligible past a few hundred steps
  std::vector<double> phi_mass(grid.m());
  for (long j = 0; j < grid.m(); ++j)
    phi_mass[j] = to_double(phi0.integral(grid.edges[j], grid.edges[j + 1]));
  long n_op = std::max(n_max, 512L);
  SurvivalCurve mu_curve = survival_operator(open, phi_mass, n_op);
  mu_curve.measure = MeasureKind::mu0;
  if (r.triple.lambda > 0 && mu_curve.values.back() > 0) {
    mu_curve.tail_lambda = r.triple.lambda;
    mu_curve.tail_coeff =
        mu_curve.values.back() / std::pow(r.triple.lambda, static_cast<double>(n_op));
  }
  r.scaling = exp_error_curve(mu_curve, xi, qs.delta, deps, t_grid,
                              static_cast<double>(N));
  if (mc_samples > 0) {
    r.monte_carlo = survival_montecarlo(map, hole, n_max, mc_samples, seed, MeasureKind::mu0, jobs);
    r.has_monte_carlo = true;
  }
  return r;
}

/// Sweep driver: per-epsilon CSV curves plus a JSON ScalingReport list.
inline std::vector<HittingResult> run_hitting(const Json& config,
                                              const std::filesystem::path& out_dir,
                                              unsigned jobs = 1,
                                              const std::string& prefix = "hitting") {
  IntervalMap map = cfg::map_field(config);
  std::vector<Rational> centers = cfg::rational_list(config, "centers");
  std::vector<Rational> eps = cfg::epsilon_sweep(config);
  long n_max = cfg::positive_long(config, "n_max", 200);
  long N = cfg::positive_long(config, "N", 40);
  std::vector<double> t_grid;
  if (config.contains("t_grid"))
    t_grid = config.at("t_grid").get<std::vector<double>>();
  else
    for (double t = 0.1; t <= 5.0 + 1e-9; t += 0.1) t_grid.push_back(t);
  std::uint64_t samples = config.value("samples", std::uint64_t{0});
  std::uint64_t seed = samples > 0 ? cfg::seed_field(config) : 0;

  std::vector<HittingResult> results;
  Json reports = Json::array();
  for (size_t i = 0; i < eps.size(); ++i) {
    HittingResult r =
        hitting_single(map, centers, eps[i], n_max, N, t_grid, samples, seed + i, jobs);
    CsvWriter csv({"n", "s_nu0", "s_mu0", "spectral_estimate", "band"}, config);
    for (long n = 0; n <= r.exact_nu0.horizon(); ++n)
      csv.add_row({n, r.exact_nu0.values[n], r.exact_mu0.values[n], r.spectral.estimate(n),
                   r.spectral.band(n)});
    csv.write(out_dir / (prefix + "_eps" + std::to_string(i) + ".csv"));
    if (r.has_monte_carlo) {
      CsvWriter mcsv({"n", "s_mc_mu0", "stderr"}, config);
      for (long n = 0; n <= r.monte_carlo.horizon(); ++n)
        mcsv.add_row({n, r.monte_carlo.values[n], r.monte_carlo.stderr_band[n]});
      mcsv.write(out_dir / (prefix + "_mc_eps" + std::to_string(i) + ".csv"));
    }
    Json rep;
    rep["epsilon"] = r.epsilon;
    rep["lambda"] = r.triple.lambda;
    rep["gap"] = r.triple.gap;
    rep["xi_eps"] = r.scaling.xi_eps;
    rep["delta_eps"] = r.scaling.delta_eps;
    rep["C_hat"] = r.scaling.C_hat;
    Json rows = Json::array();
    for (auto& row : r.scaling.rows)
      rows.push_back({{"t", row.t},
                      {"error", row.error},
                      {"bound", row.bound_shape},
                      {"small_n_regime", row.small_n_regime}});
    rep["rows"] = rows;
    rep["omitted_t"] = r.scaling.omitted_t;
    reports.push_back(rep);
    results.push_back(std::move(r));
  }
  Json summary;
  summary["schema"] = "openrates-json-1";
  summary["config"] = config;
  summary["reports"] = reports;
  write_json(out_dir / (prefix + "_summary.json"), summary);
  return results;
}

// ---------------------------------------------------------------------------
// extreme value law

struct EvlResult {
  LevelSequence levels;
  std::vector<MaxLawPoint> points;
  double theta_used = 0.0;
  double predicted = 0.0;
  double theta_fitted = 0.0;
  double theta_ci = 0.0;  // 1-sigma, from the largest-n point
};

inline EvlResult run_evl(const Json& config, const std::filesystem::path& out_dir,
                         unsigned jobs = 1, const std::string& prefix = "evl") {
  IntervalMap map = cfg::map_field(config);
  Rational center = cfg::rational_field(cfg::require(config, "center"));
  double t = cfg::require(config, "t").get<double>();
  if (!(t > 0)) throw ConfigError("config: 't' must be positive");
  std::vector<long> n_list = cfg::require(config, "n_list").get<std::vector<long>>();
  for (long n : n_list)
    if (n < 1) throw ConfigError("config: n_list entries must be positive");
  std::uint64_t samples = cfg::positive_long(config, "samples", 100000);
  std::uint64_t seed = cfg::seed_field(config);

  EvlResult r;
  if (config.contains("theta")) {
    r.theta_used = config.at("theta").get<double>();
  } else {
    // clustering index of the target point: 1 for non-periodic centers
    r.theta_used = theta_analytic(pi_set(map, {center}, 32));
  }
  StepFunction phi0 = map.invariant_density_exact();
  Observable obs{to_double(center)};
  try {
    r.levels = levels_for(t, n_list, obs, phi0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  r.predicted = max_law_predicted(t, r.theta_used);
  r.points = max_law_empirical(map, obs, r.levels, samples, seed, jobs);

  CsvWriter csv({"n", "z_n", "empirical", "predicted", "stderr"}, config);
  for (auto& p : r.points) csv.add_row({p.n, p.z_n, p.empirical, r.predicted, p.stderr_});
  csv.write(out_dir / (prefix + ".csv"));

  const MaxLawPoint& last = r.points.back();
  if (last.empirical > 0) {
    r.theta_fitted = -std::log(last.empirical) / t;
    r.theta_ci = last.stderr_ / (t * last.empirical);
  }
  Json summary;
  summary["schema"] = "openrates-json-1";
  summary["config"] = config;
  summary["theta_used"] = r.theta_used;
  summary["predicted"] = r.predicted;
  summary["theta_fitted"] = r.theta_fitted;
  summary["theta_ci_1sigma"] = r.theta_ci;
  write_json(out_dir / (prefix + "_summary.json"), summary);
  return r;
}

// ---------------------------------------------------------------------------
// SFT entropy drops

inline std::vector<EntropyReport> run_sft(const Json& config, const std::filesystem::path& out_dir,
                                          const std::string& prefix = "sft_entropy") {
  SFTSpec base = [&] {
    try {
      return SFTSpec::from_json(cfg::require(config, "sft"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: bad sft spec: ") + e.what());
    }
  }();
  std::vector<Word> blocks;
  if (config.contains("blocks")) {
    for (auto& b : config.at("blocks")) blocks.push_back(word_from_string(b.get<std::string>()));
  } else if (config.contains("block_family")) {
    const Json& fam = config.at("block_family");
    int sym = cfg::require(fam, "symbol").get<int>();
    for (long L : cfg::require(fam, "lengths").get<std::vector<long>>()) {
      if (L < 1) throw ConfigError("config: block_family lengths must be positive");
      blocks.emplace_back(L, sym);
    }
  } else {
    throw ConfigError("config: need 'blocks' or 'block_family'");
  }
  long N = config.value("N", -1L);
  std::vector<EntropyReport> study;
  try {
    study = entropy_drop_study(base, blocks, N);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  CsvWriter csv({"L", "h_closed", "h_open", "drop", "prediction", "ratio"}, config);
  for (auto& rep : study)
    csv.add_row({static_cast<long>(rep.block.size()), rep.h_closed, rep.h_open, rep.drop,
                 rep.predicted_drop, rep.ratio});
  csv.write(out_dir / (prefix + ".csv"));

  Json summary;
  summary["schema"] = "openrates-json-1";
  summary["config"] = config;
  Json rows = Json::array();
  for (auto& rep : study)
    rows.push_back({{"block", word_to_string(rep.block)},
                    {"theta_block", rep.theta_block_value},
                    {"block_mass", rep.block_mass},
                    {"ratio", rep.ratio}});
  summary["blocks"] = rows;
  write_json(out_dir / (prefix + "_summary.json"), summary);
  return study;
}

// ---------------------------------------------------------------------------
// selftest: pinned reduced-scale rerun of the acceptance themes

/// Writes selftest.csv: (criterion, quantity, value) rows, all derived
/// from pinned configs and seeds so the bytes must reproduce exactly.
inline void run_selftest(const std::filesystem::path& out_dir, unsigned jobs = 1) {
  Json pinned;
  pinned["name"] = "selftest";
  pinned["seed"] = 20260826;
  CsvWriter csv({"criterion", "quantity", "value"}, pinned);
  auto put = [&](long crit, const std::string& q, double v) {
    csv.add_row({crit, q, v});
  };
  IntervalMap map = IntervalMap::doubling();
  StepFunction phi0 = map.invariant_density_exact();
  std::vector<Rational> eps = {Rational(1, 64), Rational(1, 128), Rational(1, 256)};

  // 1: extremal index at periodic centers
  {
    ThetaLimitOptions opt;
    opt.N = 20;
    const std::vector<std::pair<std::string, Rational>> centers = {
        {"0", Rational(0)}, {"1/3", Rational(1, 3)}, {"1/7", Rational(1, 7)}};
    for (auto& [name, c] : centers) {
      auto est = theta_limit(map, {c}, eps, opt);
      put(1, "theta_hat_center_" + name, est.theta_extrapolated);
    }
  }
  // 2: Kac partial sum and exact tail deviation
  {
    Hole hole = Hole::from_centers({Rational(1, 3)}, Rational(1, 256));
    QSeries qs = q_k_series(map, hole, phi0, 20);
    put(2, "kac_partial_sum_N20", qs.partial_sum());
    Rational total = qs.tail_exact;
    for (auto& q : qs.q_exact) total += q;
    put(2, "kac_total_deviation", to_double(total - 1));
  }
  // 3: eigenvalue-formula diagnostic gap at smallest eps
  {
    ThetaLimitOptions opt;
    opt.N = 20;
    auto est = theta_limit(map, {Rational(1, 3)}, eps, opt);
    put(3, "diag_minus_theta_smallest_eps",
        est.diagnostics.back() - est.theta_N_eps.back());
  }
  // 4: exact vs operator survival
  {
    Hole hole = Hole::from_centers({Rational(1, 3)}, Rational(1, 64));
    SurvivalCurve ex = survival_exact(map, hole, 10, MeasureKind::nu0);
    UlamGrid grid = UlamGrid::aligned(map, hole);
    TransferMatrix open = open_operator(assemble_ulam(map, grid), hole, grid);
    SurvivalCurve op = survival_operator(open, grid.widths_double(), 10);
    double worst = 0.0;
    for (long n = 0; n <= 10; ++n) worst = std::max(worst, std::abs(ex.values[n] - op.values[n]));
    put(4, "exact_vs_operator_maxdiff", worst);
  }
  // 5: error-bound constants across two epsilons
  {
    std::vector<double> t_grid = {0.5, 1.0, 2.0, 3.0};
    for (size_t i = 0; i < 2; ++i) {
      Rational e = i == 0 ? Rational(1, 64) : Rational(1, 256);
      auto r = hitting_single(map, {Rational(1, 3)}, e, 40, 20, t_grid, 0, 0, jobs);
      put(5, "C_hat_eps" + std::to_string(i), r.scaling.C_hat);
      put(5, "xi_eps" + std::to_string(i), r.scaling.xi_eps);
    }
  }
  // 6: extreme value law, reduced Monte Carlo
  {
    StepFunction phi = phi0;
    for (auto& [name, c] : std::vector<std::pair<std::string, double>>{{"1/3", 1.0 / 3.0},
                                                                        {"0.1", 0.1}}) {
      Observable obs{c};
      LevelSequence lv = levels_for(1.0, {256}, obs, phi);
      auto pts = max_law_empirical(map, obs, lv, 4096, 20260826, jobs);
      put(6, "evl_empirical_center_" + name, pts.back().empirical);
    }
  }
  // 7: SFT entropies and the 1^L drop ratio at L = 6
  {
    SFTSpec full2 = SFTSpec::full_shift(2);
    SFTSpec golden = delete_block(full2, word_from_string("11"));
    put(7, "golden_mean_entropy", topological_entropy(golden));
    auto study = entropy_drop_study(full2, {Word(6, 1)});
    put(7, "ones_block_L6_ratio", study[0].ratio);
  }
  csv.write(out_dir / "selftest.csv");
}

}  // namespace openrates
