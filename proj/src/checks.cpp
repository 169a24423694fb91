#include "mfpa/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <boost/random/uniform_real_distribution.hpp>

#include "mfpa/contracts.hpp"
#include "mfpa/measures.hpp"
#include "mfpa/mkv_control.hpp"
#include "mfpa/model.hpp"
#include "mfpa/principal_n.hpp"
#include "mfpa/sde_engine.hpp"
#include "mfpa/stats.hpp"

namespace mfpa {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

bool quick(const CheckContext& ctx) { return ctx.scale == CheckScale::kQuick; }

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

ModelSpec multitask(double kappa, double b_bar, InitialLaw law,
                    std::function<double(double)> utility = identity_utility) {
  return multitask_model(MultitaskParams{kappa, b_bar}, 0.0, 1.0, law, std::move(utility));
}

/// -R + (1/2) int_0^T exp(2k(T - t)) dt by quadrature (R = 0, T = 1).
double quadrature_value(double kappa) {
  return 0.5 * simpson([kappa](double t) { return std::exp(2.0 * kappa * (1.0 - t)); }, 0.0, 1.0);
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

double simpson(const std::function<double(double)>& f, double a, double b, std::size_t panels) {
  if (panels % 2 == 1) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double acc = f(a) + f(b);
  for (std::size_t i = 1; i < panels; ++i) acc += f(a + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

CheckResult check_multitask_value(const CheckContext& ctx) {
  CheckResult r;
  r.id = 1;
  r.name = "multitask oracle value";
  const std::size_t steps = quick(ctx) ? 200 : 1000;
  const std::size_t n_proxy = quick(ctx) ? 20000 : 100000;
  const TimeGrid grid(1.0, steps);
  r.passed = true;
  std::ostringstream detail;
  json cases = json::array();
  for (double kappa : {-0.5, 0.0, 0.5}) {
    const ModelSpec model = multitask(kappa, 10.0, InitialLaw::constant(0.0));
    const MultitaskAnalytic an = analytic_multitask(kappa, 0.0, 1.0, 0.0);
    ObjectiveOptions opts;
    opts.pool = ctx.pool;
    const auto start = Clock::now();
    const ObjectiveEstimate est =
        evaluate_limit_objective(model, an.gamma_rule(), {}, n_proxy, grid, ctx.seed.derive(1), opts);
    const double ms = elapsed_ms(start);
    const double target = quadrature_value(kappa);
    const double tol = std::max(3.0 * est.se, 5e-3);
    const bool ok = std::fabs(est.value - target) <= tol && ms <= 120000.0;
    r.passed = r.passed && ok;
    cases.push_back({{"kappa_bar", kappa}, {"estimate", est.value}, {"se", est.se}, {"target", target},
                     {"tolerance", tol}, {"passed", ok}});
    r.timings["kappa_" + num(kappa)] = ms;
    detail << "k=" << kappa << ": J=" << num(est.value) << " target=" << num(target) << " tol=" << num(tol) << "; ";
  }
  r.metrics["cases"] = cases;
  r.detail = detail.str();
  return r;
}

CheckResult check_contract_identity(const CheckContext& ctx) {
  CheckResult r;
  r.id = 2;
  r.name = "contract identity";
  const double kappa = 0.5;
  const ModelSpec model = multitask(kappa, 10.0, InitialLaw::constant(0.0));
  const MultitaskAnalytic an = analytic_multitask(kappa, 0.0, 1.0, 0.0);
  const Contract contract = make_contract(model, an.gamma_rule());
  const TimeGrid grid(1.0, quick(ctx) ? 100 : 500);
  const std::vector<std::size_t> ns{10, 100, 1000};
  const std::vector<std::size_t> reps = quick(ctx) ? std::vector<std::size_t>{1000, 300, 100}
                                                   : std::vector<std::size_t>{4000, 1000, 400};
  const double target = model.reservation + quadrature_value(kappa);
  r.passed = true;
  std::ostringstream detail;
  std::vector<double> scales, variances;
  json cases = json::array();
  for (std::size_t j = 0; j < ns.size(); ++j) {
    const ContractStudy study = study_contract(model, contract, ns[j], grid, ctx.seed.derive(2), reps[j], ctx.pool);
    const bool mean_ok = std::fabs(study.xi.mean - target) <= 3.0 * study.xi.se;
    const bool reward_ok = std::fabs(study.agent_reward.mean - model.reservation) <= 3.0 * study.agent_reward.se;
    r.passed = r.passed && mean_ok && reward_ok;
    scales.push_back(static_cast<double>(ns[j]));
    variances.push_back(study.xi_variance);
    cases.push_back({{"n", ns[j]}, {"xi_mean", study.xi.mean}, {"xi_se", study.xi.se},
                     {"xi_variance", study.xi_variance}, {"agent_reward", study.agent_reward.mean},
                     {"agent_reward_se", study.agent_reward.se}, {"passed", mean_ok && reward_ok}});
    detail << "n=" << ns[j] << ": E[xi]=" << num(study.xi.mean) << "+-" << num(study.xi.se) << "; ";
  }
  const RateFit fit = fit_rate(scales, variances);
  const bool slope_ok = fit.slope >= -1.2 && fit.slope <= -0.8;
  r.passed = r.passed && slope_ok;
  r.metrics["target"] = target;
  r.metrics["cases"] = cases;
  r.metrics["variance_slope"] = fit.slope;
  detail << "target=" << num(target) << " Var slope=" << num(fit.slope);
  r.detail = detail.str();
  return r;
}

CheckResult check_gap_bound(const CheckContext& ctx) {
  CheckResult r;
  r.id = 3;
  r.name = "gap bound in n";
  const double kappa = 0.5;
  GapSweepSpec spec;
  spec.ns = quick(ctx) ? std::vector<std::size_t>{10, 30, 100} : std::vector<std::size_t>{10, 30, 100, 300, 1000};
  spec.b_bars = {10.0};
  spec.replications = quick(ctx) ? 400 : 1000;
  spec.model_for = [kappa](double b_bar) { return multitask(kappa, b_bar, InitialLaw::normal(0.0, 1.0), cara_utility); };
  spec.limit_value = [kappa](double) { return analytic_multitask(kappa, 0.0, 1.0, 0.0).value; };
  spec.policy_for = [kappa](const ModelSpec& model) {
    return NPlayerPolicy::from_contract(make_contract(model, analytic_multitask(kappa, 0.0, 1.0, 0.0).gamma_rule()));
  };
  const TimeGrid grid(1.0, quick(ctx) ? 100 : 500);
  const auto cells = gap_sweep(spec, grid, ctx.seed.derive(3), ctx.pool);

  bool positive = true, monotone = true, bounded = true;
  const double c = cells[0].gap * std::sqrt(static_cast<double>(cells[0].n));
  json rows = json::array();
  std::vector<double> scales, gaps;
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const auto& cell = cells[j];
    positive = positive && cell.gap >= -3.0 * cell.se;
    if (j > 0) {
      const double slack = 3.0 * std::hypot(cell.se, cells[j - 1].se);
      monotone = monotone && cell.gap <= cells[j - 1].gap + slack;
    }
    const double bound = c / std::sqrt(static_cast<double>(cell.n));
    bounded = bounded && cell.gap <= bound + 3.0 * cell.se;
    rows.push_back({{"n", cell.n}, {"gap", cell.gap}, {"se", cell.se}, {"bound", bound}});
    scales.push_back(static_cast<double>(cell.n));
    gaps.push_back(cell.gap);
  }
  r.passed = cells[0].gap > 0.0 && positive && monotone && bounded;
  r.metrics["cells"] = rows;
  r.metrics["C"] = c;
  try {
    const RateFit fit = fit_rate(scales, gaps);
    r.metrics["slope"] = fit.slope;
  } catch (const InsufficientDataError&) {
    r.metrics["slope"] = nullptr;
  }
  std::ostringstream detail;
  detail << "C=" << num(c) << " positive_or_noise=" << positive << " non_increasing=" << monotone
         << " within_bound=" << bounded << "; gaps:";
  for (const auto& cell : cells) detail << " n=" << cell.n << ":" << num(cell.gap) << "+-" << num(cell.se);
  r.detail = detail.str();
  return r;
}

CheckResult check_truncation_term(const CheckContext& ctx) {
  CheckResult r;
  r.id = 4;
  r.name = "truncation term in b_bar";
  const double kappa = 0.5;
  const std::size_t n = 100;
  const std::size_t reps = quick(ctx) ? 200 : 1000;
  const TimeGrid grid(1.0, quick(ctx) ? 50 : 100);
  const SeedSpec seed = ctx.seed.derive(4);
  auto payoffs_for = [&](double b_bar) {
    const ModelSpec model = multitask(kappa, b_bar, InitialLaw::normal(0.0, 1.0));
    const auto policy =
        NPlayerPolicy::from_contract(make_contract(model, analytic_multitask(kappa, 0.0, 1.0, 0.0).gamma_rule()));
    return estimate_n_player_value(model, policy, n, grid, reps, seed, ctx.pool).payoffs;
  };
  const auto reference = payoffs_for(64.0);
  const std::vector<double> bars{0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<std::vector<double>> diffs;
  std::vector<Estimate> est;
  for (double b : bars) {
    const auto p = payoffs_for(b);
    std::vector<double> d(reps);
    for (std::size_t k = 0; k < reps; ++k) d[k] = p[k] - reference[k];
    est.push_back(estimate_mean(d));
    diffs.push_back(std::move(d));
  }
  const double c = std::fabs(est[0].mean) * bars[0];
  bool bounded = true, monotone = true;
  json rows = json::array();
  for (std::size_t j = 0; j < bars.size(); ++j) {
    const double bound = c / bars[j];
    bounded = bounded && std::fabs(est[j].mean) <= bound + 3.0 * est[j].se;
    if (j > 0) {
      std::vector<double> step(reps);
      for (std::size_t k = 0; k < reps; ++k) step[k] = diffs[j][k] - diffs[j - 1][k];
      const double se = estimate_mean(step).se;
      monotone = monotone && std::fabs(est[j].mean) <= std::fabs(est[j - 1].mean) + 3.0 * se;
    }
    rows.push_back({{"b_bar", bars[j]}, {"difference", est[j].mean}, {"se", est[j].se}, {"bound", bound}});
  }
  r.passed = bounded && monotone;
  r.metrics["cells"] = rows;
  r.metrics["C_prime"] = c;
  double c_sup = 0.0;
  for (std::size_t j = 0; j < bars.size(); ++j) c_sup = std::max(c_sup, bars[j] * std::fabs(est[j].mean));
  r.metrics["C_sup_diagnostic"] = c_sup;
  std::ostringstream detail;
  detail << "C'=" << num(c) << " within_bound=" << bounded << " monotone=" << monotone << "; |J-J64|:";
  for (std::size_t j = 0; j < bars.size(); ++j) detail << " " << bars[j] << ":" << num(std::fabs(est[j].mean));
  r.detail = detail.str();
  return r;
}

CheckResult check_pareto(const CheckContext& ctx) {
  CheckResult r;
  r.id = 5;
  r.name = "pareto self-consistency";
  const double kappa = 0.5;
  const ModelSpec model = multitask(kappa, 10.0, InitialLaw::constant(0.0));
  const Contract contract = make_contract(model, analytic_multitask(kappa, 0.0, 1.0, 0.0).gamma_rule());
  const TimeGrid grid(1.0, quick(ctx) ? 20 : 50);
  const std::size_t reps = quick(ctx) ? 50 : 200;
  const double step = quick(ctx) ? 1.0 : 0.25;
  const ParetoScan scan = pareto_deviation_scan(model, contract, grid, ctx.seed.derive(5), reps, -3.0, 3.0, step, ctx.pool);
  const bool reward_ok = std::fabs(scan.recommended.mean - contract.initial_value) <= 3.0 * scan.recommended.se;
  r.passed = scan.violations == 0 && reward_ok;
  r.metrics = {{"deviations", scan.deviations},         {"violations", scan.violations},
               {"best_gain", scan.best_gain},           {"best_gain_se", scan.best_gain_se},
               {"best_a1", scan.best_a1},               {"best_a2", scan.best_a2},
               {"recommended_reward", scan.recommended.mean}, {"recommended_se", scan.recommended.se}};
  std::ostringstream detail;
  detail << scan.deviations << " deviations, " << scan.violations << " improving; best gain " << num(scan.best_gain)
         << " at (" << scan.best_a1 << "," << scan.best_a2 << "); reward at alpha_hat " << num(scan.recommended.mean)
         << "+-" << num(scan.recommended.se) << " vs Y0=" << contract.initial_value;
  r.detail = detail.str();
  return r;
}

CheckResult check_hamiltonian_envelope(const CheckContext& ctx) {
  CheckResult r;
  r.id = 6;
  r.name = "hamiltonian envelope";
  const std::size_t tuples = quick(ctx) ? 200 : 1000;
  const std::size_t probes = 1000;
  std::vector<std::pair<std::string, ModelSpec>> models;
  models.emplace_back("quadratic_generic",
                      quadratic_generic_model(QuadraticGenericParams{}, 0.0, 1.0, InitialLaw::normal(0.0, 1.0)));
  models.emplace_back("multitask", multitask(0.5, 10.0, InitialLaw::normal(0.0, 1.0)));

  Engine engine = ctx.seed.derive(6).substream(0, 0);
  auto uniform = [&engine](double lo, double hi) { return boost::random::uniform_real_distribution<double>(lo, hi)(engine); };
  std::size_t violations = 0, equality_failures = 0, numeric_failures = 0;
  double worst_equality = 0.0, worst_numeric = 0.0;
  SnapshotHolder snap;
  std::vector<double> states(5);
  for (const auto& [label, model] : models) {
    for (std::size_t k = 0; k < tuples; ++k) {
      const double t = uniform(0.0, 1.0);
      const double x = uniform(-3.0, 3.0);
      const double e = uniform(-1.0, 1.0);
      const double z = uniform(-3.0, 3.0);
      for (double& s : states) s = uniform(-2.0, 2.0);
      make_snapshot(model, t, states, snap);
      const ReducedCoefficients rc = reduced_coefficients(model, t, x, snap.snapshot, e, z);
      const double h_tol = 1e-10 * (1.0 + std::fabs(rc.hamiltonian));
      const double lo = model.action_bounds.lo, hi = model.action_bounds.hi;
      for (std::size_t p = 0; p < probes; ++p) {
        const double a = lo + (hi - lo) * static_cast<double>(p) / static_cast<double>(probes - 1);
        if (hamiltonian_h(model, t, x, snap.snapshot, e, z, a) > rc.hamiltonian + h_tol) ++violations;
      }
      const double eq = std::fabs(rc.hamiltonian - hamiltonian_h(model, t, x, snap.snapshot, e, z, rc.action));
      worst_equality = std::max(worst_equality, eq);
      if (eq > 1e-8) ++equality_failures;
      const double sigma = model.volatility(t, x);
      const double a_num = maximize_hamiltonian_numeric(model, t, x, snap.snapshot, e, scale_by_inverse_vol(z, sigma));
      const double gap = std::fabs(hamiltonian_h(model, t, x, snap.snapshot, e, z, a_num) - rc.hamiltonian);
      worst_numeric = std::max(worst_numeric, gap);
      if (gap > 1e-8 * (1.0 + std::fabs(rc.hamiltonian))) ++numeric_failures;
    }
  }
  r.passed = violations == 0 && equality_failures == 0 && numeric_failures == 0;
  r.metrics = {{"tuples_per_model", tuples}, {"probes", probes}, {"violations", violations},
               {"equality_failures", equality_failures}, {"worst_equality_gap", worst_equality},
               {"numeric_failures", numeric_failures}, {"worst_numeric_gap", worst_numeric}};
  std::ostringstream detail;
  detail << violations << " probe violations over " << 2 * tuples << " tuples x " << probes
         << " actions; max |H - h(alpha_hat)|=" << worst_equality << "; numeric maximizer gap " << worst_numeric;
  r.detail = detail.str();
  return r;
}

CheckResult check_propagation_of_chaos(const CheckContext& ctx) {
  CheckResult r;
  r.id = 7;
  r.name = "propagation of chaos";
  const double kappa = 0.5;
  const ModelSpec model = multitask(kappa, 10.0, InitialLaw::normal(0.0, 1.0));
  ControlSet controls;
  controls.gamma = analytic_multitask(kappa, 0.0, 1.0, 0.0).gamma_rule();
  const TimeGrid grid(1.0, quick(ctx) ? 50 : 100);
  const std::size_t n_proxy = quick(ctx) ? 50000 : 100000;
  const std::vector<std::size_t> ns{100, 1000, 10000};
  const std::size_t seeds = 20;
  EngineOptions options;
  options.pool = ctx.pool;
  const EmpiricalMeasure proxy = simulate_terminal_measure(model, controls, n_proxy, grid, ctx.seed.derive(7000), options);
  std::vector<double> scales, medians;
  json rows = json::array();
  for (std::size_t n : ns) {
    std::vector<double> w(seeds);
    for (std::size_t s = 0; s < seeds; ++s) {
      const EmpiricalMeasure mu = simulate_terminal_measure(model, controls, n, grid, ctx.seed.derive(7001 + s), options);
      w[s] = wasserstein_p(mu, proxy, 1.0);
    }
    std::sort(w.begin(), w.end());
    const double median = seeds % 2 == 1 ? w[seeds / 2] : 0.5 * (w[seeds / 2 - 1] + w[seeds / 2]);
    scales.push_back(static_cast<double>(n));
    medians.push_back(median);
    rows.push_back({{"n", n}, {"median_w1", median}});
  }
  const RateFit fit = fit_rate(scales, medians);
  r.passed = fit.slope >= -0.65 && fit.slope <= -0.35;
  r.metrics = {{"cells", rows}, {"slope", fit.slope}, {"r_squared", fit.r_squared}, {"n_proxy", n_proxy}};
  std::ostringstream detail;
  detail << "slope=" << num(fit.slope) << " R2=" << num(fit.r_squared) << "; medians:";
  for (std::size_t j = 0; j < ns.size(); ++j) detail << " " << ns[j] << ":" << num(medians[j]);
  r.detail = detail.str();
  return r;
}

CheckResult check_policy_recovery(const CheckContext& ctx) {
  CheckResult r;
  r.id = 8;
  r.name = "policy-search recovery";
  const double kappa = 0.5;
  const ModelSpec model = multitask(kappa, 10.0, InitialLaw::normal(0.0, 1.0));
  const std::size_t intervals = quick(ctx) ? 4 : 8;
  const TimeGrid grid(1.0, quick(ctx) ? 40 : 80);
  const std::size_t n_proxy = quick(ctx) ? 1000 : 2000;
  PolicyParam policy = PolicyParam::uniform(1.0, intervals);
  std::fill(policy.gamma_c0.begin(), policy.gamma_c0.end(), 1.0);
  policy.gamma_state_free = true;
  OptimizeOptions opts;
  opts.budget = quick(ctx) ? 1500 : 6000;
  opts.objective.antithetic = true;
  opts.objective.pool = ctx.pool;
  const OptimizeResult res = optimize_policy(model, policy, n_proxy, grid, ctx.seed.derive(8), opts);
  const MultitaskAnalytic an = analytic_multitask(kappa, 0.0, 1.0, 0.0);

  double worst_knot = 0.0, worst_state = 0.0;
  json knots = json::array();
  for (std::size_t j = 0; j < intervals; ++j) {
    const double mid = 0.5 * (res.best.knots[j] + res.best.knots[j + 1]);
    worst_knot = std::max(worst_knot, std::fabs(res.best.gamma_c0[j] - an.gamma_hat(mid)));
    worst_state = std::max(worst_state, std::fabs(res.best.gamma_c1[j]));
    knots.push_back({{"t_mid", mid}, {"c0", res.best.gamma_c0[j]}, {"c1", res.best.gamma_c1[j]},
                     {"gamma_hat", an.gamma_hat(mid)}});
  }
  const double value_gap = std::fabs(res.value.value - an.value);
  r.passed = value_gap <= 0.02 && worst_knot <= 0.05 && worst_state <= 0.05 && res.value.value >= res.initial.value;
  r.metrics = {{"value", res.value.value},    {"se", res.value.se},         {"closed_form", an.value},
               {"initial_value", res.initial.value}, {"evaluations", res.evaluations}, {"converged", res.converged},
               {"worst_knot_error", worst_knot},     {"worst_state_coefficient", worst_state}, {"knots", knots}};
  std::ostringstream detail;
  detail << "J=" << num(res.value.value) << " closed form=" << num(an.value) << " max knot err=" << num(worst_knot)
         << " max |c1|=" << num(worst_state) << " evals=" << res.evaluations << " converged=" << res.converged;
  r.detail = detail.str();
  return r;
}

CheckResult check_worker_invariance(const CheckContext& ctx) {
  CheckResult r;
  r.id = 9;
  r.name = "worker-count invariance";
  const double kappa = 0.5;
  const ModelSpec model = multitask(kappa, 10.0, InitialLaw::normal(0.0, 1.0));
  const MultitaskAnalytic an = analytic_multitask(kappa, 0.0, 1.0, 0.0);
  ControlSet controls;
  controls.gamma = an.gamma_rule();
  const TimeGrid grid(1.0, 20);
  const Contract contract = make_contract(model, an.gamma_rule());
  WorkerPool one(1), three(3);
  EngineOptions o1, o3;
  o1.pool = &one;
  o3.pool = &three;
  const SeedSpec seed = ctx.seed.derive(9);
  const auto a = simulate_particles(model, controls, 3000, grid, seed, o1);
  const auto b = simulate_particles(model, controls, 3000, grid, seed, o3);
  const bool paths_equal =
      a.paths.raw_states() == b.paths.raw_states() && a.paths.raw_increments() == b.paths.raw_increments();
  const auto sa = study_contract(model, contract, 20, grid, seed, 64, &one);
  const auto sb = study_contract(model, contract, 20, grid, seed, 64, &three);
  bool runs_equal = true;
  for (std::size_t k = 0; k < sa.runs.size(); ++k) {
    runs_equal = runs_equal && sa.runs[k].xi == sb.runs[k].xi && sa.runs[k].principal_payoff == sb.runs[k].principal_payoff;
  }
  r.passed = paths_equal && runs_equal;
  r.metrics = {{"paths_identical", paths_equal}, {"replications_identical", runs_equal}};
  r.detail = std::string("paths ") + (paths_equal ? "identical" : "differ") + ", contract replications " +
             (runs_equal ? "identical" : "differ") + " across 1 and 3 workers";
  return r;
}

CheckResult check_numeric_baseline(const CheckContext& ctx) {
  CheckResult r;
  r.id = 10;
  r.name = "numeric baseline";
  const std::size_t n = quick(ctx) ? 20000 : 100000;
  const TimeGrid grid(1.0, 100);
  EngineOptions options;
  options.pool = ctx.pool;

  // Zero drift, unit volatility.
  const ModelSpec flat = multitask(0.0, std::numeric_limits<double>::infinity(), InitialLaw::constant(0.0));
  const EmpiricalMeasure terminal = simulate_terminal_measure(flat, ControlSet{}, n, grid, ctx.seed.derive(10), options);
  const double mean = terminal.mean();
  std::vector<double> sq(terminal.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = (terminal.samples()[i] - mean) * (terminal.samples()[i] - mean);
  const double var = sample_variance(terminal.samples());
  const double var_se = estimate_mean(sq).se;
  const bool var_ok = std::fabs(var - grid.horizon()) <= 3.0 * var_se;

  // Weak error of the ensemble mean; antithetic pairs remove the noise.
  auto mean_error = [&](double kappa, std::size_t steps) {
    const ModelSpec model = multitask(kappa, std::numeric_limits<double>::infinity(), InitialLaw::constant(0.0));
    ControlSet controls;
    controls.gamma = analytic_multitask(kappa, 0.0, 1.0, 0.0).gamma_rule();
    EngineOptions anti = options;
    anti.antithetic = true;
    const EmpiricalMeasure mu =
        simulate_terminal_measure(model, controls, 1000, TimeGrid(1.0, steps), ctx.seed.derive(11), anti);
    return std::fabs(mu.mean() - exp_square_integral(kappa, 1.0));
  };
  const double flat_error = mean_error(0.0, 25);
  const bool flat_ok = flat_error <= 1e-12;
  std::vector<double> errors;
  for (std::size_t steps : {25, 50, 100}) errors.push_back(mean_error(0.5, steps));
  const double ratio1 = errors[0] / errors[1];
  const double ratio2 = errors[1] / errors[2];
  const bool halving_ok = ratio1 >= 1.7 && ratio2 >= 1.7;

  r.passed = var_ok && flat_ok && halving_ok;
  r.metrics = {{"variance", var},           {"variance_se", var_se}, {"kappa0_mean_error", flat_error},
               {"errors_kappa_0.5", errors}, {"ratio_1", ratio1},     {"ratio_2", ratio2}};
  std::ostringstream detail;
  detail << "Var(X_T)=" << num(var) << "+-" << num(var_se) << "; k=0 mean error " << flat_error
         << " (Euler exact for constant drift); k=0.5 errors " << num(errors[0]) << "," << num(errors[1]) << ","
         << num(errors[2]) << " ratios " << num(ratio1) << "," << num(ratio2);
  r.detail = detail.str();
  return r;
}

const std::vector<CheckEntry>& check_registry() {
  static const std::vector<CheckEntry> entries = {
      {1, "multitask oracle value", check_multitask_value},
      {2, "contract identity", check_contract_identity},
      {3, "gap bound in n", check_gap_bound},
      {4, "truncation term in b_bar", check_truncation_term},
      {5, "pareto self-consistency", check_pareto},
      {6, "hamiltonian envelope", check_hamiltonian_envelope},
      {7, "propagation of chaos", check_propagation_of_chaos},
      {8, "policy-search recovery", check_policy_recovery},
      {9, "worker-count invariance", check_worker_invariance},
      {10, "numeric baseline", check_numeric_baseline},
  };
  return entries;
}

}  // namespace mfpa
