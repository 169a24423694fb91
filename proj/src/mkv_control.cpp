#include "mfpa/mkv_control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include "mfpa/errors.hpp"

namespace mfpa {

PolicyParam PolicyParam::uniform(double horizon, std::size_t intervals) {
  if (intervals == 0) throw ConfigError("policy.knots", "need at least one interval");
  PolicyParam p;
  p.knots.resize(intervals + 1);
  for (std::size_t j = 0; j <= intervals; ++j) {
    p.knots[j] = j == intervals ? horizon : horizon * static_cast<double>(j) / static_cast<double>(intervals);
  }
  p.gamma_c0.assign(intervals, 0.0);
  p.gamma_c1.assign(intervals, 0.0);
  p.aleph_c0.assign(intervals, 0.0);
  p.aleph_c1.assign(intervals, 0.0);
  return p;
}

std::size_t PolicyParam::interval_of(double t) const {
  const std::size_t m = intervals();
  // Grid times and knots are computed independently; absorb rounding at knots.
  const double slack = 1e-12 * std::max(1.0, std::fabs(knots.back()));
  auto it = std::upper_bound(knots.begin(), knots.end(), t + slack);
  std::size_t j = it == knots.begin() ? 0 : static_cast<std::size_t>(it - knots.begin()) - 1;
  return std::min(j, m - 1);
}

double PolicyParam::gamma(double t, double x) const {
  const std::size_t j = interval_of(t);
  return gamma_c0[j] + gamma_c1[j] * x;
}

double PolicyParam::aleph(double t, double x) const {
  const std::size_t j = interval_of(t);
  return aleph_c0[j] + aleph_c1[j] * x;
}

Feedback PolicyParam::gamma_rule() const {
  return [p = *this](double t, double x) { return p.gamma(t, x); };
}

Feedback PolicyParam::aleph_rule() const {
  return [p = *this](double t, double x) { return p.aleph(t, x); };
}

std::size_t PolicyParam::free_count() const {
  const std::size_t m = intervals();
  return m * (static_cast<std::size_t>(gamma_free) + static_cast<std::size_t>(gamma_state_free) +
              static_cast<std::size_t>(aleph_free) + static_cast<std::size_t>(aleph_state_free));
}

std::vector<double> PolicyParam::pack() const {
  std::vector<double> out;
  out.reserve(free_count());
  if (gamma_free) out.insert(out.end(), gamma_c0.begin(), gamma_c0.end());
  if (gamma_state_free) out.insert(out.end(), gamma_c1.begin(), gamma_c1.end());
  if (aleph_free) out.insert(out.end(), aleph_c0.begin(), aleph_c0.end());
  if (aleph_state_free) out.insert(out.end(), aleph_c1.begin(), aleph_c1.end());
  return out;
}

namespace {

double clamp_to(double v, const Interval& box) { return std::min(std::max(v, box.lo), box.hi); }

}  // namespace

void PolicyParam::unpack(std::span<const double> values) {
  if (values.size() != free_count()) throw Error(ErrorCode::kInvalidArgument, "policy vector has the wrong length");
  std::size_t pos = 0;
  auto take = [&](bool flag, std::vector<double>& dst, const Interval& box) {
    if (!flag) return;
    for (double& v : dst) v = clamp_to(values[pos++], box);
  };
  take(gamma_free, gamma_c0, gamma_box.c0);
  take(gamma_state_free, gamma_c1, gamma_box.c1);
  take(aleph_free, aleph_c0, aleph_box.c0);
  take(aleph_state_free, aleph_c1, aleph_box.c1);
}

void PolicyParam::clamp_to_box() {
  for (double& v : gamma_c0) v = clamp_to(v, gamma_box.c0);
  for (double& v : gamma_c1) v = clamp_to(v, gamma_box.c1);
  for (double& v : aleph_c0) v = clamp_to(v, aleph_box.c0);
  for (double& v : aleph_c1) v = clamp_to(v, aleph_box.c1);
}

void PolicyParam::validate(double horizon) const {
  if (knots.size() < 2) throw ConfigError("policy.knots", "need at least two knots");
  if (std::fabs(knots.front()) > 1e-12) throw ConfigError("policy.knots", "first knot must be 0");
  if (std::fabs(knots.back() - horizon) > 1e-12 * std::max(1.0, horizon)) {
    throw ConfigError("policy.knots", "last knot must equal the horizon");
  }
  for (std::size_t j = 1; j < knots.size(); ++j) {
    if (!(knots[j] > knots[j - 1])) throw ConfigError("policy.knots", "knots must be strictly increasing");
  }
  const std::size_t m = intervals();
  if (gamma_c0.size() != m || gamma_c1.size() != m || aleph_c0.size() != m || aleph_c1.size() != m) {
    throw ConfigError("policy.coefficients", "one coefficient per interval is required");
  }
  for (const Interval* box : {&gamma_box.c0, &gamma_box.c1, &aleph_box.c0, &aleph_box.c1}) {
    if (!(box->lo <= box->hi)) throw ConfigError("policy.bounds", "empty coefficient box");
  }
}

namespace {

class ObjectiveObserver : public PathObserver {
 public:
  explicit ObjectiveObserver(const ModelSpec& model) : model_(model) {}

  void on_step(const StepView& s) override {
    const std::size_t n = s.state.size();
    if (running_.empty()) {
      running_.assign(n, 0.0);
      principal_.assign(n, 0.0);
    }
    const bool principal_cost = static_cast<bool>(model_.principal_running_cost);
    for (std::size_t i = 0; i < n; ++i) {
      running_[i] += s.running_hat[i] * s.dt;
      if (principal_cost) principal_[i] += model_.principal_running_cost(s.time, s.payment[i]) * s.dt;
    }
  }

  void on_terminal(const TerminalView& terminal) override {
    terminal_.assign(terminal.state.begin(), terminal.state.end());
    features_.assign(terminal.measure->features.begin(), terminal.measure->features.end());
    if (running_.empty()) {
      running_.assign(terminal_.size(), 0.0);
      principal_.assign(terminal_.size(), 0.0);
    }
  }

  std::vector<double> running_, principal_, terminal_, features_;

 private:
  const ModelSpec& model_;
};

}  // namespace

ObjectiveEstimate evaluate_limit_objective(const ModelSpec& model, const Feedback& gamma, const Feedback& aleph,
                                           std::size_t n_proxy, const TimeGrid& grid, const SeedSpec& seed,
                                           const ObjectiveOptions& options) {
  if (options.antithetic && n_proxy % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "antithetic proxy needs an even particle count");
  }
  ControlSet controls;
  controls.gamma = gamma;
  controls.aleph = aleph;
  controls.truncation = options.truncation;
  ObjectiveObserver obs(model);
  PathObserver* observers[] = {&obs};
  EngineOptions engine;
  engine.antithetic = options.antithetic;
  engine.pool = options.pool;
  run_particle_system(model, controls, n_proxy, grid, seed, engine, observers);

  const std::size_t n = n_proxy;
  const double y0 = options.initial_value.value_or(model.reservation);
  double mean_running = 0.0, mean_value = 0.0, mean_x = 0.0;
  std::vector<double> base(n);
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = model.production_utility(obs.terminal_[i]) - obs.principal_[i];
    mean_running += obs.running_[i];
    mean_value += base[i];
    mean_x += obs.terminal_[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  mean_running *= inv_n;
  mean_value *= inv_n;
  mean_x *= inv_n;

  MeasureSnapshot terminal;
  terminal.time = grid.horizon();
  terminal.states = obs.terminal_;
  terminal.features = obs.features_;
  ObjectiveEstimate out;
  out.y_terminal = y0 - mean_running;
  out.value = mean_value - model.reduced_principal_terminal_cost(terminal, out.y_terminal);
  out.mean_terminal_state = mean_x;
  if (!std::isfinite(out.value)) throw NumericDomainError("limit objective is not finite");

  // Delta method through g_hat_P(mu_T, y).
  const double h = 1e-6 * (1.0 + std::fabs(out.y_terminal));
  const double slope = (model.reduced_principal_terminal_cost(terminal, out.y_terminal + h) -
                        model.reduced_principal_terminal_cost(terminal, out.y_terminal - h)) /
                       (2.0 * h);
  std::vector<double> contrib;
  if (options.antithetic) {
    contrib.resize(n / 2);
    for (std::size_t p = 0; p < n / 2; ++p) {
      const std::size_t i = 2 * p, j = 2 * p + 1;
      contrib[p] = 0.5 * (base[i] + slope * obs.running_[i] + base[j] + slope * obs.running_[j]);
    }
  } else {
    contrib.resize(n);
    for (std::size_t i = 0; i < n; ++i) contrib[i] = base[i] + slope * obs.running_[i];
  }
  out.se = estimate_mean(contrib).se;
  return out;
}

ObjectiveEstimate evaluate_limit_objective(const ModelSpec& model, const PolicyParam& policy, std::size_t n_proxy,
                                           const TimeGrid& grid, const SeedSpec& seed,
                                           const ObjectiveOptions& options) {
  policy.validate(grid.horizon());
  return evaluate_limit_objective(model, policy.gamma_rule(), policy.aleph_rule(), n_proxy, grid, seed, options);
}

namespace {

constexpr double kPenalty = 1e300;

struct SearchContext {
  const ModelSpec* model = nullptr;
  PolicyParam policy;
  std::size_t n_proxy = 0;
  const TimeGrid* grid = nullptr;
  SeedSpec seed;
  const OptimizeOptions* options = nullptr;
  std::size_t evaluations = 0;
  double best = -std::numeric_limits<double>::infinity();
  ObjectiveEstimate best_estimate;
  PolicyParam best_policy;
  std::exception_ptr error;
};

double search_objective(const gsl_vector* v, void* raw) {
  auto& ctx = *static_cast<SearchContext*>(raw);
  if (ctx.error || ctx.evaluations >= ctx.options->budget) return kPenalty;
  std::vector<double> x(v->size);
  for (std::size_t i = 0; i < v->size; ++i) x[i] = gsl_vector_get(v, i);
  ctx.policy.unpack(x);
  ++ctx.evaluations;
  try {
    const ObjectiveEstimate est =
        evaluate_limit_objective(*ctx.model, ctx.policy, ctx.n_proxy, *ctx.grid, ctx.seed, ctx.options->objective);
    if (est.value > ctx.best) {
      ctx.best = est.value;
      ctx.best_estimate = est;
      ctx.best_policy = ctx.policy;
    }
    return -est.value;
  } catch (const SimulationBlowupError&) {
    return kPenalty;
  } catch (const NumericDomainError&) {
    // Overflowing costs at extreme coefficients; the start point was finite.
    return kPenalty;
  } catch (...) {
    ctx.error = std::current_exception();
    return kPenalty;
  }
}

}  // namespace

OptimizeResult optimize_policy(const ModelSpec& model, const PolicyParam& initial, std::size_t n_proxy,
                               const TimeGrid& grid, const SeedSpec& seed, const OptimizeOptions& options) {
  if (options.budget < 1) throw ConfigError("policy.budget", "must be at least 1");
  PolicyParam start = initial;
  start.validate(grid.horizon());
  start.clamp_to_box();

  OptimizeResult result;
  result.initial = evaluate_limit_objective(model, start, n_proxy, grid, seed, options.objective);
  result.best = start;
  result.value = result.initial;
  result.evaluations = 1;

  const std::size_t dim = start.free_count();
  if (dim == 0 || options.budget == 1) {
    result.converged = dim == 0;
    result.trace.push_back(TraceRow{0, 1, result.initial.value, 0.0});
    return result;
  }

  SearchContext ctx;
  ctx.model = &model;
  ctx.policy = start;
  ctx.n_proxy = n_proxy;
  ctx.grid = &grid;
  ctx.seed = seed;
  ctx.options = &options;
  ctx.evaluations = 1;
  ctx.best = result.initial.value;
  ctx.best_estimate = result.initial;
  ctx.best_policy = start;

  gsl_error_handler_t* previous = gsl_set_error_handler_off();
  const gsl_multimin_fminimizer_type* type = gsl_multimin_fminimizer_nmsimplex2;
  gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(type, dim);
  gsl_vector* x = gsl_vector_alloc(dim);
  gsl_vector* step = gsl_vector_alloc(dim);
  gsl_multimin_function fn{&search_objective, dim, &ctx};

  std::size_t iteration = 0;
  double previous_best = ctx.best;
  for (std::size_t attempt = 0; attempt <= options.max_restarts; ++attempt) {
    const auto packed = ctx.best_policy.pack();
    for (std::size_t i = 0; i < dim; ++i) gsl_vector_set(x, i, packed[i]);
    gsl_vector_set_all(step, options.initial_step);
    if (gsl_multimin_fminimizer_set(solver, &fn, x, step) != GSL_SUCCESS) break;
    bool converged = false;
    while (ctx.evaluations < options.budget && !ctx.error) {
      const int status = gsl_multimin_fminimizer_iterate(solver);
      ++iteration;
      const double size = gsl_multimin_fminimizer_size(solver);
      result.trace.push_back(TraceRow{iteration, ctx.evaluations, ctx.best, size});
      if (status != GSL_SUCCESS) break;
      if (size < options.size_tolerance) {
        converged = true;
        break;
      }
    }
    result.converged = converged;
    if (attempt > 0) ++result.restarts;
    if (!converged || ctx.error) break;
    // A restart that gains nothing confirms the optimum.
    if (attempt > 0 && ctx.best - previous_best <= 1e-9 * (1.0 + std::fabs(ctx.best))) break;
    previous_best = ctx.best;
  }

  gsl_vector_free(step);
  gsl_vector_free(x);
  gsl_multimin_fminimizer_free(solver);
  gsl_set_error_handler(previous);
  if (ctx.error) std::rethrow_exception(ctx.error);

  result.best = ctx.best_policy;
  result.value = ctx.best_estimate;
  result.evaluations = ctx.evaluations;
  return result;
}

void write_trace_csv(const std::string& path, std::span<const TraceRow> trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path);
  out << std::setprecision(17) << "iteration,evaluations,best_objective,simplex_size\n";
  for (const auto& row : trace) {
    out << row.iteration << "," << row.evaluations << "," << row.best << "," << row.simplex_size << "\n";
  }
}

Feedback MultitaskAnalytic::gamma_rule() const {
  return [k = kappa_bar, T = horizon](double t, double) { return std::exp(k * (T - t)); };
}

double exp_square_integral(double kappa_bar, double horizon) {
  if (kappa_bar == 0.0) return horizon;
  return std::expm1(2.0 * kappa_bar * horizon) / (2.0 * kappa_bar);
}

MultitaskAnalytic analytic_multitask(double kappa_bar, double reservation, double horizon, double mean_iota) {
  MultitaskAnalytic out;
  out.kappa_bar = kappa_bar;
  out.horizon = horizon;
  out.value = -reservation + std::exp(kappa_bar * horizon) * mean_iota + 0.5 * exp_square_integral(kappa_bar, horizon);
  return out;
}

}  // namespace mfpa
