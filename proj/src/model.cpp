#include "mfpa/model.hpp"

#include <cmath>
#include <sstream>

#include "mfpa/errors.hpp"
#include "mfpa/measures.hpp"

namespace mfpa {
namespace {

double checked(double v, const char* what, double t, double x) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << what << " is not finite at t=" << t << ", x=" << x;
    throw NumericDomainError(msg.str());
  }
  return v;
}

}  // namespace

double hamiltonian_h(const ModelSpec& model, double t, double x, const MeasureSnapshot& m, double e, double z,
                     double a) {
  const double sigma = checked(model.volatility(t, x), "volatility", t, x);
  if (!(sigma > 0.0)) throw NumericDomainError("hamiltonian requires sigma(t, x) > 0");
  const double b = checked(model.drift(t, x, m, e, a), "drift", t, x);
  const double l = checked(model.running_cost(t, x, m, e, a), "running cost", t, x);
  return b * (z / sigma) + l;
}

double maximize_hamiltonian_numeric(const ModelSpec& model, double t, double x, const MeasureSnapshot& m,
                                    double e, double z, const MaximizerOptions& options) {
  const Interval bounds = model.action_bounds;
  if (!bounds.finite() || !(bounds.hi > bounds.lo))
    throw NumericDomainError("numeric Hamiltonian maximization needs finite action bounds");
  const std::size_t probes = std::max<std::size_t>(options.probes, 3);

  auto objective = [&](double a) {
    return checked(model.drift(t, x, m, e, a) * z + model.running_cost(t, x, m, e, a), "Hamiltonian", t, x);
  };

  const double spacing = (bounds.hi - bounds.lo) / static_cast<double>(probes - 1);
  std::vector<double> values(probes);
  std::size_t best = 0;
  for (std::size_t j = 0; j < probes; ++j) {
    values[j] = objective(bounds.lo + spacing * static_cast<double>(j));
    if (values[j] > values[best]) best = j;
  }

  // A second, separated local maximum of (almost) equal height means the
  // maximizer is not unique.
  for (std::size_t j = 0; j < probes; ++j) {
    const std::size_t gap = j > best ? j - best : best - j;
    if (gap < 2) continue;
    const bool left_ok = j == 0 || values[j] >= values[j - 1];
    const bool right_ok = j + 1 == probes || values[j] >= values[j + 1];
    if (left_ok && right_ok && values[best] - values[j] < options.tol_h &&
        spacing * static_cast<double>(gap) > options.tol_a) {
      std::ostringstream msg;
      msg << "ambiguous Hamiltonian maximizer near a=" << bounds.lo + spacing * static_cast<double>(best)
          << " and a=" << bounds.lo + spacing * static_cast<double>(j);
      throw AmbiguousMaximizerError(msg.str());
    }
  }

  const double best_probe = bounds.lo + spacing * static_cast<double>(best);
  double lo = best == 0 ? bounds.lo : best_probe - spacing;
  double hi = best + 1 == probes ? bounds.hi : best_probe + spacing;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = objective(c);
  double fd = objective(d);
  while (hi - lo > options.tol_a) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = objective(d);
    }
  }
  const double refined = 0.5 * (lo + hi);
  return objective(refined) >= values[best] ? refined : best_probe;
}

double maximize_hamiltonian(const ModelSpec& model, double t, double x, const MeasureSnapshot& m, double e,
                            double z, const MaximizerOptions& options) {
  if (model.analytic_maximizer) return checked(model.analytic_maximizer(t, x, m, e, z), "maximizer", t, x);
  return maximize_hamiltonian_numeric(model, t, x, m, e, z, options);
}

ReducedCoefficients reduced_coefficients(const ModelSpec& model, double t, double x, const MeasureSnapshot& m,
                                         double e, double z, const MaximizerOptions& options) {
  const double sigma = checked(model.volatility(t, x), "volatility", t, x);
  ReducedCoefficients out;
  const double scaled = scale_by_inverse_vol(z, sigma);
  out.action = maximize_hamiltonian(model, t, x, m, e, scaled, options);
  out.drift = checked(model.drift(t, x, m, e, out.action), "drift", t, x);
  out.running = checked(model.running_cost(t, x, m, e, out.action), "running cost", t, x);
  out.hamiltonian = out.drift * scaled + out.running;
  return out;
}

double identity_utility(double v) { return v; }

double cara_utility(double v) { return -std::expm1(-v); }

std::function<double(double)> utility_by_name(const std::string& name) {
  if (name == "identity") return identity_utility;
  if (name == "cara" || name == "exponential") return cara_utility;
  throw ConfigError("model.utility", "unknown utility '" + name + "' (expected identity or cara)");
}

ModelSpec multitask_model(const MultitaskParams& params, double reservation, double horizon, InitialLaw initial_law,
                          std::function<double(double)> utility) {
  if (!(params.b_bar > 0.0)) throw Error(ErrorCode::kInvalidArgument, "multitask b_bar must be > 0 or infinite");
  const double kappa = params.kappa_bar;
  const double b_bar = params.b_bar;

  ModelSpec model;
  model.name = "multitask";
  model.summarize = [b_bar](double, std::span<const double> states, std::vector<double>& out) {
    out.push_back(clamped_mean(states, b_bar));
  };
  model.drift = [kappa](double, double, const MeasureSnapshot& m, double, double a) {
    return kappa == 0.0 ? a : a + kappa * m.features[0];
  };
  model.volatility = [](double, double) { return 1.0; };
  model.running_cost = [](double, double, const MeasureSnapshot&, double, double a) { return -0.5 * a * a; };
  model.terminal_utility = [](const MeasureSnapshot&, double e) { return e; };
  model.terminal_utility_inverse = [](const MeasureSnapshot&, double y) { return y; };
  model.principal_running_cost = [](double, double) { return 0.0; };
  model.principal_terminal_cost = [](const MeasureSnapshot&, double e) { return e; };
  model.production_utility = [](double x) { return x; };
  model.principal_utility = std::move(utility);
  model.analytic_maximizer = [](double, double, const MeasureSnapshot&, double, double z) { return z; };
  model.initial_law = initial_law;
  model.horizon = horizon;
  model.reservation = reservation;
  model.action_bounds = {-50.0, 50.0};
  model.payment_bounds = {-50.0, 50.0};
  return model;
}

ModelSpec quadratic_generic_model(const QuadraticGenericParams& p, double reservation, double horizon,
                                  InitialLaw initial_law, std::function<double(double)> utility) {
  if (!(p.effort_cost > 0.0)) throw Error(ErrorCode::kInvalidArgument, "effort_cost must be > 0");
  if (!(p.vol_level > 0.0)) throw Error(ErrorCode::kInvalidArgument, "vol_level must be > 0");

  ModelSpec model;
  model.name = "quadratic-generic";
  model.summarize = [](double, std::span<const double> states, std::vector<double>& out) {
    double acc = 0.0;
    for (double x : states) acc += x;
    out.push_back(states.empty() ? 0.0 : acc / static_cast<double>(states.size()));
  };
  model.drift = [p](double, double x, const MeasureSnapshot& m, double e, double a) {
    return a - p.mean_reversion * x + p.interaction * m.features[0] + p.payment_drift * e;
  };
  model.volatility = [p](double, double x) { return p.vol_level * (1.0 + 0.25 * std::sin(x)); };
  model.running_cost = [p](double, double, const MeasureSnapshot&, double e, double a) {
    const double d = a - p.effort_target;
    return -0.5 * p.effort_cost * d * d + e - 0.5 * p.payment_cost * e * e;
  };
  model.terminal_utility = [p](const MeasureSnapshot& m, double e) { return e - p.terminal_shift * m.features[0]; };
  model.terminal_utility_inverse = [p](const MeasureSnapshot& m, double y) {
    return y + p.terminal_shift * m.features[0];
  };
  model.principal_running_cost = [p](double, double e) { return e + 0.5 * p.principal_payment_cost * e * e; };
  model.principal_terminal_cost = [](const MeasureSnapshot&, double e) { return e; };
  model.production_utility = [](double x) { return x; };
  model.principal_utility = std::move(utility);
  model.analytic_maximizer = [p](double, double, const MeasureSnapshot&, double, double z) {
    return p.effort_target + z / p.effort_cost;
  };
  model.initial_law = initial_law;
  model.horizon = horizon;
  model.reservation = reservation;
  model.action_bounds = {-20.0, 20.0};
  model.payment_bounds = {-20.0, 20.0};
  model.sigma_min = 0.75 * p.vol_level;
  return model;
}

}  // namespace mfpa
