#pragma once

#include <cmath>
#include <vector>

#include "mfpa/model.hpp"

namespace testing_support {

// Owns the states and features behind a MeasureSnapshot.
struct Snapshot {
  std::vector<double> states;
  std::vector<double> features;
  mfpa::MeasureSnapshot view;

  Snapshot(const mfpa::ModelSpec& model, double t, std::vector<double> xs) : states(std::move(xs)) {
    model.compute_features(t, states, features);
    view.time = t;
    view.states = states;
    view.features = features;
  }
};

// sigma = 1, b = a, L = -(a - target)^2 / 2, identity g and friends, no
// analytic maximizer, so every action goes through the numeric search.
inline mfpa::ModelSpec quadratic_effort_model(double target) {
  mfpa::ModelSpec m;
  m.name = "quadratic-effort";
  m.drift = [](double, double, const mfpa::MeasureSnapshot&, double, double a) { return a; };
  m.volatility = [](double, double) { return 1.0; };
  m.running_cost = [target](double, double, const mfpa::MeasureSnapshot&, double, double a) {
    return -0.5 * (a - target) * (a - target);
  };
  m.terminal_utility = [](const mfpa::MeasureSnapshot&, double e) { return e; };
  m.terminal_utility_inverse = [](const mfpa::MeasureSnapshot&, double y) { return y; };
  m.principal_running_cost = [](double, double) { return 0.0; };
  m.principal_terminal_cost = [](const mfpa::MeasureSnapshot&, double e) { return e; };
  m.production_utility = [](double x) { return x; };
  m.principal_utility = mfpa::identity_utility;
  m.action_bounds = {-5.0, 5.0};
  return m;
}

// Constant drift `b`, constant volatility `s`, zero costs.
inline mfpa::ModelSpec constant_coefficient_model(double b, double s) {
  mfpa::ModelSpec m = quadratic_effort_model(0.0);
  m.name = "constant";
  m.drift = [b](double, double, const mfpa::MeasureSnapshot&, double, double) { return b; };
  m.volatility = [s](double, double) { return s; };
  m.running_cost = [](double, double, const mfpa::MeasureSnapshot&, double, double) { return 0.0; };
  m.analytic_maximizer = [](double, double, const mfpa::MeasureSnapshot&, double, double) { return 0.0; };
  m.sigma_min = 0.0;
  return m;
}

}  // namespace testing_support
