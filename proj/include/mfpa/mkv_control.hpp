#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfpa/model.hpp"
#include "mfpa/sde_engine.hpp"
#include "mfpa/stats.hpp"

namespace mfpa {

struct CoefficientBox {
  Interval c0{-10.0, 10.0};
  Interval c1{-5.0, 5.0};
};

/// Piecewise-constant-in-time, affine-in-state feedback policy:
///   gamma(t, x) = gamma_c0[j] + gamma_c1[j] x  for t in [knots[j], knots[j+1])
/// and likewise for aleph. The last interval is closed at the horizon.
struct PolicyParam {
  std::vector<double> knots;
  std::vector<double> gamma_c0, gamma_c1, aleph_c0, aleph_c1;
  CoefficientBox gamma_box, aleph_box;
  bool gamma_free = true;
  bool gamma_state_free = true;
  bool aleph_free = false;
  bool aleph_state_free = false;

  /// `intervals` equal intervals over [0, horizon], all coefficients zero.
  static PolicyParam uniform(double horizon, std::size_t intervals);

  std::size_t intervals() const { return knots.empty() ? 0 : knots.size() - 1; }
  std::size_t interval_of(double t) const;
  double gamma(double t, double x) const;
  double aleph(double t, double x) const;
  Feedback gamma_rule() const;
  Feedback aleph_rule() const;

  /// Free coefficients in the fixed order gamma_c0, gamma_c1, aleph_c0, aleph_c1.
  std::vector<double> pack() const;
  /// Inverse of pack; values are clamped into their boxes.
  void unpack(std::span<const double> values);
  std::size_t free_count() const;
  void clamp_to_box();

  /// Throws ConfigError on non-increasing knots or size mismatches.
  void validate(double horizon) const;
};

struct ObjectiveOptions {
  bool antithetic = false;
  WorkerPool* pool = nullptr;
  std::optional<double> initial_value;  // Y0, defaults to R
  double truncation = std::numeric_limits<double>::infinity();
};

struct ObjectiveEstimate {
  double value = 0.0;
  double se = 0.0;
  double y_terminal = 0.0;  // Y0 - mean int L_hat dt
  double mean_terminal_state = 0.0;
};

/// J_hat(gamma, aleph) = E[Upsilon(X_T) - int L_P dt] - g_hat_P(mu_T, Y_T) from a
/// particle proxy of the limit dynamics, with Y_T = Y0 - E[int L_hat dt].
/// A deterministic function of (policy, seed).
ObjectiveEstimate evaluate_limit_objective(const ModelSpec& model, const Feedback& gamma, const Feedback& aleph,
                                           std::size_t n_proxy, const TimeGrid& grid, const SeedSpec& seed,
                                           const ObjectiveOptions& options = {});
ObjectiveEstimate evaluate_limit_objective(const ModelSpec& model, const PolicyParam& policy, std::size_t n_proxy,
                                           const TimeGrid& grid, const SeedSpec& seed,
                                           const ObjectiveOptions& options = {});

struct OptimizeOptions {
  std::size_t budget = 2000;       // objective evaluations
  std::size_t max_restarts = 4;
  double initial_step = 0.5;
  double size_tolerance = 1e-4;    // simplex characteristic size at convergence
  ObjectiveOptions objective;
};

struct TraceRow {
  std::size_t iteration = 0;
  std::size_t evaluations = 0;
  double best = 0.0;
  double simplex_size = 0.0;
};

struct OptimizeResult {
  PolicyParam best;
  ObjectiveEstimate value;
  ObjectiveEstimate initial;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

/// Nelder-Mead over the free policy coefficients with common random numbers.
/// The returned objective is never below the initial policy's.
OptimizeResult optimize_policy(const ModelSpec& model, const PolicyParam& initial, std::size_t n_proxy,
                               const TimeGrid& grid, const SeedSpec& seed, const OptimizeOptions& options = {});

void write_trace_csv(const std::string& path, std::span<const TraceRow> trace);

struct MultitaskAnalytic {
  double kappa_bar = 0.0;
  double horizon = 1.0;
  double value = 0.0;  // V_infinity

  double gamma_hat(double t) const { return std::exp(kappa_bar * (horizon - t)); }
  Feedback gamma_rule() const;
};

/// int_0^T exp(2 k (T - t)) dt, i.e. (exp(2kT) - 1) / (2k) with the limit T at k = 0.
double exp_square_integral(double kappa_bar, double horizon);

/// gamma_hat(t) = exp(k (T - t)) and V = -R + exp(kT) E[iota] + (1/2) int gamma_hat^2 dt.
MultitaskAnalytic analytic_multitask(double kappa_bar, double reservation, double horizon, double mean_iota);

}  // namespace mfpa
