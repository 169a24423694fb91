#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "mfpa/rng.hpp"

namespace mfpa {

/// The measure argument seen by the coefficients at one grid time.
///
/// `features` holds the model-specific summary of `states` (for instance the
/// clamped mean), computed once per time step by ModelSpec::summarize.
struct MeasureSnapshot {
  double time = 0.0;
  std::span<const double> states;
  std::span<const double> features;
};

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool finite() const { return std::isfinite(lo) && std::isfinite(hi); }
};

/// Initial law of the production: a point mass, a Gaussian or a uniform law.
class InitialLaw {
 public:
  enum class Kind { kConstant, kNormal, kUniform };

  static InitialLaw constant(double value) { return InitialLaw(Kind::kConstant, value, 0.0); }
  static InitialLaw normal(double mean, double stddev) { return InitialLaw(Kind::kNormal, mean, stddev); }
  static InitialLaw uniform(double lo, double hi) { return InitialLaw(Kind::kUniform, lo, hi); }

  Kind kind() const { return kind_; }
  double first() const { return p1_; }
  double second() const { return p2_; }

  double mean() const { return kind_ == Kind::kUniform ? 0.5 * (p1_ + p2_) : p1_; }
  double variance() const {
    switch (kind_) {
      case Kind::kConstant: return 0.0;
      case Kind::kNormal: return p2_ * p2_;
      case Kind::kUniform: return (p2_ - p1_) * (p2_ - p1_) / 12.0;
    }
    return 0.0;
  }

  /// All supported laws are symmetric about their mean.
  double reflect(double x) const { return 2.0 * mean() - x; }

  double sample(Engine& engine) const {
    switch (kind_) {
      case Kind::kConstant: return p1_;
      case Kind::kNormal: return boost::random::normal_distribution<double>(p1_, p2_)(engine);
      case Kind::kUniform: return boost::random::uniform_real_distribution<double>(p1_, p2_)(engine);
    }
    return p1_;
  }

 private:
  InitialLaw(Kind kind, double p1, double p2) : kind_(kind), p1_(p1), p2_(p2) {}
  Kind kind_;
  double p1_;
  double p2_;
};

/// Primitive coefficients of the production model.
///
/// Every rule is pure; a ModelSpec is immutable once built and is shared by
/// all simulation workers. `summarize` may be empty when no coefficient
/// depends on the measure.
struct ModelSpec {
  using MeasureRule = std::function<double(double t, double x, const MeasureSnapshot& m, double e, double a)>;
  using TerminalRule = std::function<double(const MeasureSnapshot& terminal, double v)>;

  std::string name;
  std::function<void(double t, std::span<const double> states, std::vector<double>& features)> summarize;

  MeasureRule drift;                                  // b(t, x, m, e, a)
  std::function<double(double t, double x)> volatility;  // sigma(t, x)
  MeasureRule running_cost;                           // L(t, x, m, e, a), agents' running reward
  TerminalRule terminal_utility;                      // g(m, e)
  TerminalRule terminal_utility_inverse;              // g^{-1}(m, y)
  std::function<double(double t, double e)> principal_running_cost;  // L_P(t, e)
  TerminalRule principal_terminal_cost;               // g_P(m, e)
  std::function<double(double x)> production_utility;  // Upsilon
  std::function<double(double v)> principal_utility;    // U

  /// Optional closed-form argmax of a -> b z + L; bypasses the numeric search.
  std::function<double(double t, double x, const MeasureSnapshot& m, double e, double z)> analytic_maximizer;

  InitialLaw initial_law = InitialLaw::constant(0.0);
  double horizon = 1.0;
  double reservation = 0.0;
  Interval action_bounds{-10.0, 10.0};
  Interval payment_bounds{-10.0, 10.0};
  /// Lower bound on sigma checked during simulation. Zero only for
  /// deliberately degenerate test models.
  double sigma_min = 1e-12;

  void compute_features(double t, std::span<const double> states, std::vector<double>& out) const {
    out.clear();
    if (summarize) summarize(t, states, out);
  }

  /// g_P(m, g^{-1}(m, y)).
  double reduced_principal_terminal_cost(const MeasureSnapshot& m, double y) const {
    return principal_terminal_cost(m, terminal_utility_inverse(m, y));
  }
};

/// Tolerances of the bounded golden-section maximizer.
struct MaximizerOptions {
  double tol_a = 1e-8;
  double tol_h = 1e-10;
  std::size_t probes = 201;
};

/// h(t, x, m, e, z, a) = b * sigma^{-1} z + L.
double hamiltonian_h(const ModelSpec& model, double t, double x, const MeasureSnapshot& m, double e, double z,
                     double a);

/// Maximizer of a -> b(t, x, m, e, a) z + L(t, x, m, e, a).
///
/// Uses the model's analytic maximizer when present, otherwise a probe grid
/// over action_bounds followed by golden-section refinement of the best
/// bracket. Throws AmbiguousMaximizerError when two separated probes tie.
double maximize_hamiltonian(const ModelSpec& model, double t, double x, const MeasureSnapshot& m, double e,
                            double z, const MaximizerOptions& options = {});

/// Numeric search only, ignoring any analytic maximizer.
double maximize_hamiltonian_numeric(const ModelSpec& model, double t, double x, const MeasureSnapshot& m,
                                    double e, double z, const MaximizerOptions& options = {});

struct ReducedCoefficients {
  double action = 0.0;       // alpha_hat(t, x, m, e, sigma^{-1} z)
  double drift = 0.0;        // b_hat
  double running = 0.0;      // L_hat
  double hamiltonian = 0.0;  // H = b_hat sigma^{-1} z + L_hat
};

/// (b_hat, L_hat, H) at z. The maximizer is evaluated at sigma(t, x)^{-1} z.
ReducedCoefficients reduced_coefficients(const ModelSpec& model, double t, double x, const MeasureSnapshot& m,
                                         double e, double z, const MaximizerOptions& options = {});

/// sigma^{-1} z with 0 / 0 read as 0 (degenerate sigma with zero control).
inline double scale_by_inverse_vol(double z, double sigma) { return z == 0.0 ? 0.0 : z / sigma; }

// Utility functions for the principal.
double identity_utility(double v);
double cara_utility(double v);  // 1 - exp(-v)
std::function<double(double)> utility_by_name(const std::string& name);

struct MultitaskParams {
  double kappa_bar = 0.0;
  double b_bar = std::numeric_limits<double>::infinity();
};

/// Multitask production model: sigma = 1, b = a + kappa_bar * mean(clamp(x)),
/// L = -a^2 / 2, g = identity, Upsilon = identity, g_P = identity, L_P = 0 and
/// alpha_hat(z) = z. features[0] is the clamped mean.
ModelSpec multitask_model(const MultitaskParams& params, double reservation, double horizon, InitialLaw initial_law,
                          std::function<double(double)> utility = identity_utility);

struct QuadraticGenericParams {
  double effort_cost = 2.0;       // c
  double effort_target = 0.5;     // a0
  double mean_reversion = 0.3;    // theta
  double interaction = 0.4;       // kappa
  double payment_drift = 0.2;     // rho
  double payment_cost = 1.0;      // lambda
  double terminal_shift = 0.1;    // phi
  double vol_level = 0.8;         // s0
  double principal_payment_cost = 0.5;
};

/// Demonstration model exercising every coefficient:
///   sigma = s0 (1 + sin(x) / 4),  b = a - theta x + kappa mean(m) + rho e,
///   L = -c (a - a0)^2 / 2 + e - lambda e^2 / 2,  g(m, e) = e - phi mean(m_T),
///   L_P = e + lambda_P e^2 / 2,  g_P(m, e) = e,  Upsilon(x) = x.
/// Its analytic maximizer is a0 + z / c.
ModelSpec quadratic_generic_model(const QuadraticGenericParams& params, double reservation, double horizon,
                                  InitialLaw initial_law, std::function<double(double)> utility = identity_utility);

}  // namespace mfpa
