#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfpa/contracts.hpp"
#include "mfpa/model.hpp"
#include "mfpa/sde_engine.hpp"
#include "mfpa/stats.hpp"

namespace mfpa {

/// Symmetric n-agent policy. `scaled_z` is n Z^i as a function of (t, X^i),
/// so agents play alpha_hat(..., sigma^{-1} scaled_z).
struct NPlayerPolicy {
  Feedback scaled_z;
  Feedback aleph;
  double truncation = std::numeric_limits<double>::infinity();

  static NPlayerPolicy from_contract(const Contract& contract);
};

/// Forward rollout of dY = -(1/n) sum_i L_hat_i dt + sum_i Z^i dW^i.
class NPlayerLedger : public PathObserver {
 public:
  NPlayerLedger(const ModelSpec& model, double initial_value) : model_(model), y_(initial_value) {}

  void on_step(const StepView& step) override;
  void on_terminal(const TerminalView& terminal) override;

  double continuation() const { return y_; }
  double martingale() const { return martingale_; }
  double xi() const { return xi_; }
  double payoff() const { return payoff_; }

 private:
  const ModelSpec& model_;
  double y_;
  double martingale_ = 0.0;
  double principal_running_ = 0.0;
  double xi_ = 0.0;
  double payoff_ = 0.0;
};

struct NPlayerValue {
  Estimate inside;      // E[U(payoff)]
  Estimate outside;     // U(E[payoff])
  Estimate payoff;      // E[payoff]
  Estimate martingale;  // sum_i int Z^i dW^i at T
  std::vector<double> payoffs;
};

NPlayerValue estimate_n_player_value(const ModelSpec& model, const NPlayerPolicy& policy, std::size_t n,
                                     const TimeGrid& grid, std::size_t replications, const SeedSpec& seed,
                                     WorkerPool* pool = nullptr, std::optional<double> initial_value = std::nullopt);

struct GapCell {
  std::size_t n = 0;
  double b_bar = 0.0;
  double value = 0.0;     // J_{n,P}
  double value_se = 0.0;
  double target = 0.0;    // U(V_hat)
  double gap = 0.0;
  double se = 0.0;
  double runtime_ms = 0.0;
};

struct GapSweepSpec {
  std::vector<std::size_t> ns;
  std::vector<double> b_bars;
  std::size_t replications = 1000;
  /// Builds the model for a given interaction clamp.
  std::function<ModelSpec(double b_bar)> model_for;
  /// Limit value V_hat for a given clamp (usually the closed form).
  std::function<double(double b_bar)> limit_value;
  /// Contract policy for a given model.
  std::function<NPlayerPolicy(const ModelSpec&)> policy_for;
};

/// Gaps U(V_hat) - J_{n,P} on every (n, b_bar) cell. All cells share the
/// master seed, so particle i sees the same noise in every cell.
std::vector<GapCell> gap_sweep(const GapSweepSpec& spec, const TimeGrid& grid, const SeedSpec& seed,
                               WorkerPool* pool = nullptr);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t used = 0;
};

/// Least squares of log(gap) on log(scale); non-positive gaps are dropped and
/// fewer than three remaining points raise InsufficientDataError.
RateFit fit_rate(std::span<const double> scales, std::span<const double> gaps);

/// Monte Carlo evaluation of the multitask closed-form reward
///   E[U(-R + e^{kT} mean(iota) + (1/2) int gamma_hat^2 dt + c (1/n) sum_i int gamma_hat dW^i)]
/// with the noise factor c as a parameter.
Estimate multitask_closed_form_reward(const MultitaskParams& params, double reservation, double horizon,
                                      const InitialLaw& law, const std::function<double(double)>& utility,
                                      std::size_t n, const TimeGrid& grid, std::size_t replications,
                                      const SeedSpec& seed, double noise_factor = 2.0);

void write_gap_csv(const std::string& path, std::span<const GapCell> cells, bool zero_runtime = false);

}  // namespace mfpa
