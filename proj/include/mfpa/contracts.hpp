#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mfpa/model.hpp"
#include "mfpa/sde_engine.hpp"
#include "mfpa/stats.hpp"

namespace mfpa {

/// Row-major particles x steps matrix (actions or payments along paths).
struct PathMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  PathMatrix() = default;
  PathMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double operator()(std::size_t i, std::size_t k) const { return data[i * cols + k]; }
  double& operator()(std::size_t i, std::size_t k) { return data[i * cols + k]; }
};

/// Contract built from a limit control (gamma, aleph): initial continuation
/// value Y0 >= R, truncation level l, terminal payment g^{-1}(mu_T, Y_T) and
/// instantaneous payments aleph^l(t, X^i_t).
struct Contract {
  double initial_value = 0.0;
  Feedback gamma;
  Feedback aleph;
  double truncation = std::numeric_limits<double>::infinity();
  bool symmetric_truncation = false;

  ControlSet controls() const;
  double gamma_at(double t, double x) const { return controls().gamma_at(t, x); }
};

/// Y0 defaults to the reservation utility; a smaller Y0 is rejected.
Contract make_contract(const ModelSpec& model, Feedback gamma, Feedback aleph = {},
                       double truncation = std::numeric_limits<double>::infinity(),
                       std::optional<double> initial_value = std::nullopt);

/// Streaming accumulator of the continuation process
///   Y_{k+1} = Y_k - (1/n) sum_i H_i dt + (1/n) sum_i sigma_i^{-1} gamma^l_i (X^i_{k+1} - X^i_k)
/// together with the agents' and principal's running terms.
class ContractLedger : public PathObserver {
 public:
  ContractLedger(const ModelSpec& model, double initial_value, bool record_path = false);

  void on_step(const StepView& step) override;
  void on_terminal(const TerminalView& terminal) override;

  double xi() const { return xi_; }
  double continuation() const { return y_; }
  const std::vector<double>& continuation_path() const { return path_; }
  double agent_reward() const { return agent_reward_; }
  double principal_payoff() const { return principal_payoff_; }

 private:
  const ModelSpec& model_;
  bool record_;
  double y_;
  double agent_running_ = 0.0;
  double principal_running_ = 0.0;
  double xi_ = 0.0;
  double agent_reward_ = 0.0;
  double principal_payoff_ = 0.0;
  std::vector<double> path_;
};

/// Feeds stored paths through observers as if they were being simulated,
/// recomputing every coefficient at the recorded states.
void replay_paths(const ModelSpec& model, const ControlSet& controls, const ParticlePaths& paths,
                  const MeasureFlow& flow, std::span<PathObserver* const> observers,
                  const MaximizerOptions& maximizer = {});

struct TerminalPayment {
  double xi = 0.0;
  std::vector<double> continuation;  // Y at every grid node
};

TerminalPayment evaluate_terminal_payment(const Contract& contract, const ModelSpec& model,
                                          const ParticlePaths& paths, const MeasureFlow& flow);

/// alpha_hat(t_k, X^i_k, mu_k, aleph^l, sigma^{-1} gamma^l) for every particle and step.
PathMatrix recommended_controls(const Contract& contract, const ModelSpec& model, const ParticlePaths& paths,
                                const MeasureFlow& flow);

/// aleph^l(t_k, X^i_k) for every particle and step.
PathMatrix contract_payments(const Contract& contract, const ParticlePaths& paths, const TimeGrid& grid);

/// (1/n) sum_i int L dt + g(mu_T, xi) for one realization.
double agent_reward(const ModelSpec& model, const ParticlePaths& paths, const MeasureFlow& flow,
                    const PathMatrix& actions, const PathMatrix& payments, double xi);

/// (1/n) sum_i Upsilon(X^i_T) - g_P(mu_T, xi) - (1/n) sum_i int L_P(t, aleph^i) dt for one realization.
double principal_payoff(const ModelSpec& model, const ParticlePaths& paths, const MeasureFlow& flow,
                        const PathMatrix& payments, double xi);

/// Principal's reward from per-replication payoffs. With `u_inside` the
/// utility is applied to each payoff before averaging; otherwise to the
/// averaged payoff (standard error by the delta method).
Estimate principal_reward(std::span<const double> payoffs, const std::function<double(double)>& utility,
                          bool u_inside = true);

/// Limit contract payment xi(X, mu) = Y0 - int H dt + int gamma sigma^{-1} dX
/// along one stored path against a limit flow.
double mkv_contract_payment(const Contract& contract, const ModelSpec& model, std::span<const double> path,
                            const MeasureFlow& flow);

struct MkvContractPayment {
  std::vector<double> per_path;
  double ensemble = 0.0;  // g^{-1}(mu_T, mean of per_path)
};

MkvContractPayment mkv_contract_payments(const Contract& contract, const ModelSpec& model,
                                         const ParticlePaths& paths, const MeasureFlow& flow);

/// One replication of the n-agent system under the contract.
struct ContractRun {
  double xi = 0.0;
  double agent_reward = 0.0;
  double principal_payoff = 0.0;
};

ContractRun run_contract_replication(const ModelSpec& model, const Contract& contract, std::size_t n,
                                     const TimeGrid& grid, const SeedSpec& seed, std::uint64_t replication,
                                     const std::function<double(double, std::size_t, double)>& action_override = {});

struct ContractStudy {
  Estimate xi;
  double xi_variance = 0.0;
  Estimate agent_reward;
  Estimate principal_inside;
  Estimate principal_outside;
  std::vector<ContractRun> runs;
};

/// Monte Carlo over independent replications (parallel across replications).
ContractStudy study_contract(const ModelSpec& model, const Contract& contract, std::size_t n, const TimeGrid& grid,
                             const SeedSpec& seed, std::size_t replications, WorkerPool* pool = nullptr,
                             const std::function<double(double, std::size_t, double)>& action_override = {});

struct ParetoScan {
  Estimate recommended;       // agent reward under the recommended actions
  double best_gain = 0.0;     // max over deviations of mean(reward_dev - reward_rec)
  double best_gain_se = 0.0;
  double best_a1 = 0.0;
  double best_a2 = 0.0;
  std::size_t deviations = 0;
  std::size_t violations = 0;  // gains above 3 SE
};

/// Two agents, constant joint deviations (a1, a2) on a square grid, common
/// random numbers across deviations.
ParetoScan pareto_deviation_scan(const ModelSpec& model, const Contract& contract, const TimeGrid& grid,
                                 const SeedSpec& seed, std::size_t replications, double lo, double hi, double step,
                                 WorkerPool* pool = nullptr);

}  // namespace mfpa
