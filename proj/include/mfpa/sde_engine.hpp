#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfpa/measures.hpp"
#include "mfpa/model.hpp"
#include "mfpa/parallel.hpp"
#include "mfpa/rng.hpp"
#include "mfpa/time_grid.hpp"

namespace mfpa {

/// Markovian feedback rule (t, x) -> value.
using Feedback = std::function<double(double t, double x)>;

/// Feedback controls driving the reduced dynamics
///   dX = b_hat(t, X, mu, aleph^l(t, X), gamma^l(t, X)) dt + sigma dW.
///
/// Truncation is the one-sided minimum v ^ l unless `symmetric_truncation`
/// is set, in which case v is clipped to [-l, l]. When `action_override` is
/// set the particles use that action instead of the Hamiltonian maximizer
/// (deviation studies); the recommended quantities are still reported.
struct ControlSet {
  Feedback gamma;
  Feedback aleph;
  double truncation = std::numeric_limits<double>::infinity();
  bool symmetric_truncation = false;
  std::function<double(double t, std::size_t particle, double x)> action_override;

  double truncate(double v) const {
    if (symmetric_truncation) return v > truncation ? truncation : (v < -truncation ? -truncation : v);
    return v < truncation ? v : truncation;
  }
  double gamma_at(double t, double x) const { return gamma ? truncate(gamma(t, x)) : 0.0; }
  double aleph_at(double t, double x) const { return aleph ? truncate(aleph(t, x)) : 0.0; }
};

/// Everything known about one Euler step, one entry per particle.
/// `running_hat` and `hamiltonian` are evaluated at the recommended action
/// even when an override drives the particles.
struct StepView {
  std::size_t step = 0;
  double time = 0.0;
  double dt = 0.0;
  const MeasureSnapshot* measure = nullptr;
  std::span<const double> state;
  std::span<const double> next_state;
  std::span<const double> brownian;  // Delta W, variance dt
  std::span<const double> payment;   // aleph^l
  std::span<const double> gamma;     // gamma^l
  std::span<const double> sigma;
  std::span<const double> action;    // action actually used
  std::span<const double> drift;     // b at the action used
  std::span<const double> running;   // L at the action used
  std::span<const double> running_hat;
  std::span<const double> hamiltonian;
};

struct TerminalView {
  double time = 0.0;
  const MeasureSnapshot* measure = nullptr;
  std::span<const double> state;
  std::span<const double> initial;
};

class PathObserver {
 public:
  virtual ~PathObserver() = default;
  virtual void on_step(const StepView& step) = 0;
  virtual void on_terminal(const TerminalView&) {}
};

struct EngineOptions {
  std::uint64_t replication = 0;
  /// Pair particle 2k+1 with 2k: reflected initial draw and negated noise.
  bool antithetic = false;
  WorkerPool* pool = nullptr;
  MaximizerOptions maximizer;
};

/// Left-endpoint Euler-Maruyama for the n-particle system. The empirical
/// measure of the pre-step states enters every drift of the step. Throws
/// SimulationBlowupError on the first non-finite state.
void run_particle_system(const ModelSpec& model, const ControlSet& controls, std::size_t n, const TimeGrid& grid,
                         const SeedSpec& seed, const EngineOptions& options,
                         std::span<PathObserver* const> observers);

/// Stored ensemble: states n x (steps + 1), Brownian increments n x steps.
class ParticlePaths {
 public:
  ParticlePaths() = default;
  ParticlePaths(std::size_t n, std::size_t steps)
      : n_(n), steps_(steps), states_(n * (steps + 1)), increments_(n * steps), initial_(n) {}

  std::size_t particles() const { return n_; }
  std::size_t steps() const { return steps_; }

  double state(std::size_t i, std::size_t k) const { return states_[i * (steps_ + 1) + k]; }
  double& state(std::size_t i, std::size_t k) { return states_[i * (steps_ + 1) + k]; }
  double increment(std::size_t i, std::size_t k) const { return increments_[i * steps_ + k]; }
  double& increment(std::size_t i, std::size_t k) { return increments_[i * steps_ + k]; }
  std::span<const double> path(std::size_t i) const { return {states_.data() + i * (steps_ + 1), steps_ + 1}; }
  std::span<const double> initial() const { return initial_; }
  std::span<double> initial() { return initial_; }
  std::vector<double> column(std::size_t k) const;

  const std::vector<double>& raw_states() const { return states_; }
  const std::vector<double>& raw_increments() const { return increments_; }

 private:
  std::size_t n_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> states_;
  std::vector<double> increments_;
  std::vector<double> initial_;
};

struct SimulationResult {
  ParticlePaths paths;
  MeasureFlow flow;
};

/// n coupled production paths under the feedback controls, stored in full.
SimulationResult simulate_particles(const ModelSpec& model, const ControlSet& controls, std::size_t n,
                                    const TimeGrid& grid, const SeedSpec& seed, const EngineOptions& options = {});

/// Large-N particle proxy for the McKean-Vlasov limit; the returned flow
/// stands in for the deterministic limit flow.
SimulationResult simulate_mkv_proxy(const ModelSpec& model, const ControlSet& controls, std::size_t n_proxy,
                                    const TimeGrid& grid, const SeedSpec& seed, const EngineOptions& options = {});

/// Terminal law only; for runs too large to store.
EmpiricalMeasure simulate_terminal_measure(const ModelSpec& model, const ControlSet& controls, std::size_t n,
                                           const TimeGrid& grid, const SeedSpec& seed,
                                           const EngineOptions& options = {});

/// Snapshot of a stored measure (features recomputed through the model).
struct SnapshotHolder {
  std::vector<double> features;
  MeasureSnapshot snapshot;
};
void make_snapshot(const ModelSpec& model, double t, std::span<const double> states, SnapshotHolder& out);

enum class Integrator { kStateIncrement, kBrownian, kTime };

/// Left-endpoint sums sum_k f(t_k, X_{t_k}) Delta M_k, one per particle.
std::vector<double> ito_integral(const ParticlePaths& paths, const TimeGrid& grid, const Feedback& integrand,
                                 Integrator against);
double ito_integral_mean(const ParticlePaths& paths, const TimeGrid& grid, const Feedback& integrand,
                         Integrator against);

/// Long-format dump: t, particle, state.
void write_paths_csv(const std::string& path, const ParticlePaths& paths, const TimeGrid& grid);

}  // namespace mfpa
