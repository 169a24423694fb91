#include "mfpa/contracts.hpp"

#include <cmath>
#include <sstream>

#include "mfpa/errors.hpp"

namespace mfpa {

ControlSet Contract::controls() const {
  ControlSet c;
  c.gamma = gamma;
  c.aleph = aleph;
  c.truncation = truncation;
  c.symmetric_truncation = symmetric_truncation;
  return c;
}

Contract make_contract(const ModelSpec& model, Feedback gamma, Feedback aleph, double truncation,
                       std::optional<double> initial_value) {
  Contract c;
  c.initial_value = initial_value.value_or(model.reservation);
  if (!(c.initial_value >= model.reservation)) {
    std::ostringstream msg;
    msg << "contract Y0 = " << c.initial_value << " is below the reservation utility " << model.reservation;
    throw Error(ErrorCode::kInvalidArgument, msg.str());
  }
  if (std::isnan(truncation)) throw Error(ErrorCode::kInvalidArgument, "contract truncation is NaN");
  c.gamma = std::move(gamma);
  c.aleph = std::move(aleph);
  c.truncation = truncation;
  return c;
}

ContractLedger::ContractLedger(const ModelSpec& model, double initial_value, bool record_path)
    : model_(model), record_(record_path), y_(initial_value) {
  if (record_) path_.push_back(y_);
}

void ContractLedger::on_step(const StepView& s) {
  const std::size_t n = s.state.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double h_sum = 0.0, dx_sum = 0.0, l_sum = 0.0, lp_sum = 0.0;
  const bool principal_cost = static_cast<bool>(model_.principal_running_cost);
  for (std::size_t i = 0; i < n; ++i) {
    h_sum += s.hamiltonian[i];
    dx_sum += scale_by_inverse_vol(s.gamma[i], s.sigma[i]) * (s.next_state[i] - s.state[i]);
    l_sum += s.running[i];
    if (principal_cost) lp_sum += model_.principal_running_cost(s.time, s.payment[i]);
  }
  y_ = y_ - inv_n * h_sum * s.dt + inv_n * dx_sum;
  agent_running_ += inv_n * l_sum * s.dt;
  principal_running_ += inv_n * lp_sum * s.dt;
  if (record_) path_.push_back(y_);
}

void ContractLedger::on_terminal(const TerminalView& terminal) {
  const MeasureSnapshot& m = *terminal.measure;
  xi_ = model_.terminal_utility_inverse(m, y_);
  if (!std::isfinite(xi_)) {
    std::ostringstream msg;
    msg << "terminal payment g^{-1}(mu_T, " << y_ << ") is not finite";
    throw ContractEvaluationError(msg.str());
  }
  agent_reward_ = agent_running_ + model_.terminal_utility(m, xi_);
  double up = 0.0;
  for (double x : terminal.state) up += model_.production_utility(x);
  up /= static_cast<double>(terminal.state.size());
  principal_payoff_ = up - model_.principal_terminal_cost(m, xi_) - principal_running_;
}

void replay_paths(const ModelSpec& model, const ControlSet& controls, const ParticlePaths& paths,
                  const MeasureFlow& flow, std::span<PathObserver* const> observers,
                  const MaximizerOptions& maximizer) {
  const TimeGrid& grid = flow.grid();
  if (paths.steps() != grid.steps() || flow.size() != grid.nodes()) {
    throw Error(ErrorCode::kInvalidArgument, "paths and flow disagree on the time grid");
  }
  if (flow.at(0).size() != paths.particles()) {
    throw Error(ErrorCode::kInvalidArgument, "paths and flow disagree on the particle count");
  }
  const std::size_t n = paths.particles();
  const double dt = grid.dt();
  std::vector<double> state(n), next(n), dw(n), pay(n), gam(n), sig(n), act(n), drift(n), run(n), hams(n);
  SnapshotHolder snap;
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    make_snapshot(model, t, flow.at(k).samples(), snap);
    const MeasureSnapshot& m = snap.snapshot;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = paths.state(i, k);
      state[i] = x;
      next[i] = paths.state(i, k + 1);
      dw[i] = paths.increment(i, k);
      pay[i] = controls.aleph_at(t, x);
      gam[i] = controls.gamma_at(t, x);
      sig[i] = model.volatility(t, x);
      const ReducedCoefficients rc = reduced_coefficients(model, t, x, m, pay[i], gam[i], maximizer);
      act[i] = rc.action;
      drift[i] = rc.drift;
      run[i] = rc.running;
      hams[i] = rc.hamiltonian;
    }
    StepView view;
    view.step = k;
    view.time = t;
    view.dt = dt;
    view.measure = &m;
    view.state = state;
    view.next_state = next;
    view.brownian = dw;
    view.payment = pay;
    view.gamma = gam;
    view.sigma = sig;
    view.action = act;
    view.drift = drift;
    view.running = run;
    view.running_hat = run;
    view.hamiltonian = hams;
    for (auto* obs : observers) obs->on_step(view);
  }
  make_snapshot(model, grid.horizon(), flow.terminal().samples(), snap);
  const std::vector<double> terminal_states = paths.column(grid.steps());
  TerminalView terminal;
  terminal.time = grid.horizon();
  terminal.measure = &snap.snapshot;
  terminal.state = terminal_states;
  terminal.initial = paths.initial();
  for (auto* obs : observers) obs->on_terminal(terminal);
}

TerminalPayment evaluate_terminal_payment(const Contract& contract, const ModelSpec& model,
                                          const ParticlePaths& paths, const MeasureFlow& flow) {
  ContractLedger ledger(model, contract.initial_value, true);
  PathObserver* observers[] = {&ledger};
  replay_paths(model, contract.controls(), paths, flow, observers);
  return TerminalPayment{ledger.xi(), ledger.continuation_path()};
}

PathMatrix recommended_controls(const Contract& contract, const ModelSpec& model, const ParticlePaths& paths,
                                const MeasureFlow& flow) {
  const TimeGrid& grid = flow.grid();
  const ControlSet controls = contract.controls();
  PathMatrix out(paths.particles(), paths.steps());
  SnapshotHolder snap;
  for (std::size_t k = 0; k < paths.steps(); ++k) {
    const double t = grid.time(k);
    make_snapshot(model, t, flow.at(k).samples(), snap);
    for (std::size_t i = 0; i < paths.particles(); ++i) {
      const double x = paths.state(i, k);
      const double z = scale_by_inverse_vol(controls.gamma_at(t, x), model.volatility(t, x));
      out(i, k) = maximize_hamiltonian(model, t, x, snap.snapshot, controls.aleph_at(t, x), z);
    }
  }
  return out;
}

PathMatrix contract_payments(const Contract& contract, const ParticlePaths& paths, const TimeGrid& grid) {
  const ControlSet controls = contract.controls();
  PathMatrix out(paths.particles(), paths.steps());
  for (std::size_t i = 0; i < paths.particles(); ++i) {
    for (std::size_t k = 0; k < paths.steps(); ++k) out(i, k) = controls.aleph_at(grid.time(k), paths.state(i, k));
  }
  return out;
}

namespace {

void check_shapes(const ParticlePaths& paths, const MeasureFlow& flow, const PathMatrix& m, const char* what) {
  if (m.rows != paths.particles() || m.cols != paths.steps() || flow.size() != paths.steps() + 1) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " matrix does not match the paths");
  }
}

}  // namespace

double agent_reward(const ModelSpec& model, const ParticlePaths& paths, const MeasureFlow& flow,
                    const PathMatrix& actions, const PathMatrix& payments, double xi) {
  check_shapes(paths, flow, actions, "action");
  check_shapes(paths, flow, payments, "payment");
  const TimeGrid& grid = flow.grid();
  const double dt = grid.dt();
  const double inv_n = 1.0 / static_cast<double>(paths.particles());
  double running = 0.0;
  SnapshotHolder snap;
  for (std::size_t k = 0; k < paths.steps(); ++k) {
    const double t = grid.time(k);
    make_snapshot(model, t, flow.at(k).samples(), snap);
    double acc = 0.0;
    for (std::size_t i = 0; i < paths.particles(); ++i) {
      acc += model.running_cost(t, paths.state(i, k), snap.snapshot, payments(i, k), actions(i, k));
    }
    running += inv_n * acc * dt;
  }
  make_snapshot(model, grid.horizon(), flow.terminal().samples(), snap);
  return running + model.terminal_utility(snap.snapshot, xi);
}

double principal_payoff(const ModelSpec& model, const ParticlePaths& paths, const MeasureFlow& flow,
                        const PathMatrix& payments, double xi) {
  check_shapes(paths, flow, payments, "payment");
  const TimeGrid& grid = flow.grid();
  const double dt = grid.dt();
  const double inv_n = 1.0 / static_cast<double>(paths.particles());
  double running = 0.0;
  if (model.principal_running_cost) {
    for (std::size_t k = 0; k < paths.steps(); ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < paths.particles(); ++i) acc += model.principal_running_cost(grid.time(k), payments(i, k));
      running += inv_n * acc * dt;
    }
  }
  double up = 0.0;
  for (std::size_t i = 0; i < paths.particles(); ++i) up += model.production_utility(paths.state(i, paths.steps()));
  SnapshotHolder snap;
  make_snapshot(model, grid.horizon(), flow.terminal().samples(), snap);
  return inv_n * up - model.principal_terminal_cost(snap.snapshot, xi) - running;
}

Estimate principal_reward(std::span<const double> payoffs, const std::function<double(double)>& utility,
                          bool u_inside) {
  if (payoffs.empty()) throw Error(ErrorCode::kInvalidArgument, "principal_reward needs at least one payoff");
  if (u_inside) {
    std::vector<double> u(payoffs.size());
    for (std::size_t r = 0; r < payoffs.size(); ++r) u[r] = utility(payoffs[r]);
    return estimate_mean(u);
  }
  const Estimate raw = estimate_mean(payoffs);
  Estimate out = raw;
  out.mean = utility(raw.mean);
  // Delta method with a central difference for U'.
  const double h = 1e-6 * (1.0 + std::fabs(raw.mean));
  const double slope = (utility(raw.mean + h) - utility(raw.mean - h)) / (2.0 * h);
  out.se = std::fabs(slope) * raw.se;
  return out;
}

namespace {

double path_payment(const Contract& contract, const ControlSet& controls, const ModelSpec& model,
                    std::span<const double> path, const MeasureFlow& flow, std::vector<SnapshotHolder>& snaps) {
  const TimeGrid& grid = flow.grid();
  const double dt = grid.dt();
  double y = contract.initial_value;
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    const double x = path[k];
    const double g = controls.gamma_at(t, x);
    const double e = controls.aleph_at(t, x);
    const double s = model.volatility(t, x);
    const ReducedCoefficients rc = reduced_coefficients(model, t, x, snaps[k].snapshot, e, g);
    y = y - rc.hamiltonian * dt + scale_by_inverse_vol(g, s) * (path[k + 1] - x);
  }
  return y;
}

std::vector<SnapshotHolder> flow_snapshots(const ModelSpec& model, const MeasureFlow& flow) {
  std::vector<SnapshotHolder> snaps(flow.size());
  for (std::size_t k = 0; k < flow.size(); ++k) make_snapshot(model, flow.grid().time(k), flow.at(k).samples(), snaps[k]);
  return snaps;
}

}  // namespace

double mkv_contract_payment(const Contract& contract, const ModelSpec& model, std::span<const double> path,
                            const MeasureFlow& flow) {
  if (path.size() != flow.grid().nodes()) throw Error(ErrorCode::kInvalidArgument, "path length must match the flow grid");
  auto snaps = flow_snapshots(model, flow);
  return path_payment(contract, contract.controls(), model, path, flow, snaps);
}

MkvContractPayment mkv_contract_payments(const Contract& contract, const ModelSpec& model,
                                         const ParticlePaths& paths, const MeasureFlow& flow) {
  if (paths.steps() != flow.grid().steps()) throw Error(ErrorCode::kInvalidArgument, "paths and flow disagree on steps");
  auto snaps = flow_snapshots(model, flow);
  const ControlSet controls = contract.controls();
  MkvContractPayment out;
  out.per_path.resize(paths.particles());
  double acc = 0.0;
  for (std::size_t i = 0; i < paths.particles(); ++i) {
    out.per_path[i] = path_payment(contract, controls, model, paths.path(i), flow, snaps);
    acc += out.per_path[i];
  }
  const double mean = acc / static_cast<double>(paths.particles());
  out.ensemble = model.terminal_utility_inverse(snaps.back().snapshot, mean);
  if (!std::isfinite(out.ensemble)) throw ContractEvaluationError("limit contract g^{-1} is not finite");
  return out;
}

ContractRun run_contract_replication(const ModelSpec& model, const Contract& contract, std::size_t n,
                                     const TimeGrid& grid, const SeedSpec& seed, std::uint64_t replication,
                                     const std::function<double(double, std::size_t, double)>& action_override) {
  ControlSet controls = contract.controls();
  controls.action_override = action_override;
  ContractLedger ledger(model, contract.initial_value);
  PathObserver* observers[] = {&ledger};
  EngineOptions options;
  options.replication = replication;
  run_particle_system(model, controls, n, grid, seed, options, observers);
  return ContractRun{ledger.xi(), ledger.agent_reward(), ledger.principal_payoff()};
}

namespace {

constexpr std::size_t kReplicationBlock = 16;

std::vector<ContractRun> run_replications(const ModelSpec& model, const Contract& contract, std::size_t n,
                                          const TimeGrid& grid, const SeedSpec& seed, std::size_t replications,
                                          WorkerPool* pool,
                                          const std::function<double(double, std::size_t, double)>& action_override) {
  std::vector<ContractRun> runs(replications);
  parallel_for(pool, replications, kReplicationBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      runs[r] = run_contract_replication(model, contract, n, grid, seed, r, action_override);
    }
  });
  return runs;
}

}  // namespace

ContractStudy study_contract(const ModelSpec& model, const Contract& contract, std::size_t n, const TimeGrid& grid,
                             const SeedSpec& seed, std::size_t replications, WorkerPool* pool,
                             const std::function<double(double, std::size_t, double)>& action_override) {
  if (replications == 0) throw Error(ErrorCode::kInvalidArgument, "study_contract needs replications >= 1");
  ContractStudy out;
  out.runs = run_replications(model, contract, n, grid, seed, replications, pool, action_override);
  std::vector<double> xi(replications), agent(replications), payoff(replications);
  for (std::size_t r = 0; r < replications; ++r) {
    xi[r] = out.runs[r].xi;
    agent[r] = out.runs[r].agent_reward;
    payoff[r] = out.runs[r].principal_payoff;
  }
  out.xi = estimate_mean(xi);
  out.xi_variance = sample_variance(xi);
  out.agent_reward = estimate_mean(agent);
  out.principal_inside = principal_reward(payoff, model.principal_utility, true);
  out.principal_outside = principal_reward(payoff, model.principal_utility, false);
  return out;
}

ParetoScan pareto_deviation_scan(const ModelSpec& model, const Contract& contract, const TimeGrid& grid,
                                 const SeedSpec& seed, std::size_t replications, double lo, double hi, double step,
                                 WorkerPool* pool) {
  if (!(step > 0.0) || !(hi >= lo)) throw Error(ErrorCode::kInvalidArgument, "invalid deviation grid");
  if (replications < 2) throw Error(ErrorCode::kInvalidArgument, "pareto scan needs replications >= 2");
  const auto base = run_replications(model, contract, 2, grid, seed, replications, pool, {});
  std::vector<double> base_reward(replications);
  for (std::size_t r = 0; r < replications; ++r) base_reward[r] = base[r].agent_reward;

  ParetoScan out;
  out.recommended = estimate_mean(base_reward);
  out.best_gain = -std::numeric_limits<double>::infinity();
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> diff(replications);
  for (std::size_t u = 0; u < count; ++u) {
    const double a1 = lo + step * static_cast<double>(u);
    for (std::size_t v = 0; v < count; ++v) {
      const double a2 = lo + step * static_cast<double>(v);
      auto deviation = [a1, a2](double, std::size_t particle, double) { return particle == 0 ? a1 : a2; };
      const auto dev = run_replications(model, contract, 2, grid, seed, replications, pool, deviation);
      for (std::size_t r = 0; r < replications; ++r) diff[r] = dev[r].agent_reward - base_reward[r];
      const Estimate gain = estimate_mean(diff);
      ++out.deviations;
      // Differences are nearly deterministic under common noise; allow for rounding.
      if (gain.mean > 3.0 * gain.se + 1e-10) ++out.violations;
      if (gain.mean > out.best_gain) {
        out.best_gain = gain.mean;
        out.best_gain_se = gain.se;
        out.best_a1 = a1;
        out.best_a2 = a2;
      }
    }
  }
  return out;
}

}  // namespace mfpa
