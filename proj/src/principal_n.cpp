#include "mfpa/principal_n.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <gsl/gsl_fit.h>

#include "mfpa/errors.hpp"

namespace mfpa {

NPlayerPolicy NPlayerPolicy::from_contract(const Contract& contract) {
  NPlayerPolicy p;
  p.scaled_z = contract.gamma;
  p.aleph = contract.aleph;
  p.truncation = contract.truncation;
  return p;
}

void NPlayerLedger::on_step(const StepView& s) {
  const std::size_t n = s.state.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double l_sum = 0.0, zdw = 0.0, lp_sum = 0.0;
  const bool principal_cost = static_cast<bool>(model_.principal_running_cost);
  for (std::size_t i = 0; i < n; ++i) {
    l_sum += s.running_hat[i];
    zdw += s.gamma[i] * s.brownian[i];
    if (principal_cost) lp_sum += model_.principal_running_cost(s.time, s.payment[i]);
  }
  y_ = y_ - inv_n * l_sum * s.dt + inv_n * zdw;
  martingale_ += inv_n * zdw;
  principal_running_ += inv_n * lp_sum * s.dt;
}

void NPlayerLedger::on_terminal(const TerminalView& terminal) {
  const MeasureSnapshot& m = *terminal.measure;
  xi_ = model_.terminal_utility_inverse(m, y_);
  if (!std::isfinite(xi_)) throw ContractEvaluationError("terminal payment of the n-player rollout is not finite");
  double up = 0.0;
  for (double x : terminal.state) up += model_.production_utility(x);
  up /= static_cast<double>(terminal.state.size());
  payoff_ = up - model_.principal_terminal_cost(m, xi_) - principal_running_;
}

NPlayerValue estimate_n_player_value(const ModelSpec& model, const NPlayerPolicy& policy, std::size_t n,
                                     const TimeGrid& grid, std::size_t replications, const SeedSpec& seed,
                                     WorkerPool* pool, std::optional<double> initial_value) {
  if (replications == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one replication");
  ControlSet controls;
  controls.gamma = policy.scaled_z;
  controls.aleph = policy.aleph;
  controls.truncation = policy.truncation;
  const double y0 = initial_value.value_or(model.reservation);

  std::vector<double> payoffs(replications), martingales(replications);
  parallel_for(pool, replications, 16, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      NPlayerLedger ledger(model, y0);
      PathObserver* observers[] = {&ledger};
      EngineOptions options;
      options.replication = r;
      run_particle_system(model, controls, n, grid, seed, options, observers);
      payoffs[r] = ledger.payoff();
      martingales[r] = ledger.martingale();
    }
  });

  NPlayerValue out;
  out.inside = principal_reward(payoffs, model.principal_utility, true);
  out.outside = principal_reward(payoffs, model.principal_utility, false);
  out.payoff = estimate_mean(payoffs);
  out.martingale = estimate_mean(martingales);
  out.payoffs = std::move(payoffs);
  return out;
}

std::vector<GapCell> gap_sweep(const GapSweepSpec& spec, const TimeGrid& grid, const SeedSpec& seed,
                               WorkerPool* pool) {
  if (!spec.model_for || !spec.limit_value || !spec.policy_for) {
    throw Error(ErrorCode::kInvalidArgument, "gap sweep needs model, limit value and policy builders");
  }
  std::vector<GapCell> cells;
  for (double b_bar : spec.b_bars) {
    const ModelSpec model = spec.model_for(b_bar);
    const NPlayerPolicy policy = spec.policy_for(model);
    const double target = model.principal_utility(spec.limit_value(b_bar));
    for (std::size_t n : spec.ns) {
      const auto start = std::chrono::steady_clock::now();
      const NPlayerValue v = estimate_n_player_value(model, policy, n, grid, spec.replications, seed, pool);
      const auto stop = std::chrono::steady_clock::now();
      GapCell cell;
      cell.n = n;
      cell.b_bar = b_bar;
      cell.value = v.inside.mean;
      cell.value_se = v.inside.se;
      cell.target = target;
      cell.gap = target - v.inside.mean;
      cell.se = v.inside.se;
      cell.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
      cells.push_back(cell);
    }
  }
  return cells;
}

RateFit fit_rate(std::span<const double> scales, std::span<const double> gaps) {
  if (scales.size() != gaps.size()) throw Error(ErrorCode::kInvalidArgument, "scales and gaps differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (gaps[i] > 0.0 && scales[i] > 0.0 && std::isfinite(gaps[i])) {
      lx.push_back(std::log(scales[i]));
      ly.push_back(std::log(gaps[i]));
    }
  }
  if (lx.size() < 3) {
    std::ostringstream msg;
    msg << "rate fit needs at least 3 positive gaps, got " << lx.size();
    throw InsufficientDataError(msg.str());
  }
  double c0 = 0.0, c1 = 0.0, cov00 = 0.0, cov01 = 0.0, cov11 = 0.0, sumsq = 0.0;
  gsl_fit_linear(lx.data(), 1, ly.data(), 1, lx.size(), &c0, &c1, &cov00, &cov01, &cov11, &sumsq);
  const double my = sample_mean(ly);
  double tss = 0.0;
  for (double y : ly) tss += (y - my) * (y - my);
  RateFit fit;
  fit.slope = c1;
  fit.intercept = c0;
  fit.r_squared = tss > 0.0 ? 1.0 - sumsq / tss : 1.0;
  fit.used = lx.size();
  return fit;
}

Estimate multitask_closed_form_reward(const MultitaskParams& params, double reservation, double horizon,
                                      const InitialLaw& law, const std::function<double(double)>& utility,
                                      std::size_t n, const TimeGrid& grid, std::size_t replications,
                                      const SeedSpec& seed, double noise_factor) {
  if (n == 0 || replications == 0) throw Error(ErrorCode::kInvalidArgument, "need n >= 1 and replications >= 1");
  const double k = params.kappa_bar;
  const double sqrt_dt = std::sqrt(grid.dt());
  double quad = 0.0;
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    const double g = std::exp(k * (horizon - grid.time(j)));
    quad += g * g * grid.dt();
  }
  std::vector<double> values(replications);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < replications; ++r) {
    double iota = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Engine engine = seed.substream(r, i);
      iota += law.sample(engine);
      for (std::size_t j = 0; j < grid.steps(); ++j) {
        noise += std::exp(k * (horizon - grid.time(j))) * sqrt_dt * standard_normal(engine);
      }
    }
    const double payoff =
        -reservation + std::exp(k * horizon) * iota * inv_n + 0.5 * quad + noise_factor * inv_n * noise;
    values[r] = utility(payoff);
  }
  return estimate_mean(values);
}

void write_gap_csv(const std::string& path, std::span<const GapCell> cells, bool zero_runtime) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path);
  out << std::setprecision(17) << "n,b_bar,gap,se,value,target,runtime_ms\n";
  for (const auto& c : cells) {
    out << c.n << "," << c.b_bar << "," << c.gap << "," << c.se << "," << c.value << "," << c.target << ","
        << (zero_runtime ? 0.0 : c.runtime_ms) << "\n";
  }
}

}  // namespace mfpa
