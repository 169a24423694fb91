#include "mfpa/sde_engine.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mfpa/errors.hpp"

namespace mfpa {
namespace {

constexpr std::size_t kParticleBlock = 1024;  // even, so antithetic pairs never straddle blocks

struct StepBuffers {
  explicit StepBuffers(std::size_t n)
      : next(n), brownian(n), payment(n), gamma(n), sigma(n), action(n), drift(n), running(n), running_hat(n),
        hamiltonian(n) {}
  std::vector<double> next, brownian, payment, gamma, sigma, action, drift, running, running_hat, hamiltonian;
};

class RecordingObserver : public PathObserver {
 public:
  RecordingObserver(ParticlePaths& paths, std::vector<EmpiricalMeasure>* flow) : paths_(paths), flow_(flow) {}

  void on_step(const StepView& step) override {
    const std::size_t n = step.state.size();
    const std::size_t k = step.step;
    for (std::size_t i = 0; i < n; ++i) {
      paths_.state(i, k) = step.state[i];
      paths_.increment(i, k) = step.brownian[i];
    }
    if (flow_) flow_->emplace_back(std::vector<double>(step.state.begin(), step.state.end()));
  }

  void on_terminal(const TerminalView& terminal) override {
    const std::size_t n = terminal.state.size();
    for (std::size_t i = 0; i < n; ++i) {
      paths_.state(i, paths_.steps()) = terminal.state[i];
      paths_.initial()[i] = terminal.initial[i];
    }
    if (flow_) flow_->emplace_back(std::vector<double>(terminal.state.begin(), terminal.state.end()));
  }

 private:
  ParticlePaths& paths_;
  std::vector<EmpiricalMeasure>* flow_;
};

class TerminalObserver : public PathObserver {
 public:
  void on_step(const StepView&) override {}
  void on_terminal(const TerminalView& terminal) override {
    states.assign(terminal.state.begin(), terminal.state.end());
  }
  std::vector<double> states;
};

}  // namespace

void make_snapshot(const ModelSpec& model, double t, std::span<const double> states, SnapshotHolder& out) {
  model.compute_features(t, states, out.features);
  out.snapshot.time = t;
  out.snapshot.states = states;
  out.snapshot.features = out.features;
}

void run_particle_system(const ModelSpec& model, const ControlSet& controls, std::size_t n, const TimeGrid& grid,
                         const SeedSpec& seed, const EngineOptions& options,
                         std::span<PathObserver* const> observers) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "particle system needs n >= 1");
  const double dt = grid.dt();
  const double sqrt_dt = std::sqrt(dt);
  const bool antithetic = options.antithetic;

  std::vector<Engine> engines(n);
  std::vector<double> state(n);
  std::vector<double> initial(n);
  parallel_for(options.pool, n, kParticleBlock, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (antithetic && (i % 2 == 1)) {
        initial[i] = model.initial_law.reflect(initial[i - 1]);
        continue;
      }
      engines[i] = seed.substream(options.replication, i);
      initial[i] = model.initial_law.sample(engines[i]);
    }
  });
  state = initial;

  StepBuffers buf(n);
  SnapshotHolder snap;
  const bool has_override = static_cast<bool>(controls.action_override);

  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double t = grid.time(k);
    make_snapshot(model, t, state, snap);
    const MeasureSnapshot& m = snap.snapshot;

    parallel_for(options.pool, n, kParticleBlock, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const double x = state[i];
        if (antithetic && (i % 2 == 1)) {
          buf.brownian[i] = -buf.brownian[i - 1];
        } else {
          buf.brownian[i] = sqrt_dt * standard_normal(engines[i]);
        }
        const double e = controls.aleph_at(t, x);
        const double g = controls.gamma_at(t, x);
        const double s = model.volatility(t, x);
        if (!(s >= model.sigma_min)) {
          std::ostringstream msg;
          msg << "volatility " << s << " below sigma_min at step " << k;
          throw NumericDomainError(msg.str());
        }
        const double z = scale_by_inverse_vol(g, s);
        const double a_hat = maximize_hamiltonian(model, t, x, m, e, z, options.maximizer);
        const double b_hat = model.drift(t, x, m, e, a_hat);
        const double l_hat = model.running_cost(t, x, m, e, a_hat);

        double a = a_hat, b = b_hat, l = l_hat;
        if (has_override) {
          a = controls.action_override(t, i, x);
          b = model.drift(t, x, m, e, a);
          l = model.running_cost(t, x, m, e, a);
        }
        buf.payment[i] = e;
        buf.gamma[i] = g;
        buf.sigma[i] = s;
        buf.action[i] = a;
        buf.drift[i] = b;
        buf.running[i] = l;
        buf.running_hat[i] = l_hat;
        buf.hamiltonian[i] = b_hat * z + l_hat;
        buf.next[i] = x + b * dt + s * buf.brownian[i];
      }
    });

    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(buf.next[i])) {
        std::ostringstream msg;
        msg << "simulation blow-up: non-finite state at step " << (k + 1) << " (t=" << grid.time(k + 1) << ")";
        throw SimulationBlowupError(k + 1, msg.str());
      }
    }

    if (!observers.empty()) {
      StepView view;
      view.step = k;
      view.time = t;
      view.dt = dt;
      view.measure = &m;
      view.state = state;
      view.next_state = buf.next;
      view.brownian = buf.brownian;
      view.payment = buf.payment;
      view.gamma = buf.gamma;
      view.sigma = buf.sigma;
      view.action = buf.action;
      view.drift = buf.drift;
      view.running = buf.running;
      view.running_hat = buf.running_hat;
      view.hamiltonian = buf.hamiltonian;
      for (auto* obs : observers) obs->on_step(view);
    }
    state.swap(buf.next);
  }

  make_snapshot(model, grid.horizon(), state, snap);
  TerminalView terminal;
  terminal.time = grid.horizon();
  terminal.measure = &snap.snapshot;
  terminal.state = state;
  terminal.initial = initial;
  for (auto* obs : observers) obs->on_terminal(terminal);
}

std::vector<double> ParticlePaths::column(std::size_t k) const {
  std::vector<double> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = state(i, k);
  return out;
}

SimulationResult simulate_particles(const ModelSpec& model, const ControlSet& controls, std::size_t n,
                                    const TimeGrid& grid, const SeedSpec& seed, const EngineOptions& options) {
  ParticlePaths paths(n, grid.steps());
  std::vector<EmpiricalMeasure> measures;
  measures.reserve(grid.nodes());
  RecordingObserver recorder(paths, &measures);
  PathObserver* observers[] = {&recorder};
  run_particle_system(model, controls, n, grid, seed, options, observers);
  return SimulationResult{std::move(paths), MeasureFlow(grid, std::move(measures))};
}

SimulationResult simulate_mkv_proxy(const ModelSpec& model, const ControlSet& controls, std::size_t n_proxy,
                                    const TimeGrid& grid, const SeedSpec& seed, const EngineOptions& options) {
  return simulate_particles(model, controls, n_proxy, grid, seed, options);
}

EmpiricalMeasure simulate_terminal_measure(const ModelSpec& model, const ControlSet& controls, std::size_t n,
                                           const TimeGrid& grid, const SeedSpec& seed,
                                           const EngineOptions& options) {
  TerminalObserver terminal;
  PathObserver* observers[] = {&terminal};
  run_particle_system(model, controls, n, grid, seed, options, observers);
  return EmpiricalMeasure(std::move(terminal.states));
}

std::vector<double> ito_integral(const ParticlePaths& paths, const TimeGrid& grid, const Feedback& integrand,
                                 Integrator against) {
  if (paths.steps() != grid.steps()) throw Error(ErrorCode::kInvalidArgument, "paths and grid disagree on steps");
  const double dt = grid.dt();
  std::vector<double> out(paths.particles(), 0.0);
  for (std::size_t i = 0; i < paths.particles(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < paths.steps(); ++k) {
      const double f = integrand(grid.time(k), paths.state(i, k));
      double dm = dt;
      if (against == Integrator::kStateIncrement) dm = paths.state(i, k + 1) - paths.state(i, k);
      if (against == Integrator::kBrownian) dm = paths.increment(i, k);
      acc += f * dm;
    }
    out[i] = acc;
  }
  return out;
}

double ito_integral_mean(const ParticlePaths& paths, const TimeGrid& grid, const Feedback& integrand,
                         Integrator against) {
  const auto per = ito_integral(paths, grid, integrand, against);
  double acc = 0.0;
  for (double v : per) acc += v;
  return acc / static_cast<double>(per.size());
}

void write_paths_csv(const std::string& path, const ParticlePaths& paths, const TimeGrid& grid) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path);
  out << std::setprecision(17) << "t,particle,state\n";
  for (std::size_t k = 0; k <= paths.steps(); ++k) {
    for (std::size_t i = 0; i < paths.particles(); ++i) out << grid.time(k) << "," << i << "," << paths.state(i, k) << "\n";
  }
}

}  // namespace mfpa
