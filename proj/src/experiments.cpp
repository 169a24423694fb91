#include "mfpa/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mfpa/checks.hpp"
#include "mfpa/contracts.hpp"
#include "mfpa/errors.hpp"
#include "mfpa/measures.hpp"
#include "mfpa/mkv_control.hpp"
#include "mfpa/principal_n.hpp"
#include "mfpa/sde_engine.hpp"

namespace mfpa {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const ResultRecord& r, bool zero_runtime) {
  return json{{"experiment", r.experiment}, {"config_hash", r.config_hash}, {"metric", r.metric},
              {"value", r.value},           {"se", r.se},                   {"runtime_ms", zero_runtime ? 0.0 : r.runtime_ms}};
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"multitask-convergence", "contract-eval", "policy-opt", "chaos",
                                              "self-check"};
  return names;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

class Session {
 public:
  Session(std::string experiment, std::string hash, const std::string& dir, bool deterministic, bool csv)
      : experiment_(std::move(experiment)), hash_(std::move(hash)), dir_(dir), deterministic_(deterministic), csv_(csv) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw Error(ErrorCode::kIo, "cannot create output directory " + dir);
  }

  bool deterministic() const { return deterministic_; }
  bool csv() const { return csv_; }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void record(const std::string& metric, double value, double se, double runtime_ms) {
    records_.push_back(ResultRecord{experiment_, hash_, metric, value, se, runtime_ms});
    if (deterministic_) timings_[metric] = runtime_ms;
  }

  void write_json(const std::string& name, const json& doc) const {
    std::ofstream out(path(name));
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path(name));
    out << doc.dump(2) << "\n";
  }

  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name));
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path(name));
    out << text;
  }

  void timing(const std::string& key, json value) { timings_[key] = std::move(value); }

  void finish() const {
    json records = json::array();
    for (const auto& r : records_) records.push_back(to_json(r, deterministic_));
    write_json("results.json", json{{"experiment", experiment_}, {"config_hash", hash_}, {"records", records}});
    if (deterministic_) write_json("timings.json", timings_);
  }

 private:
  std::string experiment_;
  std::string hash_;
  fs::path dir_;
  bool deterministic_;
  bool csv_;
  std::vector<ResultRecord> records_;
  json timings_ = json::object();
};

std::string output_dir(const ExperimentConfig& cfg, const RunOptions& options) {
  if (!options.out_dir.empty()) return options.out_dir;
  if (!cfg.output.directory.empty()) return cfg.output.directory;
  throw ConfigError("output.directory", "required (or pass --out)");
}

bool wants_csv(const ExperimentConfig& cfg) {
  return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), "csv") != cfg.output.formats.end();
}

void require_multitask(const ExperimentConfig& cfg, const std::string& command) {
  if (cfg.model.name != "multitask") throw ConfigError("model.name", command + " needs the multitask model");
}

void require_ns(const ExperimentConfig& cfg) {
  if (cfg.mc.ns.empty()) throw ConfigError("mc.n", "required");
}

void require_replications(const ExperimentConfig& cfg) {
  if (cfg.mc.replications == 0) throw ConfigError("mc.replications", "required");
}

void require_proxy(const ExperimentConfig& cfg) {
  if (cfg.mc.n_proxy == 0) throw ConfigError("mc.n_proxy", "required");
}

MultitaskAnalytic multitask_closed_form(const ExperimentConfig& cfg) {
  return analytic_multitask(cfg.model.kappa_bar, cfg.model.reservation, cfg.model.horizon,
                            cfg.model.initial.build().mean());
}

Feedback named_policy(const ExperimentConfig& cfg) {
  const auto& p = cfg.policy;
  if (p.name == "zero") return {};
  if (p.name == "constant") return [c = p.constant](double, double) { return c; };
  if (cfg.model.name != "multitask") throw ConfigError("policy.name", "gamma_hat is only defined for the multitask model");
  return multitask_closed_form(cfg).gamma_rule();
}

std::string fixed(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

int cmd_multitask_convergence(const ExperimentConfig& cfg, const RunOptions& options) {
  require_multitask(cfg, "multitask-convergence");
  require_ns(cfg);
  require_replications(cfg);
  Session session("multitask-convergence", cfg.hash, output_dir(cfg, options), options.deterministic, wants_csv(cfg));
  WorkerPool pool(options.workers);

  ModelConfig mcfg = cfg.model;
  if (!mcfg.utility_given) mcfg.utility = "cara";
  const MultitaskAnalytic an = multitask_closed_form(cfg);
  GapSweepSpec spec;
  spec.ns = cfg.mc.ns;
  spec.b_bars = cfg.mc.b_bars.empty() ? std::vector<double>{cfg.model.b_bar} : cfg.mc.b_bars;
  spec.replications = cfg.mc.replications;
  spec.model_for = [mcfg](double b_bar) { return build_model(mcfg, b_bar); };
  spec.limit_value = [v = an.value](double) { return v; };
  spec.policy_for = [an](const ModelSpec& model) {
    return NPlayerPolicy::from_contract(make_contract(model, an.gamma_rule()));
  };
  const TimeGrid grid(cfg.model.horizon, cfg.steps);
  const SeedSpec seed{cfg.mc.master_seed};
  const auto cells = gap_sweep(spec, grid, seed, &pool);
  const double target = utility_by_name(mcfg.utility)(an.value);

  if (session.csv()) write_gap_csv(session.path("gaps.csv"), cells, session.deterministic());
  session.record("V_hat", an.value, 0.0, 0.0);
  session.record("U(V_hat)", target, 0.0, 0.0);
  for (const auto& c : cells) {
    std::ostringstream key;
    key << "[n=" << c.n << ",b_bar=" << c.b_bar << "]";
    session.record("J_nP" + key.str(), c.value, c.value_se, c.runtime_ms);
    session.record("gap" + key.str(), c.gap, c.se, c.runtime_ms);
  }

  json fits = json::array();
  auto add_fit = [&](const std::string& axis, double fixed_value, const std::vector<double>& scales,
                     const std::vector<double>& gaps) {
    json entry{{"axis", axis}, {"fixed", fixed_value}};
    try {
      const RateFit f = fit_rate(scales, gaps);
      entry.update({{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"points", f.used}});
    } catch (const InsufficientDataError& e) {
      entry["error"] = e.what();
    }
    fits.push_back(entry);
  };
  for (double b : spec.b_bars) {
    std::vector<double> s, g;
    for (const auto& c : cells) {
      if (c.b_bar == b) {
        s.push_back(static_cast<double>(c.n));
        g.push_back(c.gap);
      }
    }
    add_fit("n", b, s, g);
  }
  if (spec.b_bars.size() >= 3) {
    for (std::size_t n : spec.ns) {
      std::vector<double> s, g;
      for (const auto& c : cells) {
        if (c.n == n) {
          s.push_back(c.b_bar);
          g.push_back(c.gap);
        }
      }
      add_fit("b_bar", static_cast<double>(n), s, g);
    }
  }
  session.write_json("fit.json", json{{"config_hash", cfg.hash}, {"fits", fits}});

  // Bound shape C (n^{-1/2} + b_bar^{-1}) with C calibrated on the first cell.
  const auto shape = [](const GapCell& c) { return 1.0 / std::sqrt(static_cast<double>(c.n)) + 1.0 / c.b_bar; };
  const double C = std::max(cells.front().gap, 0.0) / shape(cells.front());
  std::ostringstream text;
  text << "multitask convergence\n";
  text << "V_hat = " << fixed(an.value) << "  U(V_hat) = " << fixed(target) << "  utility = " << mcfg.utility << "\n";
  text << "bound C (n^-1/2 + b_bar^-1), C = " << fixed(C) << " from the first cell\n";
  text << "n\tb_bar\tgap\tse\tbound\tstatus\n";
  std::size_t above = 0;
  for (const auto& c : cells) {
    const double bound = C * shape(c);
    const bool ok = c.gap <= bound + 3.0 * c.se;
    if (!ok) ++above;
    text << c.n << "\t" << c.b_bar << "\t" << fixed(c.gap) << "\t" << fixed(c.se) << "\t" << fixed(bound) << "\t"
         << (ok ? "within" : "ABOVE") << "\n";
  }
  text << above << " of " << cells.size() << " cells above the calibrated bound beyond 3 SE\n";
  session.write_text("summary.txt", text.str());
  session.finish();
  return 0;
}

int cmd_contract_eval(const ExperimentConfig& cfg, const RunOptions& options) {
  require_ns(cfg);
  require_replications(cfg);
  Session session("contract-eval", cfg.hash, output_dir(cfg, options), options.deterministic, wants_csv(cfg));
  WorkerPool pool(options.workers);
  const ModelSpec model = build_model(cfg.model);
  const Contract contract =
      make_contract(model, named_policy(cfg), {}, cfg.policy.truncation, cfg.policy.initial_value);
  const TimeGrid grid(cfg.model.horizon, cfg.steps);
  const SeedSpec seed{cfg.mc.master_seed};

  json summary{{"config_hash", cfg.hash}, {"Y0", contract.initial_value}, {"policy", cfg.policy.name}};
  summary["truncation"] = std::isfinite(contract.truncation) ? json(contract.truncation) : json("inf");
  const bool oracle = cfg.model.name == "multitask" && cfg.policy.name == "gamma_hat";
  if (oracle) {
    const MultitaskAnalytic an = multitask_closed_form(cfg);
    summary["oracle_xi_mean"] = contract.initial_value + 0.5 * exp_square_integral(cfg.model.kappa_bar, cfg.model.horizon);
    summary["oracle_principal_identity_u"] = an.value + (model.reservation - contract.initial_value);
  }
  json cases = json::array();
  for (std::size_t n : cfg.mc.ns) {
    const auto start = Clock::now();
    const ContractStudy s = study_contract(model, contract, n, grid, seed, cfg.mc.replications, &pool);
    const double ms = elapsed_ms(start);
    const std::string key = "[n=" + std::to_string(n) + "]";
    const double m = static_cast<double>(cfg.mc.replications);
    const double var_se = m > 1.0 ? s.xi_variance * std::sqrt(2.0 / (m - 1.0)) : 0.0;
    session.record("xi_mean" + key, s.xi.mean, s.xi.se, ms);
    session.record("xi_variance" + key, s.xi_variance, var_se, ms);
    session.record("agent_reward" + key, s.agent_reward.mean, s.agent_reward.se, ms);
    session.record("principal_reward_inside" + key, s.principal_inside.mean, s.principal_inside.se, ms);
    session.record("principal_reward_outside" + key, s.principal_outside.mean, s.principal_outside.se, ms);
    cases.push_back({{"n", n},
                     {"replications", cfg.mc.replications},
                     {"xi_mean", s.xi.mean},
                     {"xi_se", s.xi.se},
                     {"xi_variance", s.xi_variance},
                     {"agent_reward", s.agent_reward.mean},
                     {"agent_reward_se", s.agent_reward.se},
                     {"principal_reward_inside", s.principal_inside.mean},
                     {"principal_reward_inside_se", s.principal_inside.se},
                     {"principal_reward_outside", s.principal_outside.mean},
                     {"principal_reward_outside_se", s.principal_outside.se}});
  }
  summary["cases"] = cases;

  if (cfg.mc.pareto.enabled) {
    const auto& pc = cfg.mc.pareto;
    const auto start = Clock::now();
    const ParetoScan scan = pareto_deviation_scan(model, contract, grid, seed, pc.replications, pc.lo, pc.hi, pc.step, &pool);
    const double ms = elapsed_ms(start);
    const bool reward_ok = std::fabs(scan.recommended.mean - contract.initial_value) <= 3.0 * scan.recommended.se;
    summary["pareto"] = {{"deviations", scan.deviations},
                         {"violations", scan.violations},
                         {"best_gain", scan.best_gain},
                         {"best_gain_se", scan.best_gain_se},
                         {"best_deviation", {scan.best_a1, scan.best_a2}},
                         {"recommended_reward", scan.recommended.mean},
                         {"recommended_reward_se", scan.recommended.se},
                         {"no_improvement", scan.violations == 0},
                         {"reward_equals_Y0", reward_ok}};
    session.record("pareto_best_gain", scan.best_gain, scan.best_gain_se, ms);
    session.record("pareto_violations", static_cast<double>(scan.violations), 0.0, ms);
  }
  if (cfg.output.dump_paths && session.csv()) {
    const auto sim = simulate_particles(model, contract.controls(), cfg.mc.ns.front(), grid, seed);
    write_paths_csv(session.path("paths.csv"), sim.paths, grid);
  }
  session.write_json("contract.json", summary);
  session.finish();
  return 0;
}

int cmd_policy_opt(const ExperimentConfig& cfg, const RunOptions& options) {
  require_proxy(cfg);
  Session session("policy-opt", cfg.hash, output_dir(cfg, options), options.deterministic, wants_csv(cfg));
  WorkerPool pool(options.workers);
  const ModelSpec model = build_model(cfg.model);
  const TimeGrid grid(cfg.model.horizon, cfg.steps);
  const auto& pc = cfg.policy;

  PolicyParam policy = PolicyParam::uniform(cfg.model.horizon, pc.intervals);
  if (!pc.knots.empty()) policy.knots = pc.knots;
  std::fill(policy.gamma_c0.begin(), policy.gamma_c0.end(), pc.initial_c0);
  policy.gamma_box = CoefficientBox{pc.c0_bounds, pc.c1_bounds};
  policy.aleph_box = CoefficientBox{pc.c0_bounds, pc.c1_bounds};
  policy.gamma_state_free = pc.state_free;
  policy.aleph_free = pc.aleph_free;
  policy.aleph_state_free = pc.aleph_free && pc.state_free;

  OptimizeOptions opts;
  opts.budget = pc.budget;
  opts.max_restarts = pc.restarts;
  opts.initial_step = pc.initial_step;
  opts.size_tolerance = pc.size_tolerance;
  opts.objective.antithetic = cfg.mc.antithetic;
  opts.objective.pool = &pool;
  opts.objective.initial_value = pc.initial_value;
  opts.objective.truncation = pc.truncation;

  const auto start = Clock::now();
  const OptimizeResult res = optimize_policy(model, policy, cfg.mc.n_proxy, grid, SeedSpec{cfg.mc.master_seed}, opts);
  const double ms = elapsed_ms(start);

  json doc{{"config_hash", cfg.hash},
           {"knots", res.best.knots},
           {"gamma_c0", res.best.gamma_c0},
           {"gamma_c1", res.best.gamma_c1},
           {"aleph_c0", res.best.aleph_c0},
           {"aleph_c1", res.best.aleph_c1},
           {"V_hat", res.value.value},
           {"V_hat_se", res.value.se},
           {"initial_objective", res.initial.value},
           {"evaluations", res.evaluations},
           {"restarts", res.restarts},
           {"converged", res.converged}};
  session.record("V_hat", res.value.value, res.value.se, ms);
  session.record("initial_objective", res.initial.value, res.initial.se, 0.0);
  if (cfg.model.name == "multitask") {
    const MultitaskAnalytic an = multitask_closed_form(cfg);
    double worst = 0.0;
    json gaps = json::array();
    for (std::size_t j = 0; j < res.best.intervals(); ++j) {
      const double mid = 0.5 * (res.best.knots[j] + res.best.knots[j + 1]);
      const double d = res.best.gamma_c0[j] - an.gamma_hat(mid);
      worst = std::max(worst, std::fabs(d));
      gaps.push_back({{"t_mid", mid}, {"gamma_hat", an.gamma_hat(mid)}, {"difference", d}});
    }
    doc["closed_form_V"] = an.value;
    doc["gamma_hat_comparison"] = gaps;
    doc["max_knot_distance"] = worst;
    session.record("closed_form_V", an.value, 0.0, 0.0);
    session.record("max_knot_distance", worst, 0.0, 0.0);
  }
  session.write_json("policy.json", doc);
  if (session.csv()) write_trace_csv(session.path("trace.csv"), res.trace);
  session.finish();
  return 0;
}

int cmd_chaos(const ExperimentConfig& cfg, const RunOptions& options) {
  require_ns(cfg);
  require_proxy(cfg);
  Session session("chaos", cfg.hash, output_dir(cfg, options), options.deterministic, wants_csv(cfg));
  WorkerPool pool(options.workers);
  const ModelSpec model = build_model(cfg.model);
  ControlSet controls;
  controls.gamma = named_policy(cfg);
  controls.truncation = cfg.policy.truncation;
  const TimeGrid grid(cfg.model.horizon, cfg.steps);
  const SeedSpec seed{cfg.mc.master_seed};
  EngineOptions engine;
  engine.pool = &pool;

  const SeedSpec proxy_seed = cfg.mc.shared_seed ? seed : seed.derive(0x5eed);
  const EmpiricalMeasure proxy = simulate_terminal_measure(model, controls, cfg.mc.n_proxy, grid, proxy_seed, engine);
  std::ostringstream csv;
  csv << std::setprecision(17) << "n,seed_index,w1\n";
  std::vector<double> scales, medians;
  json rows = json::array();
  for (std::size_t n : cfg.mc.ns) {
    const auto start = Clock::now();
    std::vector<double> w(cfg.mc.seeds);
    for (std::size_t s = 0; s < cfg.mc.seeds; ++s) {
      const SeedSpec cell_seed = cfg.mc.shared_seed ? seed : seed.derive(1 + s);
      const EmpiricalMeasure mu = simulate_terminal_measure(model, controls, n, grid, cell_seed, engine);
      w[s] = wasserstein_p(mu, proxy, 1.0);
      csv << n << "," << s << "," << w[s] << "\n";
    }
    const double ms = elapsed_ms(start);
    const Estimate mean = estimate_mean(w);
    std::vector<double> sorted = w;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    scales.push_back(static_cast<double>(n));
    medians.push_back(median);
    rows.push_back({{"n", n}, {"median_w1", median}, {"mean_w1", mean.mean}, {"mean_w1_se", mean.se}});
    session.record("median_w1[n=" + std::to_string(n) + "]", median, mean.se, ms);
  }
  json fit{{"config_hash", cfg.hash}, {"n_proxy", cfg.mc.n_proxy}, {"cells", rows}};
  try {
    const RateFit f = fit_rate(scales, medians);
    fit.update({{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}});
    session.record("w1_slope", f.slope, 0.0, 0.0);
  } catch (const InsufficientDataError& e) {
    fit["error"] = e.what();
  }
  if (session.csv()) session.write_text("chaos.csv", csv.str());
  session.write_json("fit.json", fit);
  session.finish();
  return 0;
}

int cmd_self_check(const RunOptions& options) {
  json raw = json::object();
  std::optional<std::uint64_t> seed = options.seed;
  bool full = options.full_scale;
  std::string out = options.out_dir;
  if (!options.config_path.empty()) {
    std::ifstream in(options.config_path);
    if (!in) throw ConfigError("--config", "cannot open " + options.config_path);
    try {
      raw = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
    if (!raw.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    if (raw.contains("mc") && raw["mc"].contains("master_seed") && !seed) {
      const json& s = raw["mc"]["master_seed"];
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
        throw ConfigError("mc.master_seed", "expected a non-negative integer");
      }
      seed = s.get<std::uint64_t>();
    }
    if (raw.contains("scale")) {
      if (!raw["scale"].is_string()) throw ConfigError("scale", "quick or full");
      const auto sc = raw["scale"].get<std::string>();
      if (sc != "quick" && sc != "full") throw ConfigError("scale", "quick or full");
      full = full || sc == "full";
    }
    if (out.empty() && raw.contains("output") && raw["output"].contains("directory")) {
      if (!raw["output"]["directory"].is_string()) throw ConfigError("output.directory", "expected a string");
      out = raw["output"]["directory"].get<std::string>();
    }
  }
  if (!seed) throw ConfigError("mc.master_seed", "self-check needs --seed or a config with mc.master_seed");
  if (out.empty()) throw ConfigError("output.directory", "required (or pass --out)");
  raw["mc"]["master_seed"] = *seed;
  raw["scale"] = full ? "full" : "quick";
  const std::string hash = config_hash(raw);

  Session session("self-check", hash, out, true, true);
  WorkerPool pool(options.workers);
  CheckContext ctx{SeedSpec{*seed}, full ? CheckScale::kFull : CheckScale::kQuick, &pool};
  json checks = json::array();
  bool all = true;
  std::ostringstream text;
  for (const auto& entry : check_registry()) {
    const auto start = Clock::now();
    CheckResult r;
    try {
      r = entry.run(ctx);
    } catch (const Error& e) {
      r.id = entry.id;
      r.name = entry.name;
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    const double ms = elapsed_ms(start);
    all = all && r.passed;
    checks.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"metrics", r.metrics}});
    session.record("check_" + std::to_string(r.id), r.passed ? 1.0 : 0.0, 0.0, ms);
    if (!r.timings.empty()) session.timing("check_" + std::to_string(r.id) + "_parts", r.timings);
    text << (r.passed ? "PASS " : "FAIL ") << r.id << " " << r.name << ": " << r.detail << "\n";
  }
  session.write_json("self_check.json", json{{"config_hash", hash}, {"scale", full ? "full" : "quick"},
                                             {"passed", all}, {"checks", checks}});
  session.write_text("summary.txt", text.str());
  session.finish();
  return all ? 0 : static_cast<int>(ErrorCode::kCheckFailed);
}

}  // namespace

int run_command(const std::string& command, const RunOptions& options) {
  if (options.workers == 0) throw ConfigError("--workers", "must be >= 1");
  if (command == "self-check") return cmd_self_check(options);
  if (std::find(command_names().begin(), command_names().end(), command) == command_names().end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown command '" + command + "'");
  }
  if (options.config_path.empty()) throw ConfigError("--config", "required for " + command);
  ExperimentConfig cfg = load_config(options.config_path, options.seed);
  RunOptions effective = options;
  effective.deterministic = options.deterministic || cfg.output.deterministic;
  if (command == "multitask-convergence") return cmd_multitask_convergence(cfg, effective);
  if (command == "contract-eval") return cmd_contract_eval(cfg, effective);
  if (command == "policy-opt") return cmd_policy_opt(cfg, effective);
  return cmd_chaos(cfg, effective);
}

}  // namespace mfpa
