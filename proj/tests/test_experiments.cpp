#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfpa/config.hpp"
#include "mfpa/errors.hpp"
#include "mfpa/experiments.hpp"
#include "mfpa/measures.hpp"
#include "mfpa/sde_engine.hpp"
#include "support.hpp"

using namespace mfpa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mfpa_experiment_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string write_config(const fs::path& dir, const json& doc) {
  const auto path = (dir / "config.json").string();
  std::ofstream(path) << doc.dump(2);
  return path;
}

json base_config() {
  return json::parse(R"({
    "model": {"name": "multitask", "kappa_bar": 0.5, "b_bar": 10, "reservation": 0,
              "horizon": 1, "initial": {"law": "normal", "mean": 0, "sd": 1}},
    "grid": {"steps": 20},
    "mc": {"n": [10, 100], "replications": 100, "master_seed": 2024, "n_proxy": 2000},
    "policy": {"name": "gamma_hat", "knots": 2, "budget": 60},
    "output": {"formats": ["csv", "json"]}
  })");
}

std::string config_field_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse_config(base_config());
  CHECK(cfg.model.kappa_bar == 0.5);
  CHECK(cfg.steps == 20);
  CHECK(cfg.mc.ns == std::vector<std::size_t>{10, 100});
  CHECK(cfg.mc.master_seed == 2024);
  CHECK(cfg.model.initial.build().variance() == 1.0);
  CHECK(cfg.policy.intervals == 2);
  CHECK(cfg.hash.size() == 64);

  json inf = base_config();
  inf["model"]["b_bar"] = "inf";
  CHECK(std::isinf(parse_config(inf).model.b_bar));

  const ExperimentConfig seeded = parse_config(base_config(), 7);
  CHECK(seeded.mc.master_seed == 7);
  CHECK(seeded.hash != cfg.hash);
}

TEST_CASE("config errors carry the field path") {
  json no_seed = base_config();
  no_seed["mc"].erase("master_seed");
  CHECK(config_field_error(no_seed) == "mc.master_seed");
  CHECK(parse_config(no_seed, 3).mc.master_seed == 3);

  json no_steps = base_config();
  no_steps["grid"].erase("steps");
  CHECK(config_field_error(no_steps) == "grid.steps");

  json no_grid = base_config();
  no_grid.erase("grid");
  CHECK(config_field_error(no_grid) == "grid");

  json bad_b = base_config();
  bad_b["mc"]["b_bar"] = json::array({1.0, -2.0});
  CHECK(config_field_error(bad_b) == "mc.b_bar[1]");

  json bad_model = base_config();
  bad_model["model"]["name"] = "other";
  CHECK(config_field_error(bad_model) == "model.name");

  json bad_law = base_config();
  bad_law["model"]["initial"]["law"] = "cauchy";
  CHECK(config_field_error(bad_law) == "model.initial.law");

  json bad_knots = base_config();
  bad_knots["policy"]["knots"] = json::array({0.0, 0.7, 0.5, 1.0});
  CHECK(config_field_error(bad_knots) == "policy.knots");

  json bad_utility = base_config();
  bad_utility["model"]["utility"] = "log";
  CHECK(config_field_error(bad_utility) == "model.utility");

  json negative_seed = base_config();
  negative_seed["mc"]["master_seed"] = -1;
  CHECK(config_field_error(negative_seed) == "mc.master_seed");
}

TEST_CASE("config hash ignores key order") {
  const json a = json::parse(R"({"b": 1, "a": {"y": [1, 2], "x": "s"}})");
  const json b = json::parse(R"({"a": {"x": "s", "y": [1, 2]}, "b": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(json::parse(R"({"b": 2, "a": {"y": [1, 2], "x": "s"}})")));
  // SHA-256 of the two bytes "{}".
  CHECK(config_hash(json::object()) == "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a");
}

TEST_CASE("built models follow the config") {
  ModelConfig mc;
  mc.kappa_bar = 0.0;
  mc.utility = "cara";
  const ModelSpec m = build_model(mc, 3.0);
  CHECK(m.principal_utility(1.0) == doctest::Approx(1.0 - std::exp(-1.0)));
  mc.name = "quadratic_generic";
  CHECK(build_model(mc).name == "quadratic-generic");
}

TEST_CASE("multitask-convergence smoke and determinism") {
  const fs::path dir = scratch("convergence");
  json doc = base_config();
  doc["mc"]["replications"] = 200;
  const std::string config = write_config(dir, doc);
  RunOptions o;
  o.config_path = config;
  o.out_dir = (dir / "a").string();
  o.deterministic = true;
  CHECK(run_command("multitask-convergence", o) == 0);
  o.out_dir = (dir / "b").string();
  o.workers = 3;
  CHECK(run_command("multitask-convergence", o) == 0);

  const std::string gaps = slurp(dir / "a" / "gaps.csv");
  CHECK(gaps == slurp(dir / "b" / "gaps.csv"));
  CHECK(slurp(dir / "a" / "results.json") == slurp(dir / "b" / "results.json"));
  std::istringstream lines(gaps);
  std::string line;
  int rows = -1;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 2);
  CHECK(fs::exists(dir / "a" / "fit.json"));
  CHECK(fs::exists(dir / "a" / "summary.txt"));
  CHECK(fs::exists(dir / "a" / "timings.json"));

  const json results = json::parse(slurp(dir / "a" / "results.json"));
  for (const auto& r : results["records"]) {
    CHECK(r["config_hash"] == results["config_hash"]);
    CHECK(r["runtime_ms"] == 0.0);
    CHECK(r.contains("se"));
  }
}

TEST_CASE("zero interaction reports the closed form with T / 2") {
  const fs::path dir = scratch("closed_form");
  json doc = base_config();
  doc["model"]["kappa_bar"] = 0.0;
  doc["model"]["reservation"] = 0.25;
  doc["model"]["horizon"] = 2.0;
  doc["model"]["initial"] = {{"law", "normal"}, {"mean", 0.5}, {"sd", 1.0}};
  doc["model"]["utility"] = "identity";
  doc["mc"]["n"] = json::array({10});
  doc["mc"]["replications"] = 20;
  RunOptions o;
  o.config_path = write_config(dir, doc);
  o.out_dir = dir.string();
  CHECK(run_command("multitask-convergence", o) == 0);
  const json results = json::parse(slurp(dir / "results.json"));
  bool found = false;
  for (const auto& r : results["records"]) {
    if (r["metric"] == "V_hat") {
      CHECK(r["value"].get<double>() == doctest::Approx(-0.25 + 0.5 + 1.0));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("contract-eval smoke") {
  const fs::path dir = scratch("contract");
  json doc = base_config();
  doc["mc"]["n"] = json::array({10});
  doc["mc"]["pareto"] = {{"lo", -1.0}, {"hi", 1.0}, {"step", 1.0}, {"replications", 20}};
  doc["output"]["dump_paths"] = true;
  RunOptions o;
  o.config_path = write_config(dir, doc);
  o.out_dir = dir.string();
  CHECK(run_command("contract-eval", o) == 0);
  const json c = json::parse(slurp(dir / "contract.json"));
  CHECK(c["Y0"] == 0.0);
  CHECK(c["cases"].size() == 1);
  const double xi = c["cases"][0]["xi_mean"];
  CHECK(std::fabs(xi - c["oracle_xi_mean"].get<double>()) <=
        3.0 * c["cases"][0]["xi_se"].get<double>() + 0.1);
  CHECK(c["pareto"]["deviations"] == 9);
  CHECK(c["pareto"]["violations"] == 0);
  CHECK(fs::exists(dir / "paths.csv"));

  // Zero policy pays exactly Y0.
  json zero = doc;
  zero["policy"] = {{"name", "zero"}, {"initial_value", 0.5}};
  zero["mc"].erase("pareto");
  const fs::path zdir = scratch("contract_zero");
  o.config_path = write_config(zdir, zero);
  o.out_dir = zdir.string();
  CHECK(run_command("contract-eval", o) == 0);
  const json z = json::parse(slurp(zdir / "contract.json"));
  CHECK(z["cases"][0]["xi_mean"] == 0.5);
  CHECK(z["cases"][0]["xi_se"] == 0.0);
}

TEST_CASE("policy-opt smoke") {
  const fs::path dir = scratch("policy");
  json doc = base_config();
  doc["model"]["kappa_bar"] = 0.0;
  doc["policy"] = {{"knots", 2}, {"budget", 80}, {"state_free", false}};
  RunOptions o;
  o.config_path = write_config(dir, doc);
  o.out_dir = dir.string();
  CHECK(run_command("policy-opt", o) == 0);
  const json p = json::parse(slurp(dir / "policy.json"));
  CHECK(p["V_hat"].get<double>() >= p["initial_objective"].get<double>());
  CHECK(p["gamma_c0"].size() == 2);
  CHECK(p["closed_form_V"] == 0.5);
  CHECK(fs::exists(dir / "trace.csv"));
}

TEST_CASE("chaos smoke and shared seed") {
  const fs::path dir = scratch("chaos");
  json doc = base_config();
  doc["mc"]["n"] = json::array({50, 200, 800});
  doc["mc"]["seeds"] = 3;
  RunOptions o;
  o.config_path = write_config(dir, doc);
  o.out_dir = dir.string();
  CHECK(run_command("chaos", o) == 0);
  const json fit = json::parse(slurp(dir / "fit.json"));
  CHECK(fit["cells"].size() == 3);
  CHECK(fit.contains("slope"));

  // n equal to the proxy size with a shared seed reproduces the proxy.
  json shared = doc;
  shared["mc"]["n"] = json::array({2000});
  shared["mc"]["seeds"] = 1;
  shared["mc"]["shared_seed"] = true;
  const fs::path sdir = scratch("chaos_shared");
  o.config_path = write_config(sdir, shared);
  o.out_dir = sdir.string();
  CHECK(run_command("chaos", o) == 0);
  const json sfit = json::parse(slurp(sdir / "fit.json"));
  CHECK(sfit["cells"][0]["median_w1"] == 0.0);
}

TEST_CASE("point mass without noise has zero distance to its proxy") {
  const ModelSpec m = testing_support::constant_coefficient_model(0.7, 0.0);
  const TimeGrid grid(1.0, 10);
  const auto a = simulate_terminal_measure(m, {}, 10, grid, SeedSpec{1});
  const auto b = simulate_terminal_measure(m, {}, 1000, grid, SeedSpec{2});
  CHECK(wasserstein_p(a, b) == 0.0);
}

TEST_CASE("command errors") {
  RunOptions o;
  CHECK_THROWS_AS(run_command("contract-eval", o), ConfigError);
  CHECK_THROWS_AS(run_command("nonsense", o), Error);
  o.workers = 0;
  CHECK_THROWS_AS(run_command("chaos", o), ConfigError);

  const fs::path dir = scratch("errors");
  json doc = base_config();
  doc["model"]["name"] = "quadratic_generic";
  RunOptions p;
  p.config_path = write_config(dir, doc);
  p.out_dir = dir.string();
  CHECK_THROWS_AS(run_command("multitask-convergence", p), ConfigError);

  RunOptions s;
  s.out_dir = dir.string();
  CHECK_THROWS_AS(run_command("self-check", s), ConfigError);
  p.config_path = (dir / "missing.json").string();
  CHECK_THROWS_AS(run_command("chaos", p), ConfigError);
}
