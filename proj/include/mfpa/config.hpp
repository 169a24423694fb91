#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfpa/model.hpp"

namespace mfpa {

struct InitialLawConfig {
  std::string law = "constant";
  double a = 0.0;  // value / mean / lower end
  double b = 0.0;  // - / stddev / upper end
  InitialLaw build() const;
};

struct ModelConfig {
  std::string name = "multitask";
  double kappa_bar = 0.0;
  double b_bar = std::numeric_limits<double>::infinity();
  double reservation = 0.0;
  double horizon = 1.0;
  InitialLawConfig initial;
  std::string utility = "identity";
  bool utility_given = false;
  QuadraticGenericParams generic;
};

struct ParetoConfig {
  bool enabled = false;
  double lo = -3.0;
  double hi = 3.0;
  double step = 0.25;
  std::size_t replications = 200;
};

struct McConfig {
  std::vector<std::size_t> ns;
  std::vector<double> b_bars;
  std::size_t replications = 0;
  std::size_t n_proxy = 0;
  std::uint64_t master_seed = 0;
  bool antithetic = false;
  std::size_t seeds = 20;
  bool shared_seed = false;
  ParetoConfig pareto;
};

struct PolicyConfig {
  std::string name = "gamma_hat";  // gamma_hat | zero | constant
  double constant = 0.0;
  double truncation = std::numeric_limits<double>::infinity();
  std::optional<double> initial_value;
  std::vector<double> knots;  // explicit knots; empty means `intervals` uniform ones
  std::size_t intervals = 4;
  std::size_t budget = 2000;
  std::size_t restarts = 4;
  double initial_step = 0.5;
  double size_tolerance = 1e-4;
  double initial_c0 = 0.0;
  bool state_free = true;
  bool aleph_free = false;
  Interval c0_bounds{-10.0, 10.0};
  Interval c1_bounds{-5.0, 5.0};
};

struct OutputConfig {
  std::string directory;
  std::vector<std::string> formats{"csv", "json"};
  bool dump_paths = false;
  bool deterministic = false;
};

struct ExperimentConfig {
  nlohmann::json raw;
  std::string hash;
  ModelConfig model;
  std::size_t steps = 0;
  McConfig mc;
  PolicyConfig policy;
  OutputConfig output;
};

/// Validates a config document. Missing reproducibility-critical fields
/// (grid.steps, mc.master_seed) are errors; `seed_override` replaces the
/// master seed before hashing.
ExperimentConfig parse_config(nlohmann::json doc, std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// SHA-256 of the canonical (sorted-key, compact) serialization.
std::string config_hash(const nlohmann::json& doc);

ModelSpec build_model(const ModelConfig& config, std::optional<double> b_bar = std::nullopt);

}  // namespace mfpa
