#include "mfpa/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "mfpa/errors.hpp"

namespace mfpa {

using nlohmann::json;

namespace {

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require_object(const json& parent, const char* key, const std::string& path) {
  const json* v = find(parent, key);
  if (!v) throw ConfigError(path, "missing block");
  if (!v->is_object()) throw ConfigError(path, "must be an object");
  return *v;
}

double read_real(const json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-infinity") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError(path, "expected a number");
}

std::size_t read_count(const json& v, const std::string& path, std::size_t min_value) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(path, "expected an integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < static_cast<std::int64_t>(min_value)) {
    throw ConfigError(path, "must be >= " + std::to_string(min_value));
  }
  return v.get<std::size_t>();
}

bool read_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

std::string read_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

template <class T, class Reader>
void optional_field(const json& obj, const char* key, const std::string& prefix, T& dst, Reader reader) {
  if (const json* v = find(obj, key)) dst = reader(*v, prefix + "." + key);
}

Interval read_interval(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(path, "expected [lo, hi]");
  Interval out{read_real(v[0], path + "[0]"), read_real(v[1], path + "[1]")};
  if (!(out.lo <= out.hi)) throw ConfigError(path, "lo must not exceed hi");
  return out;
}

void parse_model(const json& doc, ModelConfig& m) {
  const json& block = require_object(doc, "model", "model");
  optional_field(block, "name", "model", m.name, read_string);
  if (m.name != "multitask" && m.name != "quadratic_generic") {
    throw ConfigError("model.name", "unknown model '" + m.name + "' (multitask, quadratic_generic)");
  }
  optional_field(block, "kappa_bar", "model", m.kappa_bar, read_real);
  optional_field(block, "b_bar", "model", m.b_bar, read_real);
  optional_field(block, "reservation", "model", m.reservation, read_real);
  optional_field(block, "horizon", "model", m.horizon, read_real);
  if (const json* u = find(block, "utility")) {
    m.utility = read_string(*u, "model.utility");
    m.utility_given = true;
    utility_by_name(m.utility);
  }
  if (!std::isfinite(m.kappa_bar)) throw ConfigError("model.kappa_bar", "must be finite");
  if (!(m.b_bar > 0.0)) throw ConfigError("model.b_bar", "must be > 0");
  if (!std::isfinite(m.reservation)) throw ConfigError("model.reservation", "must be finite");
  if (!(m.horizon > 0.0) || !std::isfinite(m.horizon)) throw ConfigError("model.horizon", "must be finite and > 0");

  if (const json* init = find(block, "initial")) {
    if (!init->is_object()) throw ConfigError("model.initial", "must be an object");
    auto& law = m.initial;
    optional_field(*init, "law", "model.initial", law.law, read_string);
    if (law.law == "constant") {
      optional_field(*init, "value", "model.initial", law.a, read_real);
    } else if (law.law == "normal") {
      law.b = 1.0;
      optional_field(*init, "mean", "model.initial", law.a, read_real);
      optional_field(*init, "sd", "model.initial", law.b, read_real);
      if (!(law.b >= 0.0)) throw ConfigError("model.initial.sd", "must be >= 0");
    } else if (law.law == "uniform") {
      law.a = -1.0;
      law.b = 1.0;
      optional_field(*init, "lo", "model.initial", law.a, read_real);
      optional_field(*init, "hi", "model.initial", law.b, read_real);
      if (!(law.a < law.b)) throw ConfigError("model.initial", "uniform law needs lo < hi");
    } else {
      throw ConfigError("model.initial.law", "unknown law '" + law.law + "' (constant, normal, uniform)");
    }
  }
  if (const json* g = find(block, "generic")) {
    if (!g->is_object()) throw ConfigError("model.generic", "must be an object");
    auto& p = m.generic;
    const std::string pre = "model.generic";
    optional_field(*g, "effort_cost", pre, p.effort_cost, read_real);
    optional_field(*g, "effort_target", pre, p.effort_target, read_real);
    optional_field(*g, "mean_reversion", pre, p.mean_reversion, read_real);
    optional_field(*g, "interaction", pre, p.interaction, read_real);
    optional_field(*g, "payment_drift", pre, p.payment_drift, read_real);
    optional_field(*g, "payment_cost", pre, p.payment_cost, read_real);
    optional_field(*g, "terminal_shift", pre, p.terminal_shift, read_real);
    optional_field(*g, "vol_level", pre, p.vol_level, read_real);
    optional_field(*g, "principal_payment_cost", pre, p.principal_payment_cost, read_real);
    if (!(p.effort_cost > 0.0)) throw ConfigError(pre + ".effort_cost", "must be > 0");
    if (!(p.vol_level > 0.0)) throw ConfigError(pre + ".vol_level", "must be > 0");
  }
}

void parse_mc(const json& doc, McConfig& mc, std::optional<std::uint64_t> seed_override) {
  const json& block = require_object(doc, "mc", "mc");
  if (const json* s = find(block, "master_seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<std::int64_t>() >= 0)) {
      throw ConfigError("mc.master_seed", "expected a non-negative integer");
    }
    mc.master_seed = s->get<std::uint64_t>();
  } else if (!seed_override) {
    throw ConfigError("mc.master_seed", "required (no implicit seeds)");
  }
  if (seed_override) mc.master_seed = *seed_override;

  if (const json* n = find(block, "n")) {
    if (n->is_array()) {
      if (n->empty()) throw ConfigError("mc.n", "must not be empty");
      for (std::size_t i = 0; i < n->size(); ++i) mc.ns.push_back(read_count((*n)[i], "mc.n[" + std::to_string(i) + "]", 1));
    } else {
      mc.ns.push_back(read_count(*n, "mc.n", 1));
    }
  }
  if (const json* b = find(block, "b_bar")) {
    const json arr = b->is_array() ? *b : json::array({*b});
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const double v = read_real(arr[i], "mc.b_bar[" + std::to_string(i) + "]");
      if (!(v > 0.0)) throw ConfigError("mc.b_bar[" + std::to_string(i) + "]", "must be > 0");
      mc.b_bars.push_back(v);
    }
  }
  if (const json* r = find(block, "replications")) mc.replications = read_count(*r, "mc.replications", 1);
  if (const json* p = find(block, "n_proxy")) mc.n_proxy = read_count(*p, "mc.n_proxy", 1);
  if (const json* s = find(block, "seeds")) mc.seeds = read_count(*s, "mc.seeds", 1);
  optional_field(block, "antithetic", "mc", mc.antithetic, read_bool);
  optional_field(block, "shared_seed", "mc", mc.shared_seed, read_bool);
  if (const json* p = find(block, "pareto")) {
    if (!p->is_object()) throw ConfigError("mc.pareto", "must be an object");
    auto& pc = mc.pareto;
    pc.enabled = true;
    optional_field(*p, "enabled", "mc.pareto", pc.enabled, read_bool);
    optional_field(*p, "lo", "mc.pareto", pc.lo, read_real);
    optional_field(*p, "hi", "mc.pareto", pc.hi, read_real);
    optional_field(*p, "step", "mc.pareto", pc.step, read_real);
    if (const json* r = find(*p, "replications")) pc.replications = read_count(*r, "mc.pareto.replications", 2);
    if (!(pc.step > 0.0)) throw ConfigError("mc.pareto.step", "must be > 0");
    if (!(pc.lo <= pc.hi)) throw ConfigError("mc.pareto", "lo must not exceed hi");
  }
}

void parse_policy(const json& doc, PolicyConfig& p, double horizon) {
  const json* block = find(doc, "policy");
  if (!block) return;
  if (!block->is_object()) throw ConfigError("policy", "must be an object");
  optional_field(*block, "name", "policy", p.name, read_string);
  if (p.name != "gamma_hat" && p.name != "zero" && p.name != "constant") {
    throw ConfigError("policy.name", "unknown policy '" + p.name + "' (gamma_hat, zero, constant)");
  }
  optional_field(*block, "constant", "policy", p.constant, read_real);
  optional_field(*block, "truncation", "policy", p.truncation, read_real);
  if (std::isnan(p.truncation)) throw ConfigError("policy.truncation", "must be a number");
  if (const json* y0 = find(*block, "initial_value")) p.initial_value = read_real(*y0, "policy.initial_value");
  if (const json* k = find(*block, "knots")) {
    if (k->is_array()) {
      for (std::size_t i = 0; i < k->size(); ++i) p.knots.push_back(read_real((*k)[i], "policy.knots[" + std::to_string(i) + "]"));
      if (p.knots.size() < 2) throw ConfigError("policy.knots", "need at least two knots");
      for (std::size_t i = 1; i < p.knots.size(); ++i) {
        if (!(p.knots[i] > p.knots[i - 1])) throw ConfigError("policy.knots", "knots must be strictly increasing");
      }
      if (std::fabs(p.knots.front()) > 1e-12 || std::fabs(p.knots.back() - horizon) > 1e-12 * std::max(1.0, horizon)) {
        throw ConfigError("policy.knots", "knots must span [0, horizon]");
      }
      p.intervals = p.knots.size() - 1;
    } else {
      p.intervals = read_count(*k, "policy.knots", 1);
    }
  }
  if (const json* b = find(*block, "budget")) p.budget = read_count(*b, "policy.budget", 1);
  if (const json* r = find(*block, "restarts")) p.restarts = read_count(*r, "policy.restarts", 0);
  optional_field(*block, "initial_step", "policy", p.initial_step, read_real);
  optional_field(*block, "size_tolerance", "policy", p.size_tolerance, read_real);
  optional_field(*block, "initial_c0", "policy", p.initial_c0, read_real);
  optional_field(*block, "state_free", "policy", p.state_free, read_bool);
  optional_field(*block, "aleph_free", "policy", p.aleph_free, read_bool);
  if (const json* b = find(*block, "c0_bounds")) p.c0_bounds = read_interval(*b, "policy.c0_bounds");
  if (const json* b = find(*block, "c1_bounds")) p.c1_bounds = read_interval(*b, "policy.c1_bounds");
  if (!(p.initial_step > 0.0)) throw ConfigError("policy.initial_step", "must be > 0");
  if (!(p.size_tolerance > 0.0)) throw ConfigError("policy.size_tolerance", "must be > 0");
}

void parse_output(const json& doc, OutputConfig& o) {
  const json* block = find(doc, "output");
  if (!block) return;
  if (!block->is_object()) throw ConfigError("output", "must be an object");
  optional_field(*block, "directory", "output", o.directory, read_string);
  if (const json* f = find(*block, "formats")) {
    if (!f->is_array()) throw ConfigError("output.formats", "expected an array");
    o.formats.clear();
    for (std::size_t i = 0; i < f->size(); ++i) {
      const auto s = read_string((*f)[i], "output.formats[" + std::to_string(i) + "]");
      if (s != "csv" && s != "json") throw ConfigError("output.formats[" + std::to_string(i) + "]", "csv or json");
      o.formats.push_back(s);
    }
  }
  optional_field(*block, "dump_paths", "output", o.dump_paths, read_bool);
  optional_field(*block, "deterministic", "output", o.deterministic, read_bool);
}

}  // namespace

InitialLaw InitialLawConfig::build() const {
  if (law == "normal") return InitialLaw::normal(a, b);
  if (law == "uniform") return InitialLaw::uniform(a, b);
  return InitialLaw::constant(a);
}

ExperimentConfig parse_config(json doc, std::optional<std::uint64_t> seed_override) {
  if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  ExperimentConfig cfg;
  parse_model(doc, cfg.model);
  const json& grid = require_object(doc, "grid", "grid");
  const json* steps = find(grid, "steps");
  if (!steps) throw ConfigError("grid.steps", "required (no implicit time step)");
  cfg.steps = read_count(*steps, "grid.steps", 1);
  parse_mc(doc, cfg.mc, seed_override);
  parse_policy(doc, cfg.policy, cfg.model.horizon);
  parse_output(doc, cfg.output);
  if (seed_override) doc["mc"]["master_seed"] = *seed_override;
  cfg.hash = config_hash(doc);
  cfg.raw = std::move(doc);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(std::move(doc), seed_override);
}

std::string config_hash(const json& doc) {
  const std::string text = doc.dump();  // object keys are kept sorted
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

ModelSpec build_model(const ModelConfig& config, std::optional<double> b_bar) {
  const auto utility = utility_by_name(config.utility);
  const InitialLaw law = config.initial.build();
  if (config.name == "multitask") {
    MultitaskParams params{config.kappa_bar, b_bar.value_or(config.b_bar)};
    return multitask_model(params, config.reservation, config.horizon, law, utility);
  }
  return quadratic_generic_model(config.generic, config.reservation, config.horizon, law, utility);
}

}  // namespace mfpa
