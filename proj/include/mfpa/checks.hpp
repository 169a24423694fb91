#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfpa/parallel.hpp"
#include "mfpa/rng.hpp"

namespace mfpa {

enum class CheckScale { kQuick, kFull };

struct CheckContext {
  SeedSpec seed;
  CheckScale scale = CheckScale::kQuick;
  WorkerPool* pool = nullptr;
};

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json timings = nlohmann::json::object();  // wall-clock, kept apart from metrics
  double runtime_ms = 0.0;
};

// Invariant suites shared by `self-check` and the acceptance harness.
CheckResult check_multitask_value(const CheckContext& ctx);
CheckResult check_contract_identity(const CheckContext& ctx);
CheckResult check_gap_bound(const CheckContext& ctx);
CheckResult check_truncation_term(const CheckContext& ctx);
CheckResult check_pareto(const CheckContext& ctx);
CheckResult check_hamiltonian_envelope(const CheckContext& ctx);
CheckResult check_propagation_of_chaos(const CheckContext& ctx);
CheckResult check_policy_recovery(const CheckContext& ctx);
/// In-process variant: the same simulations under 1 and 3 workers.
CheckResult check_worker_invariance(const CheckContext& ctx);
CheckResult check_numeric_baseline(const CheckContext& ctx);

struct CheckEntry {
  int id;
  const char* name;
  std::function<CheckResult(const CheckContext&)> run;
};

/// All suites in criterion order.
const std::vector<CheckEntry>& check_registry();

/// Composite Simpson rule with `panels` (even) sub-intervals.
double simpson(const std::function<double(double)>& f, double a, double b, std::size_t panels = 10000);

}  // namespace mfpa
