#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfpa/config.hpp"
#include "mfpa/parallel.hpp"

namespace mfpa {

struct RunOptions {
  std::string config_path;  // optional for self-check
  std::string out_dir;      // overrides output.directory
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool deterministic = false;  // runtimes written as 0, real ones to timings.json
  bool full_scale = false;     // self-check at acceptance scale
};

struct ResultRecord {
  std::string experiment;
  std::string config_hash;
  std::string metric;
  double value = 0.0;
  double se = 0.0;
  double runtime_ms = 0.0;
};

nlohmann::json to_json(const ResultRecord& record, bool zero_runtime);

/// Runs one subcommand. Returns 0 on success and 4 when self-check finds a
/// failing suite; configuration and numeric problems are thrown as Error.
int run_command(const std::string& command, const RunOptions& options);

const std::vector<std::string>& command_names();

}  // namespace mfpa
