// Command-line front end; talks to the library through the C API only.
#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mfpa/mfpa.h"

namespace {

int exit_code(mfpa_status status) {
  switch (status) {
    case MFPA_OK: return 0;
    case MFPA_ERR_CONFIG: return 2;
    case MFPA_ERR_SIMULATION_BLOWUP: return 3;
    case MFPA_ERR_CHECK_FAILED: return 4;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field principal-agent experiments"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  bool deterministic = false;
  bool full = false;

  const char* commands[][2] = {
      {"multitask-convergence", "gap sweep over (n, b_bar) and rate fits"},
      {"contract-eval", "simulate a contract and report payments and rewards"},
      {"policy-opt", "Nelder-Mead search over piecewise affine policies"},
      {"chaos", "W1 between n-particle and proxy terminal laws"},
      {"self-check", "run the invariant suites"},
  };
  CLI::Option* seed_opt = nullptr;
  for (auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config, "JSON config file");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    auto* opt = sub->add_option("--seed", seed, "master seed (overrides the config)");
    if (std::string(c[0]) == "self-check") {
      sub->add_flag("--full", full, "acceptance-scale suites");
    } else {
      sub->add_flag("--deterministic", deterministic, "write runtimes to timings.json only");
    }
    sub->callback([&, opt]() { seed_opt = opt; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  mfpa_context* ctx = nullptr;
  if (mfpa_context_create(workers, &ctx) != MFPA_OK) {
    std::fprintf(stderr, "error: cannot create context\n");
    return 1;
  }
  mfpa_run_options options;
  mfpa_run_options_init(&options);
  options.config_path = config.empty() ? nullptr : config.c_str();
  options.out_dir = out.empty() ? nullptr : out.c_str();
  options.has_seed = seed_opt && seed_opt->count() > 0;
  options.seed = seed;
  options.deterministic = deterministic;
  options.full_scale = full;

  const mfpa_status status = mfpa_run_command(ctx, command.c_str(), &options);
  if (status != MFPA_OK) std::fprintf(stderr, "error: %s\n", mfpa_last_error(ctx));
  mfpa_context_destroy(ctx);
  return exit_code(status);
}
