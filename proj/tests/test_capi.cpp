#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "mfpa/mfpa.h"

namespace fs = std::filesystem;

TEST_CASE("version and context lifecycle") {
  CHECK(std::strlen(mfpa_version()) > 0);
  mfpa_context* ctx = nullptr;
  CHECK(mfpa_context_create(0, &ctx) != MFPA_OK);
  REQUIRE(mfpa_context_create(2, &ctx) == MFPA_OK);
  REQUIRE(ctx != nullptr);
  CHECK(std::string(mfpa_last_error(ctx)).empty());
  mfpa_context_destroy(ctx);
  mfpa_context_destroy(nullptr);
  CHECK(mfpa_context_create(1, nullptr) == MFPA_ERR_INVALID_ARGUMENT);
}

TEST_CASE("run options defaults") {
  mfpa_run_options o;
  std::memset(&o, 0xff, sizeof o);
  mfpa_run_options_init(&o);
  CHECK(o.config_path == nullptr);
  CHECK(o.out_dir == nullptr);
  CHECK(o.has_seed == 0);
  CHECK(o.deterministic == 0);
  CHECK(o.full_scale == 0);
}

TEST_CASE("run command maps errors to status codes") {
  mfpa_context* ctx = nullptr;
  REQUIRE(mfpa_context_create(1, &ctx) == MFPA_OK);
  const fs::path dir = fs::temp_directory_path() / "mfpa_capi_tests";
  fs::remove_all(dir);
  fs::create_directories(dir);

  mfpa_run_options o;
  mfpa_run_options_init(&o);
  const std::string missing = (dir / "missing.json").string();
  o.config_path = missing.c_str();
  CHECK(mfpa_run_command(ctx, "chaos", &o) == MFPA_ERR_CONFIG);
  CHECK(std::string(mfpa_last_error(ctx)).find("missing.json") != std::string::npos);

  const std::string no_seed = (dir / "no_seed.json").string();
  std::ofstream(no_seed) << R"({"model": {"name": "multitask"}, "grid": {"steps": 4}, "mc": {"n": [2]}})";
  o.config_path = no_seed.c_str();
  CHECK(mfpa_run_command(ctx, "chaos", &o) == MFPA_ERR_CONFIG);
  CHECK(std::string(mfpa_last_error(ctx)).find("mc.master_seed") != std::string::npos);

  CHECK(mfpa_run_command(ctx, "bogus", &o) == MFPA_ERR_INVALID_ARGUMENT);
  CHECK(mfpa_run_command(ctx, nullptr, &o) == MFPA_ERR_INVALID_ARGUMENT);
  CHECK(mfpa_run_command(nullptr, "chaos", &o) == MFPA_ERR_INVALID_ARGUMENT);

  const std::string good = (dir / "good.json").string();
  std::ofstream(good) << R"({"model": {"name": "multitask", "kappa_bar": 0.5, "initial": {"law": "normal"}},
    "grid": {"steps": 10}, "mc": {"n": [5, 10, 20], "n_proxy": 200, "seeds": 2, "master_seed": 3}})";
  const std::string out = (dir / "out").string();
  o.config_path = good.c_str();
  o.out_dir = out.c_str();
  o.deterministic = 1;
  CHECK(mfpa_run_command(ctx, "chaos", &o) == MFPA_OK);
  CHECK(std::string(mfpa_last_error(ctx)).empty());
  CHECK(fs::exists(fs::path(out) / "fit.json"));
  CHECK(fs::exists(fs::path(out) / "timings.json"));
  mfpa_context_destroy(ctx);
}

TEST_CASE("closed-form multitask helpers") {
  double v = 0.0;
  REQUIRE(mfpa_multitask_value(0.5, 0.0, 1.0, 0.0, &v) == MFPA_OK);
  CHECK(v == doctest::Approx((std::exp(1.0) - 1.0) / 2.0).epsilon(1e-14));
  REQUIRE(mfpa_multitask_value(0.0, 0.25, 2.0, 0.5, &v) == MFPA_OK);
  CHECK(v == doctest::Approx(1.25));
  CHECK(mfpa_multitask_value(0.5, 0.0, 1.0, 0.0, nullptr) == MFPA_ERR_INVALID_ARGUMENT);

  double g = 0.0;
  REQUIRE(mfpa_multitask_gamma(0.5, 1.0, 0.0, &g) == MFPA_OK);
  CHECK(g == doctest::Approx(std::exp(0.5)));
  REQUIRE(mfpa_multitask_gamma(0.5, 1.0, 1.0, &g) == MFPA_OK);
  CHECK(g == 1.0);
}

TEST_CASE("wasserstein through the C interface") {
  const double a[] = {0.0, 1.0, 2.0};
  const double b[] = {1.0, 2.0, 3.0};
  double w = -1.0;
  REQUIRE(mfpa_wasserstein(a, 3, b, 3, 1.0, &w) == MFPA_OK);
  CHECK(w == doctest::Approx(1.0));
  REQUIRE(mfpa_wasserstein(a, 3, a, 3, 2.0, &w) == MFPA_OK);
  CHECK(w == 0.0);
  CHECK(mfpa_wasserstein(a, 3, b, 3, 0.5, &w) == MFPA_ERR_NUMERIC_DOMAIN);
  CHECK(mfpa_wasserstein(a, 0, b, 3, 1.0, &w) != MFPA_OK);
  CHECK(mfpa_wasserstein(nullptr, 3, b, 3, 1.0, &w) == MFPA_ERR_INVALID_ARGUMENT);
}
