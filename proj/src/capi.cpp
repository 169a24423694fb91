#include "mfpa/mfpa.h"

#include <cmath>
#include <new>
#include <string>
#include <vector>

#include "mfpa/errors.hpp"
#include "mfpa/experiments.hpp"
#include "mfpa/measures.hpp"
#include "mfpa/mkv_control.hpp"

struct mfpa_context {
  std::size_t workers = 1;
  std::string last_error;
};

namespace {

mfpa_status status_of(mfpa::ErrorCode code) { return static_cast<mfpa_status>(static_cast<int>(code)); }

template <class Fn>
mfpa_status guarded(mfpa_context* ctx, Fn&& fn) {
  try {
    return fn();
  } catch (const mfpa::Error& e) {
    if (ctx) ctx->last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    if (ctx) ctx->last_error = "out of memory";
    return MFPA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    if (ctx) ctx->last_error = e.what();
    return MFPA_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* mfpa_version(void) { return "1.0.0"; }

mfpa_status mfpa_context_create(size_t workers, mfpa_context** out) {
  if (!out || workers == 0) return MFPA_ERR_INVALID_ARGUMENT;
  *out = new (std::nothrow) mfpa_context;
  if (!*out) return MFPA_ERR_INTERNAL;
  (*out)->workers = workers;
  return MFPA_OK;
}

void mfpa_context_destroy(mfpa_context* ctx) { delete ctx; }

const char* mfpa_last_error(const mfpa_context* ctx) { return ctx ? ctx->last_error.c_str() : ""; }

void mfpa_run_options_init(mfpa_run_options* options) {
  if (!options) return;
  options->config_path = nullptr;
  options->out_dir = nullptr;
  options->seed = 0;
  options->has_seed = 0;
  options->deterministic = 0;
  options->full_scale = 0;
}

mfpa_status mfpa_run_command(mfpa_context* ctx, const char* command, const mfpa_run_options* options) {
  if (!ctx || !command || !options) return MFPA_ERR_INVALID_ARGUMENT;
  ctx->last_error.clear();
  return guarded(ctx, [&]() {
    mfpa::RunOptions run;
    if (options->config_path) run.config_path = options->config_path;
    if (options->out_dir) run.out_dir = options->out_dir;
    if (options->has_seed) run.seed = options->seed;
    run.workers = ctx->workers;
    run.deterministic = options->deterministic != 0;
    run.full_scale = options->full_scale != 0;
    const int rc = mfpa::run_command(command, run);
    if (rc == static_cast<int>(mfpa::ErrorCode::kCheckFailed)) {
      ctx->last_error = "self-check: at least one suite failed";
      return MFPA_ERR_CHECK_FAILED;
    }
    return static_cast<mfpa_status>(rc);
  });
}

mfpa_status mfpa_multitask_value(double kappa_bar, double reservation, double horizon, double mean_iota,
                                 double* value) {
  if (!value || !(horizon > 0.0)) return MFPA_ERR_INVALID_ARGUMENT;
  *value = mfpa::analytic_multitask(kappa_bar, reservation, horizon, mean_iota).value;
  return std::isfinite(*value) ? MFPA_OK : MFPA_ERR_NUMERIC_DOMAIN;
}

mfpa_status mfpa_multitask_gamma(double kappa_bar, double horizon, double t, double* value) {
  if (!value || !(horizon > 0.0)) return MFPA_ERR_INVALID_ARGUMENT;
  *value = mfpa::analytic_multitask(kappa_bar, 0.0, horizon, 0.0).gamma_hat(t);
  return MFPA_OK;
}

mfpa_status mfpa_wasserstein(const double* a, size_t na, const double* b, size_t nb, double p, double* value) {
  if (!a || !b || !value || na == 0 || nb == 0) return MFPA_ERR_INVALID_ARGUMENT;
  return guarded(nullptr, [&]() {
    const mfpa::EmpiricalMeasure ma(std::vector<double>(a, a + na));
    const mfpa::EmpiricalMeasure mb(std::vector<double>(b, b + nb));
    *value = mfpa::wasserstein_p(ma, mb, p);
    return MFPA_OK;
  });
}

}  // extern "C"
