/* C interface of the mfpa library. */
#ifndef MFPA_MFPA_H
#define MFPA_MFPA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MFPA_API __declspec(dllexport)
#else
#define MFPA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mfpa_status {
  MFPA_OK = 0,
  MFPA_ERR_INVALID_ARGUMENT = 1,
  MFPA_ERR_CONFIG = 2,
  MFPA_ERR_SIMULATION_BLOWUP = 3,
  MFPA_ERR_CHECK_FAILED = 4,
  MFPA_ERR_NUMERIC_DOMAIN = 5,
  MFPA_ERR_AMBIGUOUS_MAXIMIZER = 6,
  MFPA_ERR_CONTRACT_EVALUATION = 7,
  MFPA_ERR_INSUFFICIENT_DATA = 8,
  MFPA_ERR_IO = 9,
  MFPA_ERR_INTERNAL = 10
} mfpa_status;

typedef struct mfpa_context mfpa_context;

typedef struct mfpa_run_options {
  const char* config_path; /* may be NULL for self-check */
  const char* out_dir;     /* overrides output.directory when non-NULL */
  uint64_t seed;
  int has_seed;            /* nonzero: seed overrides mc.master_seed */
  int deterministic;       /* nonzero: runtimes go to timings.json only */
  int full_scale;          /* self-check at acceptance scale */
} mfpa_run_options;

MFPA_API const char* mfpa_version(void);

MFPA_API mfpa_status mfpa_context_create(size_t workers, mfpa_context** out);
MFPA_API void mfpa_context_destroy(mfpa_context* ctx);

/* Message of the last failing call on this context ("" when none). */
MFPA_API const char* mfpa_last_error(const mfpa_context* ctx);

MFPA_API void mfpa_run_options_init(mfpa_run_options* options);

/* Runs a subcommand: multitask-convergence, contract-eval, policy-opt,
 * chaos or self-check. */
MFPA_API mfpa_status mfpa_run_command(mfpa_context* ctx, const char* command, const mfpa_run_options* options);

/* Closed-form multitask value and gamma_hat(t). */
MFPA_API mfpa_status mfpa_multitask_value(double kappa_bar, double reservation, double horizon, double mean_iota,
                                          double* value);
MFPA_API mfpa_status mfpa_multitask_gamma(double kappa_bar, double horizon, double t, double* value);

/* Wasserstein-p distance between two samples. */
MFPA_API mfpa_status mfpa_wasserstein(const double* a, size_t na, const double* b, size_t nb, double p,
                                      double* value);

#ifdef __cplusplus
}
#endif

#endif /* MFPA_MFPA_H */
