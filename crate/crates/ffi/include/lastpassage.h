#ifndef LASTPASSAGE_H
#define LASTPASSAGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LpStatus {
  LP_STATUS_OK = 0,
  LP_STATUS_NULL_POINTER = 1,
  // Parameter outside its domain.
  LP_STATUS_DOMAIN = 2,
  // Model is not a transient diffusion of the supported kind.
  LP_STATUS_INVALID_MODEL = 3,
  // Malformed JSON model or expression.
  LP_STATUS_SPEC = 4,
  // Quadrature, root finding or boundary search failed.
  LP_STATUS_NUMERIC = 5,
  LP_STATUS_SIMULATION = 6,
  LP_STATUS_IO = 7,
  LP_STATUS_PANIC = 8,
} LpStatus;

// Opaque model handle.
typedef struct LpModel LpModel;

// Opaque value-function handle.
typedef struct LpValueFunction LpValueFunction;

typedef struct LpSolution {
  double z;
  double r_star;
  double cost_root;
  // `G(r*)`, the boundary equation at the returned root.
  double residual;
  double bracket_lo;
  double bracket_hi;
  uint32_t iterations;
  // 0: power-law closed form, 1: general quadrature.
  uint32_t method;
} LpSolution;

typedef struct LpMcConfig {
  double dt;
  uint64_t n_paths;
  double upper_barrier_eps;
  double t_max;
  uint64_t seed;
  double x0;
} LpMcConfig;

typedef struct LpMcEstimate {
  double mean;
  double std_error;
  uint64_t n_effective;
  double censor_fraction;
  // Nonzero when more than 5% of paths were censored.
  uint32_t censor_warning;
} LpMcEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *lp_last_error(void);

// Library version as a static NUL-terminated string.
const char *lp_version(void);

// Builds a model from a JSON document such as
// `{"family": "bessel", "params": {"delta": 3}}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum LpStatus lp_model_from_json(const char *json, struct LpModel **out);

// # Safety
// `out` must be a valid pointer.
enum LpStatus lp_model_bessel(double delta, struct LpModel **out);

// # Safety
// `out` must be a valid pointer.
enum LpStatus lp_model_squared_bessel(double delta, struct LpModel **out);

// # Safety
// `out` must be a valid pointer.
enum LpStatus lp_model_gbm(double lambda, double sigma, struct LpModel **out);

// # Safety
// `out` must be a valid pointer.
enum LpStatus lp_model_explosive(double lambda, double kappa, double p, struct LpModel **out);

// Power-law family `s(x) = -alpha x^-mu`, `m(x) = beta x^nu`.
//
// # Safety
// `out` must be a valid pointer.
enum LpStatus lp_model_power_law(double alpha,
                                 double beta,
                                 double mu,
                                 double nu,
                                 struct LpModel **out);

// # Safety
// `model` must come from an `lp_model_*` constructor and not be used afterwards.
void lp_model_free(struct LpModel *model);

// Scale `s(x)`, derivative `s'(x)` and speed density `m(x)`.
//
// # Safety
// Pointers must be valid; any of the outputs may be null to skip it.
enum LpStatus lp_model_eval(const struct LpModel *model,
                            double x,
                            double *scale,
                            double *scale_derivative,
                            double *speed_density);

// Running cost `c(x)` for level `z`.
//
// # Safety
// Pointers must be valid.
enum LpStatus lp_cost(const struct LpModel *model, double z, double x, double *out);

// Solves for the optimal threshold `r*` at level `z`.
//
// # Safety
// Pointers must be valid.
enum LpStatus lp_solve(const struct LpModel *model, double z, struct LpSolution *out);

// Prepares the value function for a solution returned by [`lp_solve`].
//
// # Safety
// Pointers must be valid.
enum LpStatus lp_value_function_new(const struct LpModel *model,
                                    const struct LpSolution *solution,
                                    struct LpValueFunction **out);

// `V(x)` and `V'(x)`; either output may be null.
//
// # Safety
// `vf` must come from [`lp_value_function_new`].
enum LpStatus lp_value_function_eval(const struct LpValueFunction *vf,
                                     double x,
                                     double *value,
                                     double *derivative);

// # Safety
// `vf` must come from [`lp_value_function_new`] and not be used afterwards.
void lp_value_function_free(struct LpValueFunction *vf);

// Default Monte Carlo settings for level `z`.
struct LpMcConfig lp_mc_config_default(double z);

// Monte Carlo estimate of the criterion for the rule "stop at `r`".
//
// # Safety
// Pointers must be valid.
enum LpStatus lp_estimate_objective(const struct LpModel *model,
                                    double z,
                                    double r,
                                    const struct LpMcConfig *config,
                                    struct LpMcEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LASTPASSAGE_H */
