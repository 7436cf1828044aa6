#ifndef GNNCTL_H
#define GNNCTL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GnnctlStatus {
  GNNCTL_STATUS_OK = 0,
  GNNCTL_STATUS_NULL_POINTER = 1,
  GNNCTL_STATUS_INVALID_ARGUMENT = 2,
  GNNCTL_STATUS_DIMENSION = 3,
  GNNCTL_STATUS_NUMERICAL = 4,
  GNNCTL_STATUS_DIVERGED = 5,
  GNNCTL_STATUS_NOT_APPLICABLE = 6,
  GNNCTL_STATUS_IO = 7,
  GNNCTL_STATUS_PANIC = 8,
} GnnctlStatus;

// A controller mapping the network state to the control signal.
typedef struct GnnctlController GnnctlController;

// Network system `X(t+1) = A X Ā + B U B̄` with its support matrix.
typedef struct GnnctlSystem GnnctlSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library; static storage, never freed.
const char *gnnctl_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length including the NUL,
// or 0 when no error has been recorded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t gnnctl_last_error(char *buf, size_t len);

// Samples a connected `k`-nearest-neighbour geometric network of `n` nodes
// and a system on it with `‖A‖₂ = a_norm`, `‖B‖₂ = b_norm`.
//
// # Safety
// `out_sys` must be a valid pointer; on success it receives a handle to free
// with [`gnnctl_system_free`].
enum GnnctlStatus gnnctl_system_sample(size_t n,
                                       size_t k,
                                       double a_norm,
                                       double b_norm,
                                       uint64_t seed,
                                       struct GnnctlSystem **out_sys);

// Draws a system at distance exactly `eps` from `sys`.
//
// # Safety
// `sys` must be a live handle and `out_sys` a valid pointer.
enum GnnctlStatus gnnctl_system_perturb(const struct GnnctlSystem *sys,
                                        double eps,
                                        uint64_t seed,
                                        struct GnnctlSystem **out_sys);

// # Safety
// `sys` must be null or a handle not yet freed.
void gnnctl_system_free(struct GnnctlSystem *sys);

// Node count, state feature count `F` and control feature count `G`.
//
// # Safety
// `sys` must be a live handle; output pointers may be null.
enum GnnctlStatus gnnctl_system_dims(const struct GnnctlSystem *sys,
                                     size_t *out_nodes,
                                     size_t *out_f,
                                     size_t *out_g);

// Distance between two systems: the largest of the five matrix differences.
//
// # Safety
// Both handles must be live and `out_distance` valid.
enum GnnctlStatus gnnctl_system_distance(const struct GnnctlSystem *a,
                                         const struct GnnctlSystem *b,
                                         double *out_distance);

// Fresh two-layer graph controller (`features` hidden features, filter
// order `order`) with tanh activation when `nonlinear` is true and a
// linear graph filter otherwise.
//
// # Safety
// `sys` must be a live handle and `out_ctrl` valid.
enum GnnctlStatus gnnctl_controller_graph_new(const struct GnnctlSystem *sys,
                                              size_t features,
                                              size_t order,
                                              bool nonlinear,
                                              uint64_t seed,
                                              struct GnnctlController **out_ctrl);

// Centralized infinite-horizon LQR controller with identity weights.
//
// # Safety
// `sys` must be a live handle and `out_ctrl` valid.
enum GnnctlStatus gnnctl_controller_optimal_new(const struct GnnctlSystem *sys,
                                                struct GnnctlController **out_ctrl);

// Loads a model JSON written by the experiment runner.
//
// # Safety
// `path` must be a NUL-terminated string and `out_ctrl` valid.
enum GnnctlStatus gnnctl_controller_load(const char *path, struct GnnctlController **out_ctrl);

// # Safety
// `ctrl` must be null or a handle not yet freed.
void gnnctl_controller_free(struct GnnctlController *ctrl);

// Number of learnable parameters (0 for fixed controllers).
//
// # Safety
// `ctrl` must be a live handle and `out_count` valid.
enum GnnctlStatus gnnctl_controller_num_params(const struct GnnctlController *ctrl,
                                               size_t *out_count);

// Evaluates the controller on an `N×F` row-major state and writes the
// `N×G` row-major control to `control`.
//
// # Safety
// `state` must hold `state_len` values and `control` `control_len`
// writable values.
enum GnnctlStatus gnnctl_controller_act(const struct GnnctlController *ctrl,
                                        const struct GnnctlSystem *sys,
                                        const double *state,
                                        size_t state_len,
                                        double *control,
                                        size_t control_len);

// Closed-loop cost over `horizon` steps from `x0` (identity weights) and
// whether the trajectory is classified stable.
//
// # Safety
// `x0` must hold `x0_len` values; output pointers may be null.
enum GnnctlStatus gnnctl_rollout(const struct GnnctlSystem *sys,
                                 const struct GnnctlController *ctrl,
                                 const double *x0,
                                 size_t x0_len,
                                 size_t horizon,
                                 double *out_cost,
                                 bool *out_stable);

// Trains a graph controller in place on `sys`. `config` is optional
// `key = value` text layered over the small default schedule; the best
// validation cost is written to `out_validation`.
//
// # Safety
// `ctrl` must be a live handle from [`gnnctl_controller_graph_new`] or a
// loaded graph model; `config` is null or NUL-terminated.
enum GnnctlStatus gnnctl_controller_train(struct GnnctlController *ctrl,
                                          const struct GnnctlSystem *sys,
                                          const char *config,
                                          double *out_validation);

// Stability constant `ξ` of a graph controller on `sys`; `ξ < 1` is
// sufficient for input-state stability.
//
// # Safety
// Both handles must be live and `out_xi` valid.
enum GnnctlStatus gnnctl_stability_constant(const struct GnnctlSystem *sys,
                                            const struct GnnctlController *ctrl,
                                            double *out_xi);

// Runs a named experiment (`exp1`..`exp5`, `verify`) at `desk` or `paper`
// scale with optional `key = value` overrides, writing tables to `out_dir`
// when it is non-null. `out_passed` reports the experiment's own checks.
//
// # Safety
// String arguments are null or NUL-terminated; `out_passed` may be null.
enum GnnctlStatus gnnctl_run_experiment(const char *name,
                                        const char *scale,
                                        const char *config,
                                        const char *out_dir,
                                        bool *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNNCTL_H */
