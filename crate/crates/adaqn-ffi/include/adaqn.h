#ifndef ADAQN_H
#define ADAQN_H

/* Generated by cbindgen from the adaqn-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which acceptance rule `AdaqnSettings::gamma` parameterizes.
typedef enum {
  // Reject when `f_new > gamma * f_old`.
  ADAQN_ACCEPT_ABSOLUTE_FACTOR = 0,
  // Reject when `(f_new - f_old) / f_old > gamma`.
  ADAQN_ACCEPT_RELATIVE_IMPROVEMENT = 1,
} AdaqnAcceptanceKind;

// Source of curvature-pair matrix-vector products.
typedef enum {
  // FIFO of recent stochastic gradients (accumulated Fisher).
  ADAQN_CURVATURE_ACCUMULATED_FISHER = 0,
  // Fresh per-example gradients on the monitoring set (empirical Fisher).
  ADAQN_CURVATURE_EMPIRICAL_FISHER = 1,
} AdaqnCurvatureKind;

// Cycle-boundary event reported by [`adaqn_step`].
typedef enum {
  // Ordinary iteration; no cycle boundary crossed.
  ADAQN_EVENT_PLAIN = 0,
  // Cycle boundary: monitored loss accepted, curvature pair stored.
  ADAQN_EVENT_ACCEPTED = 1,
  // Cycle boundary: pair skipped for insufficient curvature.
  ADAQN_EVENT_SKIPPED = 2,
  // Cycle boundary: step rejected, memory flushed, iterate rewound.
  ADAQN_EVENT_REJECTED = 3,
} AdaqnEvent;

// Status code returned by every FFI entry point.
typedef enum {
  // Success.
  ADAQN_OK = 0,
  // Invalid configuration or argument value.
  ADAQN_ERR_CONFIG = 1,
  // Numerical failure (non-finite quantity where one is required).
  ADAQN_ERR_NUMERICAL = 2,
  // Buffer or vector length disagrees with the optimizer dimension.
  ADAQN_ERR_DIMENSION = 3,
  // Curvature requested from an empty gradient FIFO.
  ADAQN_ERR_EMPTY_FIFO = 4,
  // I/O or serialization failure.
  ADAQN_ERR_IO = 5,
  // A required pointer argument was null.
  ADAQN_ERR_NULL_ARGUMENT = 6,
  // The objective callback reported failure.
  ADAQN_ERR_CALLBACK = 7,
  // A panic was caught at the FFI boundary.
  ADAQN_ERR_PANIC = 8,
} AdaqnStatus;

// Opaque optimizer handle. Allocate with [`adaqn_create`], free with
// [`adaqn_destroy`]; never dereference from C.
typedef struct AdaqnOptimizer AdaqnOptimizer;

// Plain-value optimizer configuration, mirror of the Rust `AdaqnConfig`
// plus the RNG seed used for monitoring-set rotation.
typedef struct {
  // Step length alpha, constant for the run.
  double alpha;
  // Aggregation cycle length L (iterations between update attempts).
  size_t cycle_length;
  // Maximum stored curvature pairs m_L.
  size_t memory_size;
  // Gradient FIFO capacity m_F.
  size_t fifo_size;
  // Curvature admission threshold: store only if s'y > eps_skip * s's.
  double eps_skip;
  // Shift inside the seed diagonal 1/sqrt(sums + eps_scale).
  double eps_scale;
  // Mini-batch size b (also the monitoring-set size).
  size_t batch_size;
  // Which acceptance rule `gamma` parameterizes.
  AdaqnAcceptanceKind acceptance;
  // Acceptance threshold: gamma (absolute) or gamma-tilde (relative).
  double gamma;
  // Source of curvature matrix-vector products.
  AdaqnCurvatureKind curvature;
  // Nonzero: redraw the monitoring set at every cycle boundary.
  int32_t rotate_monitoring;
  // Seed for monitoring-set rotation draws.
  uint64_t rng_seed;
} AdaqnSettings;

// Caller-supplied objective: C function pointers over an opaque context.
//
// Both callbacks receive the current parameters `w` (length `n`), the batch
// of example indices, and out-pointers for the mean loss (and mean gradient,
// length `n`, for `value_grad`). They return zero on success; any nonzero
// return aborts the step with `ADAQN_ERR_CALLBACK`.
typedef struct {
  // Opaque context passed back to every callback.
  void *user_data;
  // Parameter dimension n.
  size_t dim;
  // Number of examples m in the finite sum.
  size_t num_examples;
  // Mean loss over the batch.
  int32_t (*value)(void *user_data,
                   const double *w,
                   size_t n,
                   const size_t *batch,
                   size_t batch_len,
                   double *loss_out);
  // Mean loss and mean gradient over the batch.
  int32_t (*value_grad)(void *user_data,
                        const double *w,
                        size_t n,
                        const size_t *batch,
                        size_t batch_len,
                        double *loss_out,
                        double *grad_out);
} AdaqnObjective;

// Iteration report written by [`adaqn_step`].
typedef struct {
  // 1-based count of completed iterations.
  uint64_t iteration;
  // Mini-batch loss at the pre-step iterate.
  double loss;
  // Euclidean norm of the mini-batch gradient.
  double grad_norm;
  // Stored curvature pairs after the step.
  size_t memory_size;
  // Stored FIFO gradients after the step.
  size_t fifo_size;
  // Cycle-boundary event.
  AdaqnEvent event;
} AdaqnStepReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Fill `out` with the library's default settings (the Rust `AdaqnConfig`
// defaults, seed 0).
//
// # Safety
// `out` must be a valid pointer to an `AdaqnSettings`.
AdaqnStatus adaqn_settings_default(AdaqnSettings *out);

// Create an optimizer from settings, an initial iterate `w0` of length `n`,
// and a monitoring set of example indices. On success writes the handle to
// `out`; the caller owns it and must free it with [`adaqn_destroy`].
//
// # Safety
// `settings`, `w0` (length `n`), `monitoring` (length `monitoring_len`), and
// `out` must be valid pointers for the stated lengths.
AdaqnStatus adaqn_create(const AdaqnSettings *settings,
                         const double *w0,
                         size_t n,
                         const size_t *monitoring,
                         size_t monitoring_len,
                         AdaqnOptimizer **out);

// Advance the optimizer one iteration on `batch`. Writes an iteration
// report to `report` when it is non-null.
//
// # Safety
// `opt` must be a live handle from [`adaqn_create`]; `objective` must be a
// valid pointer whose callbacks obey the [`AdaqnObjective`] contract;
// `batch` must point to `batch_len` readable indices; `report` is either
// null or a valid out-pointer.
AdaqnStatus adaqn_step(AdaqnOptimizer *opt,
                       const AdaqnObjective *objective,
                       const size_t *batch,
                       size_t batch_len,
                       AdaqnStepReport *report);

// Copy the current iterate into `out` (length `n`, which must equal the
// optimizer dimension).
//
// # Safety
// `opt` must be a live handle; `out` must point to `n` writable doubles.
AdaqnStatus adaqn_params(const AdaqnOptimizer *opt, double *out, size_t n);

// Write the optimizer's parameter dimension to `out`.
//
// # Safety
// `opt` must be a live handle; `out` must be a valid pointer.
AdaqnStatus adaqn_dim(const AdaqnOptimizer *opt, size_t *out);

// Free a handle created by [`adaqn_create`]. Null is a no-op.
//
// # Safety
// `opt` must be null or a live handle; the handle must not be used after.
void adaqn_destroy(AdaqnOptimizer *opt);

// Copy the current thread's last error message (UTF-8, NUL-terminated) into
// `buf` of capacity `buf_len`, truncating if needed. Returns the full
// message length in bytes (excluding the NUL), or 0 when no error has been
// recorded. `buf` may be null to query the length alone.
//
// # Safety
// `buf` must be null or point to `buf_len` writable bytes.
size_t adaqn_last_error(uint8_t *buf, size_t buf_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADAQN_H */
