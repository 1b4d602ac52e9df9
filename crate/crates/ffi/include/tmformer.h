/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TMFORMER_H
#define TMFORMER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TmfStatus {
  TMF_STATUS_OK = 0,
  TMF_STATUS_NULL_POINTER = 1,
  TMF_STATUS_INVALID_UTF8 = 2,
  TMF_STATUS_INVALID_ARGUMENT = 3,
  TMF_STATUS_PARSE_ERROR = 4,
  TMF_STATUS_COMPILE_ERROR = 5,
  TMF_STATUS_SIMULATION_ERROR = 6,
  TMF_STATUS_BOUNDS_ERROR = 7,
  TMF_STATUS_OUT_OF_RANGE = 8,
  TMF_STATUS_PANIC = 99,
} TmfStatus;

/**
 * Compiled single-layer program.
 */
typedef struct TmfProgram TmfProgram;

/**
 * Parsed and validated machine.
 */
typedef struct TmfSpec TmfSpec;

/**
 * Result of a simulation run.
 */
typedef struct TmfTrace TmfTrace;

/**
 * One simulated step.
 */
typedef struct TmfStepRecord {
  size_t step;
  /**
   * 1 when the decoded window equals the reference window.
   */
  uint8_t agreement;
  /**
   * 1 when the decoded output could be read back as a window.
   */
  uint8_t decoded;
  double distance;
  double deviation;
  double error_bound;
  uint64_t n_ops;
  uint64_t saturations;
} TmfStepRecord;

/**
 * Capacity constants of the learning bounds.
 */
typedef struct TmfCapacity {
  double b_spec;
  double l_phi;
  uint32_t l_max;
  double r_x;
  uint64_t k;
  double loss_lipschitz;
  double loss_bound;
} TmfCapacity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `tmf_*` call on the same thread.
 */
const char *tmf_last_error_message(void);

/**
 * Parse a machine description.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum TmfStatus tmf_spec_parse(const char *text, struct TmfSpec **out_spec);

/**
 * Look up a bundled machine by name (`inc`, `flip`, `copy`, `shift`, `loop`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum TmfStatus tmf_spec_builtin(const char *name, struct TmfSpec **out_spec);

/**
 * Number of states and tape symbols.
 *
 * # Safety
 * `spec` must come from `tmf_spec_*`; outputs must be writable.
 */
enum TmfStatus tmf_spec_dims(const struct TmfSpec *spec, size_t *n_states, size_t *n_symbols);

/**
 * # Safety
 * `spec` must be null or a live handle; it is invalid afterwards.
 */
void tmf_spec_free(struct TmfSpec *spec);

/**
 * Compile `spec` with window size `k`. `levels == 0` selects exact
 * arithmetic; otherwise values are rounded to `levels` points on `[-range, range]`.
 *
 * # Safety
 * `spec` must be a live handle; `out` must be writable.
 */
enum TmfStatus tmf_compile(const struct TmfSpec *spec,
                           size_t k,
                           uint64_t levels,
                           double range,
                           struct TmfProgram **out_program);

/**
 * Embedding width `d` and FFN width `h`.
 *
 * # Safety
 * `program` must be a live handle; outputs must be writable.
 */
enum TmfStatus tmf_program_dims(const struct TmfProgram *program, size_t *d, size_t *hidden);

/**
 * # Safety
 * `program` must be null or a live handle; it is invalid afterwards.
 */
void tmf_program_free(struct TmfProgram *program);

/**
 * Simulate up to `steps` transitions on `input`, a word of
 * whitespace-separated or single-character symbols.
 *
 * # Safety
 * `program` must be a live handle, `input` a NUL-terminated string and
 * `out` writable.
 */
enum TmfStatus tmf_simulate(const struct TmfProgram *program,
                            const char *input,
                            size_t steps,
                            struct TmfTrace **out_trace);

/**
 * Number of records, including the initial one.
 *
 * # Safety
 * `trace` must be a live handle; `len` must be writable.
 */
enum TmfStatus tmf_trace_len(const struct TmfTrace *trace, size_t *len);

/**
 * Whether the reference machine reached its accepting state.
 *
 * # Safety
 * `trace` must be a live handle; `halted` must be writable.
 */
enum TmfStatus tmf_trace_halted(const struct TmfTrace *trace, uint8_t *halted);

/**
 * First step whose decoded window disagrees with the reference, or -1.
 *
 * # Safety
 * `trace` must be a live handle; `step` must be writable.
 */
enum TmfStatus tmf_trace_first_disagreement(const struct TmfTrace *trace, int64_t *step);

/**
 * Copy record `index` into `record`.
 *
 * # Safety
 * `trace` must be a live handle; `record` must be writable.
 */
enum TmfStatus tmf_trace_step(const struct TmfTrace *trace,
                              size_t index,
                              struct TmfStepRecord *record);

/**
 * # Safety
 * `trace` must be null or a live handle; it is invalid afterwards.
 */
void tmf_trace_free(struct TmfTrace *trace);

/**
 * All capacity constants set to 1.
 */
struct TmfCapacity tmf_capacity_unit(void);

/**
 * Rademacher complexity bound for `m` samples.
 *
 * # Safety
 * `cap` must be readable and `value` writable.
 */
enum TmfStatus tmf_rademacher_bound(const struct TmfCapacity *cap, uint64_t m, double *value);

/**
 * Next-token sample complexity.
 *
 * # Safety
 * `cap` must be readable and `value` writable.
 */
enum TmfStatus tmf_sample_complexity_next_token(const struct TmfCapacity *cap,
                                                double eps,
                                                double delta,
                                                double *value);

/**
 * Sample complexity of a length-`total` sequence learned in `rounds` rounds.
 *
 * # Safety
 * `cap` must be readable and `value` writable.
 */
enum TmfStatus tmf_sample_complexity_multiround(const struct TmfCapacity *cap,
                                                double eps,
                                                double delta,
                                                size_t total,
                                                size_t rounds,
                                                double *value);

/**
 * Cumulative error bound under uniform propagation.
 *
 * # Safety
 * `value` must be writable.
 */
enum TmfStatus tmf_uniform_error_bound(double gamma,
                                       double lambda,
                                       double eta,
                                       size_t rounds,
                                       double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TMFORMER_H */
