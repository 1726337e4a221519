/* C interface for the clockpress spin-block compression library. */

#pragma once

/* Generated by cbindgen from clockpress-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every function in this interface.
 */
typedef enum CpStatus {
  /**
   * Success; out parameters are valid.
   */
  CP_STATUS_OK = 0,
  /**
   * An argument or configuration value is invalid.
   */
  CP_STATUS_ARGUMENT = 1,
  /**
   * The request exceeds a documented size limit.
   */
  CP_STATUS_SIZE = 2,
  /**
   * An internal numerical tolerance was violated.
   */
  CP_STATUS_NUMERIC = 3,
  /**
   * A required pointer was null.
   */
  CP_STATUS_NULL_POINTER = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  CP_STATUS_PANIC = 5,
  /**
   * An i/o operation failed.
   */
  CP_STATUS_IO = 6,
} CpStatus;

/**
 * Opaque block-diagonal state handle.
 */
typedef struct CpBlockState CpBlockState;

/**
 * Opaque compressed-record handle; remembers the partition exponent it
 * was encoded with so decoding needs no extra context.
 */
typedef struct CpRecord CpRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library; static storage, never freed.
 */
const char *cp_version(void);

/**
 * Message of the most recent failure on the calling thread, empty if
 * none. The pointer stays valid until the next failing call on the
 * same thread.
 */
const char *cp_last_error_message(void);

/**
 * Builds the block decomposition of the n-copy clock state with mixing
 * parameter `s`, spectrum `p` and time `t`, storing a new handle in
 * `*out`.
 *
 * # Safety
 *
 * `out` must be valid for writing one pointer.
 */
enum CpStatus cp_block_state_new(uint32_t n,
                                 double s,
                                 double p,
                                 double t,
                                 struct CpBlockState **out);

/**
 * Releases a block-state handle; a null pointer is a no-op.
 *
 * # Safety
 *
 * `state` must be null or a pointer from this library not yet freed.
 */
void cp_block_state_free(struct CpBlockState *state);

/**
 * Number of copies n the state was built from.
 *
 * # Safety
 *
 * `state` must be a live handle; `out` must be valid for writing.
 */
enum CpStatus cp_block_state_copies(const struct CpBlockState *state, uint32_t *out);

/**
 * Weight q_J of the block with doubled total spin `twice_j`; zero when
 * the block is absent.
 *
 * # Safety
 *
 * `state` must be a live handle; `out` must be valid for writing.
 */
enum CpStatus cp_block_state_weight(const struct CpBlockState *state,
                                    uint32_t twice_j,
                                    double *out);

/**
 * Trace distance between two block states over the same copy count.
 *
 * # Safety
 *
 * `a` and `b` must be live handles; `out` must be valid for writing.
 */
enum CpStatus cp_trace_distance(const struct CpBlockState *a,
                                const struct CpBlockState *b,
                                double *out);

/**
 * Compresses a block state. `mode` is 0 (known spectrum, using `p`) or
 * 1 (unknown spectrum, using the interval partition with exponent `x`);
 * `s` is the mixing parameter the windows are centred on. Stores a new
 * record handle in `*out`.
 *
 * # Safety
 *
 * `state` must be a live handle; `out` must be valid for writing one
 * pointer.
 */
enum CpStatus cp_encode(const struct CpBlockState *state,
                        int32_t mode,
                        double p,
                        double s,
                        double x,
                        struct CpRecord **out);

/**
 * Releases a record handle; a null pointer is a no-op.
 *
 * # Safety
 *
 * `rec` must be null or a pointer from this library not yet freed.
 */
void cp_record_free(struct CpRecord *rec);

/**
 * Memory footprint of a record: the quantum register dimension and the
 * number of classical index values.
 *
 * # Safety
 *
 * `rec` must be a live handle; both out pointers must be valid for
 * writing.
 */
enum CpStatus cp_record_dims(const struct CpRecord *rec,
                             uint64_t *quantum_dim,
                             uint64_t *classical_count);

/**
 * Reconstructs a block state from a record, storing a new handle in
 * `*out`. All decoding context (copy count, mode, spectrum, partition
 * exponent) travels inside the record.
 *
 * # Safety
 *
 * `rec` must be a live handle; `out` must be valid for writing one
 * pointer.
 */
enum CpStatus cp_decode(const struct CpRecord *rec, struct CpBlockState **out);

/**
 * Exact compression error of the full pipeline at the given parameters,
 * maximized over the built-in time grid. `mode` is 0 (known) or 1
 * (unknown); `restriction` is 0 (auto), 1 (always) or 2 (never) and
 * controls the large-n tail restriction. Writes the streamed error to
 * `*epsilon` and the excluded-weight allowance to `*tail_bound`.
 *
 * # Safety
 *
 * Both out pointers must be valid for writing.
 */
enum CpStatus cp_compression_error(uint32_t n,
                                   double s,
                                   double p,
                                   int32_t mode,
                                   double x,
                                   int32_t restriction,
                                   double *epsilon,
                                   double *tail_bound);

/**
 * Known-spectrum pipeline error with the window half-width forced to
 * n^w / 2, clipped to [0, 1].
 *
 * # Safety
 *
 * `out` must be valid for writing.
 */
enum CpStatus cp_starved_run(uint32_t n, double s, double p, double width_exponent, double *out);

/**
 * Analytic leading-order error bound for n copies at spectrum p.
 *
 * # Safety
 *
 * `out` must be valid for writing.
 */
enum CpStatus cp_error_bound(uint32_t n, double p, double *out);

/**
 * Memory dimensions of the protocol without running it: the window
 * size at the reference spin and the classical index count. `mode` is
 * 0 (known) or 1 (unknown).
 *
 * # Safety
 *
 * Both out pointers must be valid for writing.
 */
enum CpStatus cp_memory_shape(uint32_t n,
                              double p,
                              double s,
                              double x,
                              int32_t mode,
                              uint64_t *quantum_dim,
                              uint64_t *classical_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
