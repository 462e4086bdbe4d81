#ifndef IRS_CHANEST_H
#define IRS_CHANEST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible entry point.
 */
typedef enum IrsStatus {
  IRS_STATUS_OK = 0,
  IRS_STATUS_NULL_POINTER = 1,
  IRS_STATUS_INVALID_ARGUMENT = 2,
  IRS_STATUS_INVALID_PLAN = 3,
  IRS_STATUS_SHAPE = 4,
  IRS_STATUS_CONFIG = 5,
  IRS_STATUS_DEGENERATE_SNR = 6,
  IRS_STATUS_UNDEFINED_METRIC = 7,
  IRS_STATUS_FORMAT = 8,
  IRS_STATUS_IO = 9,
  IRS_STATUS_DENOISER = 10,
  IRS_STATUS_BUFFER_TOO_SMALL = 11,
  IRS_STATUS_PANIC = 12,
} IrsStatus;

/**
 * Per-subcarrier channel matrices.
 */
typedef struct IrsChannel IrsChannel;

/**
 * Redundant steering dictionary.
 */
typedef struct IrsDictionary IrsDictionary;

/**
 * Sparse SOMP estimate.
 */
typedef struct IrsEstimate IrsEstimate;

/**
 * Pilot observations and the measurement matrix.
 */
typedef struct IrsMeasurements IrsMeasurements;

/**
 * Scenario, sounding and recovery parameters.
 */
typedef struct IrsSetup IrsSetup;

/**
 * Interleaved complex double, layout-compatible with C99 `double _Complex`.
 */
typedef struct IrsComplex {
  double re;
  double im;
} IrsComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *irs_last_error(void);

/**
 * Static description of a status code.
 */
const char *irs_status_string(enum IrsStatus status);

/**
 * Creates a setup from a preset name: `desk`, `paper` or `paper-large`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum IrsStatus irs_setup_preset(const char *name, struct IrsSetup **out);

/**
 * Parses a TOML experiment document.
 *
 * # Safety
 * `toml` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum IrsStatus irs_setup_from_toml(const char *toml, struct IrsSetup **out);

/**
 * Overrides the sounding parameters. Pass NaN for `snr_db` to keep it;
 * `+inf` selects noiseless sounding.
 *
 * # Safety
 * `setup` must be a live handle.
 */
enum IrsStatus irs_setup_set_sounding(struct IrsSetup *setup, size_t measurements, double snr_db);

/**
 * Overrides the path count `L` and dictionary oversampling `β`.
 *
 * # Safety
 * `setup` must be a live handle.
 */
enum IrsStatus irs_setup_set_model(struct IrsSetup *setup, size_t paths, size_t beta);

/**
 * # Safety
 * `setup` must be null or a handle not yet freed.
 */
void irs_setup_free(struct IrsSetup *setup);

/**
 * Draws the channel of `trial` under `master_seed`.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum IrsStatus irs_channel_generate(const struct IrsSetup *setup,
                                    uint64_t master_seed,
                                    uint64_t trial,
                                    struct IrsChannel **out);

/**
 * Builds a channel from `k` column-major `rows × cols` matrices.
 *
 * # Safety
 * `data` must point to `k * rows * cols` values; `out` must be writable.
 */
enum IrsStatus irs_channel_from_data(const struct IrsComplex *data,
                                     size_t k,
                                     size_t rows,
                                     size_t cols,
                                     struct IrsChannel **out);

/**
 * Writes `(K, N_IRS, N_UE)`.
 *
 * # Safety
 * `channel` must be a live handle; the output pointers must be writable.
 */
enum IrsStatus irs_channel_dims(const struct IrsChannel *channel,
                                size_t *k,
                                size_t *rows,
                                size_t *cols);

/**
 * Copies the channel entries into `buf`, which must hold `K·rows·cols` values.
 *
 * # Safety
 * `channel` must be a live handle; `buf` must have room for `len` values.
 */
enum IrsStatus irs_channel_copy(const struct IrsChannel *channel,
                                struct IrsComplex *buf,
                                size_t len);

/**
 * # Safety
 * `channel` must be null or a handle not yet freed.
 */
void irs_channel_free(struct IrsChannel *channel);

/**
 * Sounds `channel` with the plan and noise of `trial`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum IrsStatus irs_sound(const struct IrsSetup *setup,
                         const struct IrsChannel *channel,
                         uint64_t master_seed,
                         uint64_t trial,
                         struct IrsMeasurements **out);

/**
 * Writes `M`, `K` and the calibrated noise power.
 *
 * # Safety
 * `meas` must be a live handle; the output pointers must be writable.
 */
enum IrsStatus irs_measurements_info(const struct IrsMeasurements *meas,
                                     size_t *measurements,
                                     size_t *subcarriers,
                                     double *noise_var);

/**
 * Copies the observations, subcarrier-major (`y_0`, then `y_1`, ...).
 *
 * # Safety
 * `meas` must be a live handle; `buf` must have room for `len` values.
 */
enum IrsStatus irs_measurements_copy(const struct IrsMeasurements *meas,
                                     struct IrsComplex *buf,
                                     size_t len);

/**
 * # Safety
 * `meas` must be null or a handle not yet freed.
 */
void irs_measurements_free(struct IrsMeasurements *meas);

/**
 * Builds the redundant dictionary for `setup`.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum IrsStatus irs_dictionary_new(const struct IrsSetup *setup, struct IrsDictionary **out);

/**
 * Number of atoms, or 0 for a null handle.
 *
 * # Safety
 * `dict` must be null or a live handle.
 */
size_t irs_dictionary_atoms(const struct IrsDictionary *dict);

/**
 * # Safety
 * `dict` must be null or a handle not yet freed.
 */
void irs_dictionary_free(struct IrsDictionary *dict);

/**
 * Runs SOMP with the setup's stopping rule.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum IrsStatus irs_estimate(const struct IrsSetup *setup,
                            const struct IrsMeasurements *meas,
                            const struct IrsDictionary *dict,
                            struct IrsEstimate **out);

/**
 * Support size, or 0 for a null handle.
 *
 * # Safety
 * `est` must be null or a live handle.
 */
size_t irs_estimate_support_len(const struct IrsEstimate *est);

/**
 * Copies the selected atom indices in selection order.
 *
 * # Safety
 * `est` must be a live handle; `buf` must have room for `len` values.
 */
enum IrsStatus irs_estimate_support(const struct IrsEstimate *est, size_t *buf, size_t len);

/**
 * Synthesizes `Ĥ_k = A_R X̂_k A_T^H` from the estimate.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum IrsStatus irs_estimate_reconstruct(const struct IrsEstimate *est,
                                        const struct IrsDictionary *dict,
                                        struct IrsChannel **out);

/**
 * # Safety
 * `est` must be null or a handle not yet freed.
 */
void irs_estimate_free(struct IrsEstimate *est);

/**
 * NMSE of `estimate` against `truth` in dB.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum IrsStatus irs_nmse_db(const struct IrsChannel *truth,
                           const struct IrsChannel *estimate,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRS_CHANEST_H */
