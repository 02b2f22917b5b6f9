/* C interface of the wheel-flat detection pipeline. Generated by cbindgen; do not edit. */

#ifndef WHEELFLAT_H
#define WHEELFLAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Number of flat heights in the reference ladder.
#define WF_HEIGHT_LADDER_LEN 5

// Result of a call across the C boundary.
typedef enum WfStatus {
  // The call succeeded.
  WF_STATUS_OK = 0,
  // A required pointer argument was null.
  WF_STATUS_NULL_POINTER = 1,
  // An argument value was out of range or otherwise unusable.
  WF_STATUS_INVALID_ARGUMENT = 2,
  // A string argument was not valid UTF-8.
  WF_STATUS_INVALID_UTF8 = 3,
  // The operating system reported an I/O failure.
  WF_STATUS_IO = 4,
  // A file existed but its contents did not parse.
  WF_STATUS_PARSE = 5,
  // A model file was readable but internally inconsistent.
  WF_STATUS_MODEL = 6,
  // A model file was written by an incompatible library version.
  WF_STATUS_VERSION_MISMATCH = 7,
  // An internal invariant failed; see wf_last_error.
  WF_STATUS_PANIC = 8,
} WfStatus;

// Opaque four-channel acceleration record; create with
// `wf_synthesize`.
typedef struct WfAbaRecord WfAbaRecord;

// Opaque trained network; create with `wf_model_load`.
typedef struct WfModel WfModel;

// Opaque synthesis configuration; create with `wf_sim_config_new`.
typedef struct WfSimConfig WfSimConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the message of the most recent failure on this thread, as a
// NUL-terminated string. Empty until a call fails. The pointer is
// invalidated by the thread's next call into this library.
const char *wf_last_error(void);

// Computes the flat's half-angle (radians) and skid length (metres)
// from its height and the wheel radius, both in metres.
//
// # Safety
// `angle_rad_out` and `skid_length_m_out` must be valid for writes.
enum WfStatus wf_flat_geometry(double height_m,
                               double wheel_radius_m,
                               double *angle_rad_out,
                               double *skid_length_m_out);

// Writes the reference flat-height ladder, in metres and ascending,
// into `out`. `len` must be at least `WF_HEIGHT_LADDER_LEN`.
//
// # Safety
// `out` must be valid for `len` writes.
enum WfStatus wf_height_ladder(double *out, size_t len);

// Allocates a configuration with the reference defaults. Never null.
// Release with `wf_sim_config_free`.
struct WfSimConfig *wf_sim_config_new(void);

// Releases a configuration. A null handle is ignored.
//
// # Safety
// `config` must have come from `wf_sim_config_new` and not have been
// freed already.
void wf_sim_config_free(struct WfSimConfig *config);

// Sets the seed that pins every random draw of the synthesis.
//
// # Safety
// `config` must be a live handle from `wf_sim_config_new`.
enum WfStatus wf_sim_config_set_seed(struct WfSimConfig *config, uint64_t seed);

// Sets the train speed in metres per second.
//
// # Safety
// `config` must be a live handle from `wf_sim_config_new`.
enum WfStatus wf_sim_config_set_speed(struct WfSimConfig *config, double m_per_s);

// Sets the record duration in seconds.
//
// # Safety
// `config` must be a live handle from `wf_sim_config_new`.
enum WfStatus wf_sim_config_set_duration(struct WfSimConfig *config, double seconds);

// Sets the sampling rate in hertz.
//
// # Safety
// `config` must be a live handle from `wf_sim_config_new`.
enum WfStatus wf_sim_config_set_sample_rate(struct WfSimConfig *config, double hz);

// Sets the measurement-noise level as a fraction of the impact
// amplitude.
//
// # Safety
// `config` must be a live handle from `wf_sim_config_new`.
enum WfStatus wf_sim_config_set_noise(struct WfSimConfig *config, double fraction);

// Synthesizes the acceleration record of a flat of `height_m` metres
// on the wheel with index `wheel` (0 = front left, 1 = front right,
// 2 = rear left, 3 = rear right). Invalid configurations are rejected
// here. On success `record_out` receives a handle to release with
// `wf_aba_record_free`.
//
// # Safety
// `config` must be a live handle and `record_out` valid for a write.
enum WfStatus wf_synthesize(const struct WfSimConfig *config,
                            double height_m,
                            uint32_t wheel,
                            struct WfAbaRecord **record_out);

// Releases a record. A null handle is ignored.
//
// # Safety
// `record` must have come from `wf_synthesize` and not have been
// freed already.
void wf_aba_record_free(struct WfAbaRecord *record);

// Returns the per-channel sample count of a record; 0 for null.
//
// # Safety
// `record` must be null or a live handle from `wf_synthesize`.
size_t wf_aba_record_samples(const struct WfAbaRecord *record);

// Copies one channel (0 = front left .. 3 = rear right) into `out`,
// which must hold exactly `wf_aba_record_samples` values.
//
// # Safety
// `record` must be a live handle and `out` valid for `len` writes.
enum WfStatus wf_aba_record_channel(const struct WfAbaRecord *record,
                                    uint32_t channel,
                                    double *out,
                                    size_t len);

// Computes the analytic-signal envelope of `samples` into `out`; both
// buffers hold `len` values and may alias. `len` must be at least 8.
//
// # Safety
// `samples` must be valid for `len` reads and `out` for `len` writes.
enum WfStatus wf_analytic_amplitude(const double *samples, size_t len, double *out);

// Decomposes `samples` to wavelet-packet level `level` (0..=6) and
// writes the per-subspace RMS values, in natural subspace order, into
// `out`. `out_len` must equal 2^level.
//
// # Safety
// `samples` must be valid for `len` reads and `out` for `out_len`
// writes.
enum WfStatus wf_wpd_rms(const double *samples,
                         size_t len,
                         uint32_t level,
                         double *out,
                         size_t out_len);

// Loads a model file written by the pipeline's training stage. On
// success `model_out` receives a handle to release with
// `wf_model_free`.
//
// # Safety
// `path` must be a NUL-terminated string and `model_out` valid for a
// write.
enum WfStatus wf_model_load(const char *path, struct WfModel **model_out);

// Releases a model. A null handle is ignored.
//
// # Safety
// `model` must have come from `wf_model_load` and not have been freed
// already.
void wf_model_free(struct WfModel *model);

// Returns the feature width the model expects; 0 for null.
//
// # Safety
// `model` must be null or a live handle from `wf_model_load`.
size_t wf_model_input_dim(const struct WfModel *model);

// Runs the model on one feature vector of `len` values (`len` must
// equal `wf_model_input_dim`) and writes the four per-wheel outputs
// into `out`.
//
// # Safety
// `model` must be a live handle, `features` valid for `len` reads,
// and `out` valid for four writes.
enum WfStatus wf_model_forward(const struct WfModel *model,
                               const double *features,
                               size_t len,
                               double *out);

// Picks the wheel a four-slot prediction points at (0..=3, ties to
// the lowest index) and writes it to `index_out`. `len` must be 4.
//
// # Safety
// `prediction` must be valid for `len` reads and `index_out` for a
// write.
enum WfStatus wf_localize(const double *prediction, size_t len, uint32_t *index_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WHEELFLAT_H */
