#ifndef OFFSCREEN_LOAD_H
#define OFFSCREEN_LOAD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum OlStatus {
  OL_STATUS_OK = 0,
  OL_STATUS_NULL_POINTER = 1,
  OL_STATUS_INVALID_ARGUMENT = 2,
  OL_STATUS_INVALID_DATA = 3,
  OL_STATUS_SCHEMA_MISMATCH = 4,
  OL_STATUS_UNDEFINED = 5,
  OL_STATUS_IO = 6,
  OL_STATUS_UNSUPPORTED = 7,
  OL_STATUS_PANIC = 8,
} OlStatus;

// Which frames [`ol_load_metrics`] summarises.
typedef enum OlScope {
  OL_SCOPE_FULL = 0,
  OL_SCOPE_OBSERVED = 1,
  OL_SCOPE_CENSORED = 2,
} OlScope;

// Camera path interpolated through event locations.
typedef struct OlCameraPath OlCameraPath;

// A track together with its smoothed kinematics.
typedef struct OlKinematics OlKinematics;

// A fitted model loaded from its JSON file.
typedef struct OlModel OlModel;

// Load metrics with the default band edges. Undefined values (a peak with
// too few samples, density without acceleration samples) are NaN.
typedef struct OlLoadMetrics {
  double total_distance;
  double high_speed_distance;
  double very_high_speed_distance;
  double time_velocity_band[3];
  // 1, 3, 5 and 10 second windows.
  double peak_velocity[4];
  double total_acceleration;
  double acceleration_density;
  double time_acceleration_band[3];
  double elapsed;
  double accel_elapsed;
} OlLoadMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes (without the terminating NUL) of the calling thread's
// last error message.
size_t ol_last_error_length(void);

// Copies the last error message into `buf` as a NUL-terminated string,
// truncating to `len - 1` bytes. Returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ol_last_error_message(char *buf, size_t len);

// Builds a camera path from `n` events given as time and location arrays.
//
// # Safety
// The arrays must hold `n` values; `path_out` must be writable.
enum OlStatus ol_camera_path_new(const double *t,
                                 const double *x,
                                 const double *y,
                                 size_t n,
                                 struct OlCameraPath **path_out);

// Camera centre at time `t`.
//
// # Safety
// `path` must come from [`ol_camera_path_new`]; outputs must be writable.
enum OlStatus ol_camera_path_position(const struct OlCameraPath *path,
                                      double t,
                                      double *x_out,
                                      double *y_out);

// # Safety
// `path` must be null or come from [`ol_camera_path_new`], and is invalid
// afterwards.
void ol_camera_path_free(struct OlCameraPath *path);

// Marks each of `n` frames visible (1) or censored (0) under a
// `width` x `height` window following `path`.
//
// # Safety
// Arrays must hold `n` values; `visible_out` must hold `n` writable bytes.
enum OlStatus ol_censor(const struct OlCameraPath *path,
                        const double *t,
                        const double *x,
                        const double *y,
                        size_t n,
                        double width,
                        double height,
                        uint8_t *visible_out);

// Smooths a 10 Hz track of `n` frames with a Gaussian kernel of the given
// bandwidth in seconds.
//
// # Safety
// Arrays must hold `n` values; `kin_out` must be writable.
enum OlStatus ol_kinematics_new(const double *t,
                                const double *x,
                                const double *y,
                                size_t n,
                                double bandwidth,
                                struct OlKinematics **kin_out);

// Number of speed samples (frames - 1).
//
// # Safety
// `kin` must come from [`ol_kinematics_new`].
enum OlStatus ol_kinematics_speed_len(const struct OlKinematics *kin, size_t *len_out);

// Number of smoothed acceleration samples (frames - 2, or 0).
//
// # Safety
// `kin` must come from [`ol_kinematics_new`].
enum OlStatus ol_kinematics_accel_len(const struct OlKinematics *kin, size_t *len_out);

// Copies the speed samples into `buf`, which must hold at least
// `ol_kinematics_speed_len` values.
//
// # Safety
// `buf` must hold `cap` writable values.
enum OlStatus ol_kinematics_speed(const struct OlKinematics *kin, double *buf, size_t cap);

// Copies the smoothed acceleration samples into `buf`.
//
// # Safety
// `buf` must hold `cap` writable values.
enum OlStatus ol_kinematics_accel(const struct OlKinematics *kin, double *buf, size_t cap);

// # Safety
// `kin` must be null or come from [`ol_kinematics_new`], and is invalid
// afterwards.
void ol_kinematics_free(struct OlKinematics *kin);

// Load metrics over the frames selected by `scope`. `visible` gives one
// byte per frame (nonzero = on camera) and may be null for `Full`.
//
// # Safety
// `visible` must be null or hold `n` bytes; `metrics_out` must be writable.
enum OlStatus ol_load_metrics(const struct OlKinematics *kin,
                              const uint8_t *visible,
                              size_t n,
                              enum OlScope scope,
                              struct OlLoadMetrics *metrics_out);

// `observed * censored_time / observed_time`.
//
// # Safety
// `estimate_out` must be writable.
enum OlStatus ol_scaling_estimate(double observed_metric,
                                  double observed_time,
                                  double censored_time,
                                  double *estimate_out);

// Root mean square predictive error of `n` predictions.
//
// # Safety
// `y` and `yhat` must hold `n` values; `out_value` must be writable.
enum OlStatus ol_rmspe(const double *y, const double *yhat, size_t n, double *out_value);

// RMSPE divided by the mean of `y`.
//
// # Safety
// `y` and `yhat` must hold `n` values; `out_value` must be writable.
enum OlStatus ol_cv(const double *y, const double *yhat, size_t n, double *out_value);

// Parses a model from its JSON text.
//
// # Safety
// `json` must be a NUL-terminated string; `model_out` must be writable.
enum OlStatus ol_model_from_json(const char *json, struct OlModel **model_out);

// Loads a model file written by the `fit` command.
//
// # Safety
// `path` must be a NUL-terminated string; `model_out` must be writable.
enum OlStatus ol_model_load(const char *path, struct OlModel **model_out);

// Number of input columns a row passed to [`ol_model_predict`] must have.
//
// # Safety
// `model` must come from one of the model constructors.
enum OlStatus ol_model_input_count(const struct OlModel *model, size_t *count_out);

// Name of input column `index` as a NUL-terminated string, truncated to
// fit `len` bytes. `name_len_out` receives the full length.
//
// # Safety
// `buf` must be null or hold `len` writable bytes.
enum OlStatus ol_model_input_name(const struct OlModel *model,
                                  size_t index,
                                  char *buf,
                                  size_t len,
                                  size_t *name_len_out);

// Predicts `n_rows` rows given row-major with `n_cols` values each, in
// the model's input column order. Raw model output, no flooring.
// Scaling models need per-row bookkeeping and are not supported here.
//
// # Safety
// `rows` must hold `n_rows * n_cols` values; `out_values` `n_rows`.
enum OlStatus ol_model_predict(const struct OlModel *model,
                               const double *rows,
                               size_t n_rows,
                               size_t n_cols,
                               double *out_values);

// # Safety
// `model` must be null or come from a model constructor, and is invalid
// afterwards.
void ol_model_free(struct OlModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFFSCREEN_LOAD_H */
