/* C ABI for the adrf anomaly detectors.
 *
 * Streaming handles are fed one raw IMU sample or one grayscale frame at a
 * time and return per-detector flag decisions. Every function reports an
 * adrf_status; on failure a thread-local message is available through
 * adrf_last_error. Handles are not thread-safe; use one per thread.
 *
 * Kept in sync with crates/ffi/src/lib.rs (checked by the crate's tests).
 */

#ifndef ADRF_H
#define ADRF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum adrf_status {
  ADRF_OK = 0,
  ADRF_NULL_ARGUMENT = 1,
  ADRF_INVALID_UTF8 = 2,
  ADRF_IO = 3,
  ADRF_BAD_ARTIFACT = 4,
  ADRF_BAD_INPUT = 5,
  ADRF_RUNTIME = 6,
} adrf_status;

/* Opaque streaming detector handles. */
typedef struct AdrfImuDetector AdrfImuDetector;
typedef struct AdrfVisionDetector AdrfVisionDetector;

/* One IMU detector decision. source: 0 = autoencoder, 1 = forecaster.
 * evaluable is 0 during warm-up; error fields are undefined then.
 * A channel is flagged iff its error strictly exceeds its threshold. */
typedef struct adrf_imu_event {
  double t;
  int32_t source;
  uint8_t evaluable;
  uint8_t flagged_angular;
  uint8_t flagged_linear;
  double e_a;
  double e_l;
  double theta_a;
  double theta_l;
} adrf_imu_event;

/* One vision detector decision. */
typedef struct adrf_vision_event {
  double t;
  uint8_t evaluable;
  uint8_t flagged;
  double e_v;
  double theta_v;
} adrf_vision_event;

/* Copies the calling thread's last error message into buf (NUL-terminated
 * when cap > 0) and returns the full message length in bytes. buf may be
 * NULL to query the length. */
size_t adrf_last_error(char *buf, size_t cap);

/* Library version as a static NUL-terminated string. */
const char *adrf_version(void);

/* Opens a streaming IMU detector from the autoencoder and forecaster
 * checkpoints plus the calibrated thresholds document. nominal_period is
 * the expected spacing between samples in seconds; a gap beyond 1.5x
 * restarts the warm-up. */
adrf_status adrf_imu_detector_open(const char *autoencoder_ckpt,
                                   const char *forecaster_ckpt,
                                   const char *thresholds_path,
                                   double nominal_period,
                                   AdrfImuDetector **out);

/* Pushes one raw (unscaled) IMU sample: angular and linear point to 3
 * doubles each (rad/s, m/s^2). Writes exactly two events into out_events:
 * index 0 autoencoder, index 1 forecaster. */
adrf_status adrf_imu_detector_push(AdrfImuDetector *det, double t,
                                   const double *angular, const double *linear,
                                   adrf_imu_event *out_events);

/* Releases the handle. NULL is a no-op. */
void adrf_imu_detector_free(AdrfImuDetector *det);

/* Opens a streaming vision detector from the vision forecaster checkpoint
 * and the thresholds document. */
adrf_status adrf_vision_detector_open(const char *forecaster_ckpt,
                                      const char *thresholds_path,
                                      AdrfVisionDetector **out);

/* Side length in pixels of the frames the detector expects. */
size_t adrf_vision_detector_frame_size(const AdrfVisionDetector *det);

/* Pushes one grayscale frame: len doubles in [-1, 1], row-major, where
 * len == frame_size * frame_size. Writes the decision for this frame. */
adrf_status adrf_vision_detector_push(AdrfVisionDetector *det, double t,
                                      const double *pixels, size_t len,
                                      adrf_vision_event *out_event);

/* Releases the handle. NULL is a no-op. */
void adrf_vision_detector_free(AdrfVisionDetector *det);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ADRF_H */
