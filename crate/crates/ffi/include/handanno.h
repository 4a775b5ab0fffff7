#ifndef HANDANNO_H
#define HANDANNO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum HaStatus {
  HA_STATUS_OK = 0,
  HA_STATUS_NULL_POINTER = 1,
  HA_STATUS_INVALID_ARGUMENT = 2,
  HA_STATUS_INVALID_SHAPE = 3,
  HA_STATUS_INVALID_POSE = 4,
  HA_STATUS_INFEASIBLE = 5,
  HA_STATUS_DEGENERATE = 6,
  HA_STATUS_NOT_CONVERGED = 7,
  HA_STATUS_OUT_OF_DOMAIN = 8,
  HA_STATUS_PARSE = 9,
  HA_STATUS_PANIC = 10,
} HaStatus;

/**
 * Outcome of annotating one frame.
 */
typedef enum HaAnnotation {
  HA_ANNOTATION_EXACT = 0,
  HA_ANNOTATION_PROJECTED = 1,
  HA_ANNOTATION_FAILED = 2,
} HaAnnotation;

/**
 * Opaque hand shape.
 */
typedef struct HaShape HaShape;

typedef struct HaQuat {
  double w;
  double x;
  double y;
  double z;
} HaQuat;

typedef struct HaVec3 {
  double x;
  double y;
  double z;
} HaVec3;

typedef struct HaTransform {
  struct HaQuat rotation;
  struct HaVec3 translation;
} HaTransform;

/**
 * Twist, flexion, abduction, PIP and DIP angles of one finger, radians.
 */
typedef struct HaFingerAngles {
  double twist;
  double flexion;
  double abduction;
  double pip;
  double dip;
} HaFingerAngles;

typedef struct HaPose {
  struct HaTransform global;
  struct HaFingerAngles fingers[5];
} HaPose;

/**
 * Joints in the order W, then MCP, PIP, DIP, TIP of thumb to little finger.
 */
typedef struct HaSkeleton {
  struct HaVec3 joints[21];
} HaSkeleton;

/**
 * Sensor `i` of a frame is S(i+1): five nails, thumb first, then the palm.
 */
typedef struct HaSensor {
  struct HaVec3 position;
  struct HaQuat orientation;
} HaSensor;

typedef struct HaIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
} HaIntrinsics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library, static storage.
 */
const char *ha_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *ha_last_error(void);

/**
 * The built-in reference hand. Never null.
 */
struct HaShape *ha_shape_reference(void);

/**
 * Parses a shape from NUL-terminated TOML text.
 */
enum HaStatus ha_shape_from_toml(const char *text, struct HaShape **out);

/**
 * Releases a shape; null is ignored.
 */
void ha_shape_free(struct HaShape *shape);

/**
 * Joint positions of `pose` in the tracker frame.
 */
enum HaStatus ha_forward_kinematics(const struct HaShape *shape,
                                    const struct HaPose *pose,
                                    struct HaSkeleton *out);

/**
 * The six sensor readings `skeleton` produces, written to `out[0..6]`.
 */
enum HaStatus ha_simulate_sensors(const struct HaShape *shape,
                                  const struct HaSkeleton *skeleton,
                                  struct HaSensor *out);

/**
 * Annotates six readings (`sensors[0..6]`). Joints of failed fingers are
 * set to NaN and flagged 0 in `present[0..21]` (which may be null).
 * `failed_mask` bit `i` is set when finger `i` failed.
 */
enum HaStatus ha_annotate(const struct HaShape *shape,
                          const struct HaSensor *sensors,
                          double feasibility_mm,
                          struct HaSkeleton *out,
                          uint8_t *present,
                          enum HaAnnotation *status,
                          uint32_t *failed_mask);

/**
 * PIP joint from MCP, DIP and TIP, with `P` on the opposite side of line
 * `MD` from `T`. `tie_normal` orients the solution when `T` lies on the
 * line.
 */
enum HaStatus ha_solve_pip(struct HaVec3 mcp,
                           struct HaVec3 dip,
                           struct HaVec3 tip,
                           double proximal,
                           double middle,
                           struct HaVec3 tie_normal,
                           double tolerance_mm,
                           struct HaVec3 *out);

/**
 * Tracker-to-camera transform from `n` points (`points[3n]`, xyz) and
 * pixels (`pixels[2n]`, uv).
 */
enum HaStatus ha_solve_pnp(const double *points,
                           const double *pixels,
                           size_t n,
                           const struct HaIntrinsics *intrinsics,
                           struct HaTransform *out,
                           double *rms_px);

/**
 * Applies a transform to a point.
 */
enum HaStatus ha_transform_point(const struct HaTransform *x, struct HaVec3 p, struct HaVec3 *out);

/**
 * Pairs each of `n` depth timestamps with the nearest of `m` sensor
 * timestamps. Writes the sensor index and gap (µs) per depth event.
 */
enum HaStatus ha_align(const uint64_t *depth_us,
                       size_t n,
                       const uint64_t *sensor_us,
                       size_t m,
                       uint64_t *out_index,
                       uint64_t *out_gap_us);

/**
 * Viewpoint region (0..16) of a palm-local unit direction.
 */
enum HaStatus ha_viewpoint_region(struct HaVec3 direction, uint32_t *out);

/**
 * Fraction of the `frames × joints` errors (row-major) that are `<= eps`.
 */
enum HaStatus ha_joints_within(const double *errors,
                               size_t frames,
                               size_t joints,
                               double eps,
                               double *out);

/**
 * Fraction of frames whose worst error is `<= eps`.
 */
enum HaStatus ha_frames_within(const double *errors,
                               size_t frames,
                               size_t joints,
                               double eps,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HANDANNO_H */
