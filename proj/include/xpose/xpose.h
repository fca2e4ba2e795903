/**
 * Copyright 2026 The xpose Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef XPOSE_XPOSE_H
#define XPOSE_XPOSE_H

/* C interface of the xpose library. Every function returns an xp_status;
 * on failure xp_last_error() describes the error of the calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(XPOSE_BUILDING_LIBRARY)
#define XP_API __attribute__((visibility("default")))
#else
#define XP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum xp_status {
  XP_OK = 0,
  XP_ERR_INVALID_ARGUMENT = 1,
  XP_ERR_DEGENERATE = 2,
  XP_ERR_OUT_OF_RANGE = 3,
  XP_ERR_IO = 4,
  XP_ERR_FORMAT = 5,
  XP_ERR_GENERATION = 6,
  XP_ERR_DIVERGED = 7,
  XP_ERR_INTERNAL = 99
} xp_status;

typedef struct xp_pose {
  double x, y;       /* detector pixels */
  double alpha_deg;  /* forward angle */
  double tau_deg;    /* projection angle */
  double depth_mm;   /* source to instrument along the projection normal */
} xp_pose;

typedef struct xp_geometry {
  double source_detector_distance_mm;
  double pixel_spacing_mm;
  int32_t width, height;
} xp_geometry;

typedef struct xp_keypoints {
  double xy[12]; /* interleaved x0, y0, ..., x5, y5 in pixels */
} xp_keypoints;

typedef struct xp_errors {
  double position_mm, position_px;
  double forward_angle_deg, forward_angle_signed_deg;
  double projection_angle_deg;
  double depth_mm, depth_signed_mm;
  int32_t tau_beyond_validity;
} xp_errors;

typedef struct xp_config xp_config;
typedef struct xp_dataset xp_dataset;

XP_API const char* xp_last_error(void);
XP_API const char* xp_version(void);

XP_API xp_geometry xp_geometry_default(void);

/* Standard (mirrored = 0) or mirrored keypoint layout. */
XP_API xp_status xp_keypoints_from_pose(const xp_pose* pose, int32_t mirrored, const xp_geometry* geom,
                                        xp_keypoints* out);
XP_API xp_status xp_pose_from_keypoints(const xp_keypoints* kps, int32_t mirrored, const xp_geometry* geom,
                                        xp_pose* out, int32_t* cos_tau_clamped);
XP_API xp_status xp_compute_errors(const xp_pose* predicted, const xp_pose* truth, const xp_geometry* geom,
                                   xp_errors* out);

/* Configuration handle: defaults, a JSON file, or a JSON string. */
XP_API xp_status xp_config_create(xp_config** out);
XP_API xp_status xp_config_load(const char* path, xp_config** out);
XP_API xp_status xp_config_parse(const char* json, xp_config** out);
XP_API void xp_config_destroy(xp_config* cfg);
/* Sets one value by JSON pointer ("/generation/count") from a JSON literal ("250"). */
XP_API xp_status xp_config_set(xp_config* cfg, const char* json_pointer, const char* json_value);
/* Copies the configuration as JSON into buf; *needed receives the size including the terminator. */
XP_API xp_status xp_config_to_json(const xp_config* cfg, char* buf, size_t cap, size_t* needed);

XP_API xp_status xp_dataset_load(const char* dir, int32_t load_images, xp_dataset** out);
XP_API void xp_dataset_destroy(xp_dataset* ds);
XP_API xp_status xp_dataset_size(const xp_dataset* ds, size_t* out);
XP_API xp_status xp_dataset_pose(const xp_dataset* ds, size_t i, xp_pose* out);

/* Pipeline stages; see the README for the files each stage writes. */
XP_API xp_status xp_generate(const xp_config* cfg, const char* out_dir);
XP_API xp_status xp_train(const xp_config* cfg, const char* task, const char* head, const char* data_dir,
                          const char* out_dir);
XP_API xp_status xp_estimate(const xp_config* cfg, const char* data_dir, const char* weights_dir, const char* out_dir);
XP_API xp_status xp_evaluate(const xp_config* cfg, const char* data_dir, const char* weights_dir, const char* out_dir);
XP_API xp_status xp_register(const xp_config* cfg, const char* data_dir, const char* out_dir);
XP_API xp_status xp_plot(const char* const* summary_csvs, size_t count, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* XPOSE_XPOSE_H */
