/* Copyright 2026 The metriccam Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to metriccam. Objects are opaque handles released with their
 * matching *_free function. Every call returns an mc_status; on failure the
 * message is available from mc_last_error() on the calling thread until the
 * next failing call. Strings returned through char** are owned by the caller
 * and released with mc_string_free().
 */
#ifndef METRICCAM_METRICCAM_H_
#define METRICCAM_METRICCAM_H_

#include <stddef.h>

#if defined(_WIN32)
#define MC_API __declspec(dllexport)
#else
#define MC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mc_status {
  MC_OK = 0,
  MC_ERR_DOMAIN = 1,
  MC_ERR_DEGENERATE = 2,
  MC_ERR_IO = 3,
  MC_ERR_PARSE = 4,
  MC_ERR_STATE = 5,
  MC_ERR_SINGULAR = 6,
  MC_ERR_DIVERGED = 7,
  MC_ERR_INVALID_ARGUMENT = 8,
  MC_ERR_INTERNAL = 9
} mc_status;

typedef struct mc_intrinsics {
  double fx;
  double fy;
  double u0;
  double v0;
  int width;
  int height;
} mc_intrinsics;

typedef struct mc_metrics {
  double absrel;
  double rms;
  double rms_log;
  double log10;
  double delta1;
  double delta2;
  double delta3;
  size_t valid_pixels;
} mc_metrics;

typedef struct mc_depth mc_depth;
typedef struct mc_cloud mc_cloud;
typedef struct mc_net mc_net;

/* Called once per training iteration by the train and ablate commands. */
typedef void (*mc_progress_fn)(const char* variant, long iter, double total_loss, void* user);

MC_API const char* mc_version(void);
MC_API const char* mc_last_error(void);
MC_API const char* mc_status_name(mc_status status);
MC_API void mc_string_free(char* s);

/* Depth maps. Values <= 0 or non-finite are invalid. */
MC_API mc_status mc_depth_create(int width, int height, const double* values, mc_depth** out);
MC_API mc_status mc_depth_read_pfm(const char* path, mc_depth** out);
MC_API mc_status mc_depth_write_pfm(const mc_depth* depth, const char* path);
MC_API int mc_depth_width(const mc_depth* depth);
MC_API int mc_depth_height(const mc_depth* depth);
/* Copies width*height values into `values`, 0 on invalid pixels. */
MC_API mc_status mc_depth_values(const mc_depth* depth, double* values);
MC_API void mc_depth_free(mc_depth* depth);

MC_API mc_status mc_pixel_focal(double focal_um, double pixel_size_um, double* out);
MC_API mc_status mc_cstm_label_forward(const mc_depth* depth, const mc_intrinsics* k,
                                       double canonical_focal, mc_depth** depth_c,
                                       mc_intrinsics* k_c, double* omega);
MC_API mc_status mc_cstm_label_inverse(const mc_depth* depth_c, double omega, mc_depth** out);
MC_API mc_status mc_cstm_image_inverse(const mc_depth* depth_c, double omega, int width,
                                       int height, mc_depth** out);

MC_API mc_status mc_depth_metrics(const mc_depth* pred, const mc_depth* gt, mc_metrics* out);
MC_API mc_status mc_align_scale_shift(const mc_depth* pred, const mc_depth* gt, double* scale,
                                      double* shift, mc_depth** aligned);
MC_API mc_status mc_measure(const mc_depth* depth, const mc_intrinsics* k, int ua, int va,
                            int ub, int vb, double* meters);

/* Point clouds, xyz interleaved. */
MC_API mc_status mc_cloud_create(const double* xyz, size_t count, mc_cloud** out);
MC_API mc_status mc_cloud_read_ply(const char* path, mc_cloud** out);
MC_API mc_status mc_cloud_write_ply(const mc_cloud* cloud, const char* path);
MC_API size_t mc_cloud_size(const mc_cloud* cloud);
MC_API mc_status mc_cloud_points(const mc_cloud* cloud, double* xyz);
MC_API void mc_cloud_free(mc_cloud* cloud);

MC_API mc_status mc_unproject(const mc_depth* depth, const mc_intrinsics* k, mc_cloud** out);
MC_API mc_status mc_chamfer_l1(const mc_cloud* a, const mc_cloud* b, double* out);
MC_API mc_status mc_fscore(const mc_cloud* a, const mc_cloud* b, double tau, double* precision,
                           double* recall, double* fscore);
/* Rigid transform mapping a onto b; rotation row-major. */
MC_API mc_status mc_icp(const mc_cloud* a, const mc_cloud* b, int max_iters, double tol,
                        double rotation[9], double translation[3], double* rms);

/* Trained networks. */
MC_API mc_status mc_net_load(const char* checkpoint_path, mc_net** out);
MC_API int mc_net_in_channels(const mc_net* net);
MC_API size_t mc_net_num_parameters(const mc_net* net);
MC_API void mc_net_free(mc_net* net);

/* Commands. Each takes a JSON config object and returns a JSON result. */
MC_API mc_status mc_run_synth(const char* config_json, char** result_json);
MC_API mc_status mc_run_train(const char* config_json, mc_progress_fn progress, void* user,
                              char** result_json);
MC_API mc_status mc_run_ablate(const char* config_json, mc_progress_fn progress, void* user,
                               char** result_json);
MC_API mc_status mc_run_eval_depth(const char* config_json, char** result_json);
MC_API mc_status mc_run_reconstruct(const char* config_json, char** result_json);
MC_API mc_status mc_run_measure(const char* config_json, char** result_json);
MC_API mc_status mc_run_gradcheck(const char* config_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* METRICCAM_METRICCAM_H_ */
