#ifndef STEREOTRAP_H
#define STEREOTRAP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(STEREOTRAP_BUILDING)
#define ST_API __declspec(dllexport)
#else
#define ST_API __declspec(dllimport)
#endif
#else
#define ST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum st_status {
  ST_OK = 0,
  ST_ERR_INVALID_ARGUMENT = 1,
  ST_ERR_DIMENSION_MISMATCH = 2,
  ST_ERR_NON_CONVERGENCE = 3,
  ST_ERR_DEGENERATE_GEOMETRY = 4,
  ST_ERR_DEGENERATE_CONFIGURATION = 5,
  ST_ERR_INSUFFICIENT_POINTS = 6,
  ST_ERR_ODD_WIDTH = 7,
  ST_ERR_NO_VALID_DEPTH = 8,
  ST_ERR_EMPTY_BINS = 9,
  ST_ERR_EMPTY_SEQUENCE = 10,
  ST_ERR_LENGTH_MISMATCH = 11,
  ST_ERR_INVALID_WINDOW = 12,
  ST_ERR_IO = 13,
  ST_ERR_PARSE = 14,
  ST_ERR_NULL_POINTER = 100,
  ST_ERR_INTERNAL = 101
} st_status;

typedef enum st_side { ST_LEFT = 0, ST_RIGHT = 1 } st_side;

typedef enum st_pixel_count { ST_PIXELS_VALID_ONLY = 0, ST_PIXELS_FULL_FRAME = 1 } st_pixel_count;

typedef enum st_log_level {
  ST_LOG_DEBUG = 0,
  ST_LOG_INFO = 1,
  ST_LOG_WARNING = 2,
  ST_LOG_ERROR = 3,
  ST_LOG_OFF = 4
} st_log_level;

/* Opaque handles. Every *_create / *_load / producing call hands ownership to
 * the caller, who releases it with the matching *_destroy. */
typedef struct st_raster st_raster;
typedef struct st_calibration st_calibration;
typedef struct st_rectification st_rectification;
typedef struct st_flow st_flow;
typedef struct st_gmm st_gmm;
typedef struct st_ctds_fit st_ctds_fit;
typedef struct st_config st_config;

ST_API const char* st_version(void);
ST_API const char* st_status_string(st_status status);
/* Message of the last failure on the calling thread ("" after success). */
ST_API const char* st_last_error_message(void);
ST_API void st_set_log_level(st_log_level level);
/* Releases strings returned through char** out-parameters. */
ST_API void st_string_free(char* s);

/* Rasters: single-channel float values with a validity mask. */
/* Creates a zero-filled, all-valid raster; width and height must be positive. */
ST_API st_status st_raster_create(int width, int height, st_raster** out);
ST_API void st_raster_destroy(st_raster* raster);
ST_API st_status st_raster_size(const st_raster* raster, int* width, int* height);
/* Row-major views owned by the raster. Either output may be NULL. */
ST_API st_status st_raster_data(st_raster* raster, float** values, uint8_t** valid);
ST_API st_status st_raster_get(const st_raster* raster, int x, int y, float* value, int* valid);
ST_API st_status st_raster_set(st_raster* raster, int x, int y, float value, int valid);
/* Images (PNG, PGM, PPM) are converted to grayscale in [0, 1]; PFM keeps
 * NaN as invalid. */
ST_API st_status st_raster_load(const char* path, st_raster** out);
/* Extension selects the format: .pfm, .png or .pgm (16-bit). */
ST_API st_status st_raster_save(const st_raster* raster, const char* path);
ST_API st_status st_raster_save_disparity_png(const st_raster* disparity, const char* path);
ST_API st_status st_split_sbs(const st_raster* frame, st_raster** left, st_raster** right);
/* Interleaved RGB samples in [0, 1]; result is the per-pixel band mean. */
ST_API st_status st_rgb_to_gray(const float* rgb, int width, int height, st_raster** out);

/* Calibration and rectification. */
ST_API st_status st_calibration_load(const char* path, st_calibration** out);
ST_API st_status st_calibration_parse(const char* json, st_calibration** out);
ST_API void st_calibration_destroy(st_calibration* cal);
ST_API st_status st_calibration_to_json(const st_calibration* cal, char** json);
/* Pixel -> normalized undistorted coordinates and back. */
ST_API st_status st_undistort_point(const st_calibration* cal, st_side side, double u, double v,
                                    double* x, double* y);
ST_API st_status st_project_point(const st_calibration* cal, st_side side, double x, double y,
                                  double z, double* u, double* v);

ST_API st_status st_rectification_compute(const st_calibration* cal, st_rectification** out);
ST_API void st_rectification_destroy(st_rectification* rect);
ST_API st_status st_rectification_info(const st_rectification* rect, int* width, int* height,
                                       double* focal, double* cx, double* cy, double* baseline);
ST_API st_status st_rectification_remap(const st_rectification* rect, st_side side,
                                        const st_raster* image, st_raster** out);
/* Rectified pixel position of a point given in the left camera frame. */
ST_API st_status st_rectification_project(const st_rectification* rect, st_side side, double x,
                                          double y, double z, double* u, double* v);

/* Essential matrix from >= 8 correspondences in normalized coordinates
 * (arrays of x, y pairs). rotation is row-major 3x3, translation unit length. */
ST_API st_status st_essential_8point(const double* first, const double* second, size_t n,
                                     double rotation[9], double translation[3],
                                     double essential[9]);

/* Stereo matching and depth. */
typedef struct st_matcher_params {
  int max_disparity;
  int census_window;
  int p1;
  int p2;
  double lr_tolerance;
} st_matcher_params;

ST_API void st_matcher_params_default(st_matcher_params* params);
ST_API st_status st_compute_disparity(const st_raster* left, const st_raster* right,
                                      const st_matcher_params* params, st_raster** out);
/* z = baseline * focal / d; pixels with d <= min_disparity become invalid. */
ST_API st_status st_disparity_to_depth(const st_raster* disparity, double baseline, double focal,
                                       double min_disparity, st_raster** out);
ST_API double st_depth_from_disparity(double disparity, double baseline, double focal,
                                      double min_disparity);

/* Dense optical flow. dx, dy satisfy prev(x - dx, y - dy) ~ curr(x, y). */
typedef struct st_flow_params {
  int levels;
  double pyr_scale;
  int poly_n;
  double poly_sigma;
  int iterations;
  int window;
  double min_eigenvalue;
} st_flow_params;

ST_API void st_flow_params_default(st_flow_params* params);
ST_API st_status st_flow_estimate(const st_raster* curr, const st_raster* prev,
                                  const st_flow_params* params, st_flow** out);
ST_API st_status st_flow_create(int width, int height, st_flow** out);
ST_API void st_flow_destroy(st_flow* flow);
ST_API st_status st_flow_size(const st_flow* flow, int* width, int* height);
ST_API st_status st_flow_get(const st_flow* flow, int x, int y, float* dx, float* dy, int* valid);
ST_API st_status st_flow_set(st_flow* flow, int x, int y, float dx, float dy, int valid);
ST_API st_status st_flow_load(const char* path, st_flow** out);
ST_API st_status st_flow_save(const st_flow* flow, const char* path);
ST_API st_status st_warp_backward(const st_raster* raster, const st_flow* flow, st_raster** out);

/* Temporal disparity error. flows[i] maps frame i + 1 to frame i, so
 * n_flows = n_frames - 1. per_frame (nullable) receives n_frames - 1 values. */
typedef struct st_temporal_report {
  double e_t;
  size_t n_frames;
  size_t n_pixels;
  double valid_pixel_fraction;
} st_temporal_report;

ST_API st_status st_temporal_error(const st_raster* const* disparities, size_t n_frames,
                                   const st_flow* const* flows, size_t n_flows,
                                   st_pixel_count convention, st_temporal_report* report,
                                   double* per_frame);

/* Frame sampling. Index outputs need room for `capacity` entries; *count
 * receives the full plan length even when it exceeds capacity. */
ST_API st_status st_fixed_rate_sample(size_t n_frames, double fps, double rate, size_t* indices,
                                      size_t capacity, size_t* count);
ST_API st_status st_accumulate_ratios(const double* ratios, size_t n, double threshold,
                                      size_t burn_in, size_t* indices, size_t capacity,
                                      size_t* count);
ST_API st_status st_gmm_create(int width, int height, st_gmm** out);
ST_API void st_gmm_destroy(st_gmm* gmm);
/* learning_rate < 0 uses the default; mask (nullable) receives width * height
 * bytes with 1 = foreground. */
ST_API st_status st_gmm_apply(st_gmm* gmm, const st_raster* frame, double learning_rate,
                              double* foreground_ratio, uint8_t* mask);

/* Per-detection distance. The mask variant takes a row-major width * height
 * byte mask matching the depth map. */
ST_API st_status st_distance_from_bbox(const st_raster* depth, double x, double y, double w,
                                       double h, double min_valid_fraction, double* distance,
                                       double* valid_fraction);
ST_API st_status st_distance_from_mask(const st_raster* depth, const uint8_t* mask,
                                       double min_valid_fraction, double* distance,
                                       double* valid_fraction);

/* Detection function fitting. */
typedef enum st_key_function { ST_KEY_UNIFORM = 0, ST_KEY_HALF_NORMAL = 1 } st_key_function;

typedef struct st_ctds_options {
  st_key_function key;
  int adjustments;
  int scale_at_zero; /* 0: g(w_l) = 1, otherwise g(0) = 1 */
} st_ctds_options;

ST_API void st_ctds_options_default(st_ctds_options* options);
/* edges receives n_bins + 1 values. */
ST_API st_status st_ctds_make_bins(double w_l, double w, int n_bins, double* edges);
ST_API st_status st_ctds_fit_binned(const double* edges, const size_t* counts, size_t n_bins,
                                    const st_ctds_options* options, st_ctds_fit** out);
ST_API void st_ctds_fit_destroy(st_ctds_fit* fit);
ST_API st_status st_ctds_fit_summary(const st_ctds_fit* fit, double* loglik, double* aic,
                                     double* p_hat, int* iterations);
ST_API st_status st_ctds_fit_coefficients(const st_ctds_fit* fit, double* coefficients,
                                          size_t capacity, size_t* count);
ST_API st_status st_ctds_fit_bin_probabilities(const st_ctds_fit* fit, double* probs,
                                               size_t capacity, size_t* count);
ST_API st_status st_ctds_fit_g(const st_ctds_fit* fit, double r, double* g);
ST_API st_status st_ctds_fit_gof(const st_ctds_fit* fit, double* chi2, int* dof, double* p_value);
ST_API st_status st_ctds_fit_to_json(const st_ctds_fit* fit, char** json);
ST_API st_status st_ctds_fit_to_svg(const st_ctds_fit* fit, char** svg);

/* Pipeline configuration. Field names are dotted paths such as
 * "matcher.max_disparity" or "ctds.window". */
ST_API st_status st_config_create(st_config** out);
ST_API st_status st_config_load(const char* path, st_config** out);
ST_API st_status st_config_parse(const char* json, const char* base_dir, st_config** out);
ST_API void st_config_destroy(st_config* config);
ST_API st_status st_config_set(st_config* config, const char* key, const char* value);
ST_API st_status st_config_validate(const st_config* config);
ST_API st_status st_config_to_json(const st_config* config, char** json);

typedef struct st_run_summary {
  size_t observations;
  size_t succeeded;
  size_t failed;
  size_t distances;
  int fitted;
  int exit_code;
} st_run_summary;

/* Full pipeline over an observation store directory, writing into the
 * configured output directory. */
ST_API st_status st_pipeline_run(const st_config* config, const char* store_root,
                                  st_run_summary* summary);

/* File-level stages; parameters come from the configuration. */
ST_API st_status st_stage_split(const char* frame, const char* left_out, const char* right_out);
ST_API st_status st_stage_rectify(const st_config* config, const char* left_in,
                                  const char* right_in, const char* left_out,
                                  const char* right_out);
ST_API st_status st_stage_match(const st_config* config, const char* left, const char* right,
                                const char* disparity_out, const char* png_out);
ST_API st_status st_stage_depth(const st_config* config, const char* disparity,
                                const char* depth_out);
ST_API st_status st_stage_flow(const st_config* config, const char* prev, const char* curr,
                               const char* flow_out);
ST_API st_status st_stage_quality(const st_config* config, const char* const* disparities,
                                  size_t n_disparities, const char* const* flows, size_t n_flows,
                                  const char* report_out, double* e_t);
ST_API st_status st_stage_sample(const st_config* config, const char* const* frames,
                                 size_t n_frames, const char* video_id, const char* plan_out,
                                 size_t* n_samples);
ST_API st_status st_stage_distances(const st_config* config, const char* detections,
                                    const char* depth_dir, const char* plan,
                                    const char* observation_id, const char* csv_out, int append,
                                    size_t* n_records);
ST_API st_status st_stage_ctds_fit(const st_config* config, const char* const* inputs,
                                   size_t n_inputs, const char* fit_out, const char* svg_out);
ST_API st_status st_stage_report(const st_config* config, const char* const* reports,
                                 size_t n_reports, const char* csv_out);

#ifdef __cplusplus
}
#endif

#endif /* STEREOTRAP_H */
