#ifndef PCLV_PCLV_H
#define PCLV_PCLV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(PCLV_BUILDING_LIBRARY)
#define PCLV_API __declspec(dllexport)
#else
#define PCLV_API __declspec(dllimport)
#endif
#else
#define PCLV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pclv_status {
  PCLV_OK = 0,
  PCLV_ERR_INVALID_ARGUMENT = 1,
  PCLV_ERR_IO = 2,
  PCLV_ERR_FORMAT = 3,
  PCLV_ERR_PRECONDITION = 4,
  PCLV_ERR_DEGENERATE = 5,
  PCLV_ERR_INTERNAL = 6
} pclv_status;

typedef struct pclv_config pclv_config;
typedef struct pclv_result pclv_result;
typedef struct pclv_records pclv_records;
typedef struct pclv_cloud pclv_cloud;

typedef struct pclv_metrics {
  double boundary_recall;
  double under_seg_error;
  size_t gt_segments;
  size_t n_segments;
  double delta;
} pclv_metrics;

typedef struct pclv_record {
  size_t target_segments; /* 0 for fixed-delta records */
  size_t n_segments;
  double boundary_recall;
  double under_seg_error;
  size_t gt_segments;
  double delta;
  int flagged;
} pclv_record;

/* Message and stage of the last failure on the calling thread. Never NULL. */
PCLV_API const char* pclv_last_error(void);
PCLV_API const char* pclv_last_error_stage(void);
PCLV_API const char* pclv_version(void);

/* Run configuration; keys and values as in the key=value config format. */
PCLV_API pclv_status pclv_config_create(pclv_config** out);
PCLV_API void pclv_config_destroy(pclv_config* cfg);
PCLV_API pclv_status pclv_config_set(pclv_config* cfg, const char* key, const char* value);
PCLV_API pclv_status pclv_config_load_file(pclv_config* cfg, const char* path);
/* The returned string lives until the next call on cfg. */
PCLV_API pclv_status pclv_config_get(pclv_config* cfg, const char* key, const char** value);
/* Diagnostics as "field: message" lines; empty when the config is valid.
   The string lives until the next call on cfg. */
PCLV_API pclv_status pclv_config_validate(pclv_config* cfg, size_t* count, const char** text);
/* Rebuilds the config of a finished run from its metadata JSON. */
PCLV_API pclv_status pclv_config_from_metadata(const char* json, pclv_config** out);

PCLV_API pclv_status pclv_run(const pclv_config* cfg, pclv_result** out);
PCLV_API void pclv_result_destroy(pclv_result* res);
PCLV_API size_t pclv_result_num_points(const pclv_result* res);
PCLV_API size_t pclv_result_num_segments(const pclv_result* res);
/* Copies min(cap, num_points) labels. */
PCLV_API pclv_status pclv_result_labels(const pclv_result* res, uint32_t* out, size_t cap);
PCLV_API double pclv_result_delta(const pclv_result* res);
PCLV_API int pclv_result_within_tolerance(const pclv_result* res);
PCLV_API int pclv_result_has_metrics(const pclv_result* res);
PCLV_API pclv_status pclv_result_metrics(const pclv_result* res, pclv_metrics* out);
PCLV_API const char* pclv_result_metadata_json(const pclv_result* res);
PCLV_API double pclv_result_total_seconds(const pclv_result* res);
PCLV_API size_t pclv_result_stage_count(const pclv_result* res);
PCLV_API pclv_status pclv_result_stage(const pclv_result* res, size_t index, const char** name, double* seconds);
/* Descriptor counters: normals_estimated, normals_loaded, fpfh_computed,
   fpfh_loaded; also n_edges. */
PCLV_API pclv_status pclv_result_counter(const pclv_result* res, const char* name, int64_t* out);

PCLV_API pclv_status pclv_sweep_targets(const pclv_config* cfg, const size_t* targets, size_t count,
                                        pclv_records** out);
PCLV_API pclv_status pclv_sweep_deltas(const pclv_config* cfg, const double* deltas, size_t count,
                                       pclv_records** out);
PCLV_API void pclv_records_destroy(pclv_records* recs);
PCLV_API size_t pclv_records_count(const pclv_records* recs);
PCLV_API pclv_status pclv_records_get(const pclv_records* recs, size_t index, pclv_record* out);
PCLV_API const char* pclv_records_csv(const pclv_records* recs);

/* Metrics between two 16-bit label PNGs. Pixels equal to `ignore` (when
   has_ignore) are unlabeled in both images. */
PCLV_API pclv_status pclv_eval_label_files(const char* pred_path, const char* gt_path, double d, int has_ignore,
                                           int64_t ignore, pclv_metrics* out);
/* Row-major label arrays; negative values are unlabeled. */
PCLV_API pclv_status pclv_eval_arrays(size_t width, size_t height, const int64_t* pred, const int64_t* gt,
                                      double d, pclv_metrics* out);

/* intrinsics: a 5-value file or "nyu". */
PCLV_API pclv_status pclv_convert_rgbd(const char* depth_path, const char* rgb_path, const char* intrinsics,
                                       const char* out_ply, int ascii);
/* Colors the cloud named by cfg's input keys with one color per label. */
PCLV_API pclv_status pclv_colorize_labels(const pclv_config* cfg, const char* labels_path, const char* out_ply);

/* kind: "corner" or "room". Writes depth.png, rgb.png, gt.png and
   intrinsics.txt into out_dir. */
PCLV_API pclv_status pclv_synth_scene(const char* kind, uint64_t seed, size_t width, size_t height,
                                      const char* out_dir);

PCLV_API pclv_status pclv_cloud_load(const pclv_config* cfg, pclv_cloud** out);
PCLV_API void pclv_cloud_destroy(pclv_cloud* cloud);
PCLV_API size_t pclv_cloud_size(const pclv_cloud* cloud);
/* xyz triples; copies min(cap_points, size) points. */
PCLV_API pclv_status pclv_cloud_positions(const pclv_cloud* cloud, double* xyz, size_t cap_points);
PCLV_API pclv_status pclv_cloud_colors(const pclv_cloud* cloud, double* rgb, size_t cap_points);
PCLV_API int pclv_cloud_has_grid(const pclv_cloud* cloud);

#ifdef __cplusplus
}
#endif

#endif
