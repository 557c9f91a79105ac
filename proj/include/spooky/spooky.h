/* C interface to the spooky toolkit.
 *
 * Every function returns a status code; SPOOKY_OK is zero. On failure the
 * message and offending field path are available from spooky_last_error()
 * and spooky_last_error_field() on the calling thread until its next call.
 * Objects are opaque handles released with their _free function. Strings
 * returned through char** are owned by the caller and released with
 * spooky_string_free(). Distinct handles may be used from distinct threads.
 */
#ifndef SPOOKY_H
#define SPOOKY_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SPOOKY_API __declspec(dllexport)
#else
#define SPOOKY_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spooky_status {
  SPOOKY_OK = 0,
  SPOOKY_E_INVALID_ARGUMENT,
  SPOOKY_E_ZERO_VELOCITY,
  SPOOKY_E_NON_POSITIVE_DURATION,
  SPOOKY_E_ZERO_DIMENSION,
  SPOOKY_E_INVALID_FPS,
  SPOOKY_E_INVALID_BLOCK_SIZE,
  SPOOKY_E_INVALID_DENSITY,
  SPOOKY_E_OUT_OF_CANVAS,
  SPOOKY_E_DEGENERATE_SHAPE,
  SPOOKY_E_EMPTY_TEXT,
  SPOOKY_E_UNSUPPORTED_GLYPH,
  SPOOKY_E_TEXT_TOO_LARGE,
  SPOOKY_E_UNREADABLE_IMAGE,
  SPOOKY_E_EMPTY_MASK,
  SPOOKY_E_MIXED_DIMENSIONS,
  SPOOKY_E_EMPTY_DIRECTORY,
  SPOOKY_E_DIMENSION_MISMATCH,
  SPOOKY_E_DEGENERATE_MASK,
  SPOOKY_E_FRAME_TOO_SMALL,
  SPOOKY_E_TOO_FEW_FRAMES,
  SPOOKY_E_ZERO_NOISE_VARIANCE,
  SPOOKY_E_ZERO_WEIGHTED_NOISE,
  SPOOKY_E_DEGENERATE_COHERENCE,
  SPOOKY_E_EMPTY_REGION,
  SPOOKY_E_NO_REGION_FOUND,
  SPOOKY_E_UNKNOWN_VIDEO_ID,
  SPOOKY_E_EMPTY_INPUT,
  SPOOKY_E_NO_RATINGS,
  SPOOKY_E_INSUFFICIENT_BINS,
  SPOOKY_E_ODD_DIMENSIONS,
  SPOOKY_E_SINK_FAILURE,
  SPOOKY_E_BAD_HEADER,
  SPOOKY_E_TRUNCATED_FRAME,
  SPOOKY_E_UNSUPPORTED_CHROMA_TAG,
  SPOOKY_E_IO_FAILURE,
  SPOOKY_E_SCHEMA_VIOLATION,
  SPOOKY_E_DUPLICATE_VIDEO_ID,
  SPOOKY_E_INTERNAL = 100
} spooky_status;

SPOOKY_API const char* spooky_version(void);
/* Symbolic name such as "DegenerateShape". */
SPOOKY_API const char* spooky_status_name(int status);
/* Non-zero for failures caused by files, streams or sockets. */
SPOOKY_API int spooky_status_is_io(int status);
SPOOKY_API const char* spooky_last_error(void);
SPOOKY_API const char* spooky_last_error_field(void);
SPOOKY_API void spooky_string_free(char* s);

/* ---- encoding parameters ---- */

typedef struct spooky_params {
  int width;
  int height;
  int fps;
  double duration_s;
  double vx;
  double vy;
  int block_size;
  double density;
  uint64_t seed;
} spooky_params;

SPOOKY_API void spooky_params_default(spooky_params* p);
SPOOKY_API int spooky_params_check(const spooky_params* p);
/* Largest text scale that fits `text` on the canvas. */
SPOOKY_API int spooky_fit_text_scale(const char* text, int width, int height, int* scale);

/* ---- videos ---- */

typedef struct spooky_video spooky_video;

typedef enum spooky_format { SPOOKY_FORMAT_Y4M = 0, SPOOKY_FORMAT_PNG = 1 } spooky_format;

/* A directory is read as a PNG frame sequence, anything else as Y4M. */
SPOOKY_API int spooky_video_read(const char* path, spooky_video** out);
SPOOKY_API int spooky_video_write(const spooky_video* v, const char* path, spooky_format f);
SPOOKY_API int spooky_video_info(const spooky_video* v, int* width, int* height, int* fps,
                                 size_t* frames);
/* Borrowed pointer to width*height bytes, valid while `v` lives. */
SPOOKY_API int spooky_video_frame(const spooky_video* v, size_t index, const uint8_t** pixels);
/* Non-zero when both videos hold identical frames. */
SPOOKY_API int spooky_video_equal(const spooky_video* a, const spooky_video* b);
SPOOKY_API void spooky_video_free(spooky_video* v);

/* ---- masks ---- */

typedef struct spooky_mask spooky_mask;

/* Thresholds a PNG at 128; resampled when width and height are positive. */
SPOOKY_API int spooky_mask_read(const char* path, int width, int height, spooky_mask** out);
SPOOKY_API int spooky_mask_write(const spooky_mask* m, const char* path);
SPOOKY_API int spooky_mask_iou(const spooky_mask* a, const spooky_mask* b, double* iou);
SPOOKY_API void spooky_mask_free(spooky_mask* m);

/* ---- manifests ----
 * Entries are exchanged as JSON objects in the manifest file schema. */

typedef struct spooky_manifest spooky_manifest;

SPOOKY_API int spooky_manifest_new(spooky_manifest** out);
SPOOKY_API int spooky_manifest_load(const char* path, spooky_manifest** out);
SPOOKY_API int spooky_manifest_save(const spooky_manifest* m, const char* path);
SPOOKY_API int spooky_manifest_add(spooky_manifest* m, const char* entry_json);
SPOOKY_API size_t spooky_manifest_size(const spooky_manifest* m);
SPOOKY_API int spooky_manifest_entry(const spooky_manifest* m, size_t index, char** entry_json);
/* Regenerates entry `index`; relative paths resolve against base_dir. */
SPOOKY_API int spooky_manifest_render(const spooky_manifest* m, size_t index,
                                      const char* base_dir, spooky_video** out);
/* Ground-truth mask; *out is NULL for depth entries. */
SPOOKY_API int spooky_manifest_mask(const spooky_manifest* m, size_t index, const char* base_dir,
                                    spooky_mask** out);
SPOOKY_API void spooky_manifest_free(spooky_manifest* m);

/* ---- analysis ---- */

typedef struct spooky_analysis_options {
  double f0;
  double tau;
  int local_window;
  int border_exclude; /* negative: derive from the flow options */
  int use_ground_truth;
  int flow_window;
  int flow_max_disp;
  int flow_levels;
  int flow_smoothing;
} spooky_analysis_options;

typedef struct spooky_snr_values {
  double basic;
  double perceptual;
  double temporal_coherence;
  double motion_contrast;
  double combined;
  /* 1 when the dB field is a finite number. Otherwise the dB field holds
   * +-inf for unbounded ratios and NaN when the metric does not apply. */
  int basic_finite;
  int perceptual_finite;
  int temporal_coherence_finite;
  int motion_contrast_finite;
  int combined_finite;
  int contentless;
} spooky_snr_values;

SPOOKY_API void spooky_analysis_options_default(spooky_analysis_options* o);
/* `mask` may be NULL. `report_json` (optional) receives the stored report. */
SPOOKY_API int spooky_analyze(const spooky_video* v, const spooky_mask* mask,
                              const spooky_analysis_options* o, const char* video_id,
                              spooky_snr_values* values, char** report_json);
/* Mean +- stdev per category over stored reports. Input is a JSON array of
 * {"category": ..., "report": <report object>}. */
SPOOKY_API int spooky_snr_table(const char* items_json, char** table);

/* ---- decoding ---- */

typedef struct spooky_decode_options {
  int bimodal; /* 0: percentile rule, 1: bimodal rule */
  double percentile;
  int closing_iterations;
  double min_component_fraction;
} spooky_decode_options;

typedef struct spooky_decoding spooky_decoding;

SPOOKY_API void spooky_decode_options_default(spooky_decode_options* o);
SPOOKY_API int spooky_decode(const spooky_video* v, const spooky_analysis_options* a,
                             const spooky_decode_options* o, spooky_decoding** out);
SPOOKY_API int spooky_decoding_contentless(const spooky_decoding* d);
/* NULL when contentless. Owned by the decoding. */
SPOOKY_API const spooky_mask* spooky_decoding_mask(const spooky_decoding* d);
/* Writes boundary.png, coherence.png and, unless contentless, mask.png,
 * overlay.png and a decode.json summary into `dir`. */
SPOOKY_API int spooky_decoding_write(const spooky_decoding* d, const spooky_video* v,
                                     const char* dir);
SPOOKY_API void spooky_decoding_free(spooky_decoding* d);

/* ---- evaluation ---- */

typedef struct spooky_eval_options {
  const char* roster_path; /* optional JSON roster */
  int per_fps;
  int verbose;
} spooky_eval_options;

SPOOKY_API int spooky_evaluate(const char* manifest_path, const char* responses_path,
                               const spooky_eval_options* o, char** report_json, char** table);

/* Joins responses with stored SNR reports. `metric` is one of basic,
 * perceptual, temporal_coherence, motion_contrast, combined. */
SPOOKY_API int spooky_threshold_analysis(const char* manifest_path, const char* responses_path,
                                         const char* const* report_paths, size_t report_count,
                                         const char* metric, double bin_width_db,
                                         double origin_db, char** report_json, char** table);

/* ---- study server ---- */

typedef struct spooky_server spooky_server;

SPOOKY_API int spooky_server_new(const char* manifest_path, const char* study_config_path,
                                 const char* response_log_path, const char* static_root,
                                 spooky_server** out);
SPOOKY_API int spooky_server_bind(spooky_server* s, const char* host, int port, int* bound_port);
/* Blocks until spooky_server_stop() is called from another thread. */
SPOOKY_API int spooky_server_run(spooky_server* s);
SPOOKY_API void spooky_server_stop(spooky_server* s);
SPOOKY_API void spooky_server_free(spooky_server* s);

#ifdef __cplusplus
}
#endif

#endif
