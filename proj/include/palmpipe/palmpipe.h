/* Copyright 2026 The palmpipe authors */
/* SPDX-License-Identifier: Apache-2.0 */

/* C interface of the palmpipe shared library. Every entry point returns a
 * pp_status; on failure pp_last_error() describes the problem for the
 * calling thread. Strings returned through char** are heap-allocated and
 * must be released with pp_free(). The pp_config handle is opaque; create
 * it empty or from a config file, then apply key/value overrides. */

#ifndef PALMPIPE_PALMPIPE_H
#define PALMPIPE_PALMPIPE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pp_status {
  PP_OK = 0,
  PP_ERR_BAD_ARGUMENT = 1,
  PP_ERR_OUT_OF_BOUNDS = 2,
  PP_ERR_BAD_WINDOW = 3,
  PP_ERR_BAD_SIZE = 4,
  PP_ERR_DEGENERATE_CONFIGURATION = 5,
  PP_ERR_SINGULAR_HOMOGRAPHY = 6,
  PP_ERR_INSUFFICIENT_POINTS = 7,
  PP_ERR_COLLINEAR_POINTS = 8,
  PP_ERR_DUPLICATE_SOURCE_POINTS = 9,
  PP_ERR_DIMENSION_MISMATCH = 10,
  PP_ERR_EXTRACTOR_MISMATCH = 11,
  PP_ERR_PARSE = 12,
  PP_ERR_SCHEMA_VIOLATION = 13,
  PP_ERR_SEGMENTATION_FAILED = 14,
  PP_ERR_VALLEYS_NOT_FOUND = 15,
  PP_ERR_WRONG_ARITY = 16,
  PP_ERR_OUT_OF_RANGE_SCORE = 17,
  PP_ERR_LENGTH_MISMATCH = 18,
  PP_ERR_EMPTY_MANIFEST = 19,
  PP_ERR_MISSING_CLASS = 20,
  PP_ERR_DUPLICATE_CAPTURE = 21,
  PP_ERR_UNKNOWN_SUBJECT = 22,
  PP_ERR_EMPTY_GALLERY = 23,
  PP_ERR_IO = 24,
  PP_ERR_INTERNAL = 25
} pp_status;

/* Stable lowercase identifier of a status value, e.g. "parse". */
const char* pp_status_name(pp_status status);

/* Message of the last failure on the calling thread; "" after success. */
const char* pp_last_error(void);

/* Library version, semantic "major.minor.patch". */
const char* pp_version(void);

/* Releases a string allocated by the library. NULL is a no-op. */
void pp_free(char* text);

/* ---- configuration ------------------------------------------------- */

typedef struct pp_config pp_config;

/* Defaults; never fails. Release with pp_config_free. */
pp_config* pp_config_new(void);

/* Parses a flat key = value config file; NULL on failure (see
 * pp_last_error). */
pp_config* pp_config_load(const char* path);

/* Applies one override using the config file's key and value syntax. */
pp_status pp_config_set(pp_config* cfg, const char* key, const char* value);

/* Renders the effective configuration in the config file format. */
pp_status pp_config_text(const pp_config* cfg, char** out_text);

void pp_config_free(pp_config* cfg);

/* ---- workflows ------------------------------------------------------ */

/* Generates a synthetic dataset (images, keypoint files, manifest.json)
 * under out_dir. image_size <= 0 selects the default (416);
 * left_fraction < 0 selects the default (0.5). */
pp_status pp_synth(uint64_t n_subjects, uint64_t captures_per_subject, uint64_t seed,
                   const char* out_dir, int image_size, double left_fraction);

/* Processes every manifest capture into roi/ and emb/ artifacts under
 * out_dir. Per-capture failures are logged and counted, not fatal; the
 * call fails only when the dataset itself is unusable. */
pp_status pp_pipeline(const char* manifest_path, const pp_config* cfg, const char* out_dir,
                      int* out_processed, int* out_failed);

typedef struct pp_eval_metrics {
  double eer;
  double tar_at_far_0_1pct;
  double threshold_far_0_1pct;
  double tar_at_far_1pct;
  double threshold_far_1pct;
  uint64_t genuine_pairs;
  uint64_t impostor_pairs;
} pp_eval_metrics;

/* Verification benchmark over a dataset; writes the report files under
 * out_dir and fills out_metrics (which may be NULL). */
pp_status pp_eval(const char* manifest_path, const pp_config* cfg, const char* out_dir,
                  pp_eval_metrics* out_metrics);

typedef struct pp_fuse_metrics {
  double threshold_a; /* matcher A accept threshold at FAR = 0.1% */
  double threshold_b; /* matcher B accept threshold at FAR = 0.1% */
  uint64_t both_match;
  uint64_t a_only;
  uint64_t b_only;
  uint64_t neither;
  pp_eval_metrics fused;
} pp_fuse_metrics;

/* Sum-score fusion of two score files over the same pair set (csv_a in
 * [0,1], csv_b in [0,100]); writes the fused report and contingency table
 * under out_dir. out_metrics may be NULL. */
pp_status pp_fuse(const char* csv_a, const char* csv_b, const char* out_dir,
                  pp_fuse_metrics* out_metrics);

/* Enrolls every manifest capture into a gallery file. */
pp_status pp_enroll(const char* manifest_path, const pp_config* cfg, const char* gallery_path,
                    int* out_enrolled);

/* Verifies one capture against an enrolled subject. keypoints_path may be
 * NULL or "" with the heuristic keypoint provider. out_match is 1 on
 * accept, 0 on reject. */
pp_status pp_verify(const char* gallery_path, const char* image_path, const char* keypoints_path,
                    const char* subject_id, const pp_config* cfg, int* out_match,
                    double* out_score);

/* Ranks the top_n best-matching subjects for one capture. out_json
 * receives {"matches": [{"subject_id": ..., "score": ...}, ...]} ordered
 * by descending score; release it with pp_free. */
pp_status pp_identify(const char* gallery_path, const char* image_path,
                      const char* keypoints_path, int top_n, const pp_config* cfg,
                      char** out_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PALMPIPE_PALMPIPE_H */
