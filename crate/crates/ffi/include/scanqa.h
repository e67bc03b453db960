#ifndef SCANQA_H
#define SCANQA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of the easy-question check.
typedef enum ScanqaRejection {
  SCANQA_REJECTION_ACCEPTED = 0,
  SCANQA_REJECTION_EXISTENCE = 1,
  SCANQA_REJECTION_COUNT = 2,
  SCANQA_REJECTION_COLOR = 3,
  SCANQA_REJECTION_SCENE_TYPE = 4,
} ScanqaRejection;

// Result of every fallible call.
typedef enum ScanqaStatus {
  SCANQA_STATUS_OK = 0,
  SCANQA_STATUS_ERR_NULL_ARGUMENT = 1,
  SCANQA_STATUS_ERR_INVALID_UTF8 = 2,
  SCANQA_STATUS_ERR_BUFFER_TOO_SMALL = 3,
  SCANQA_STATUS_ERR_IO = 4,
  SCANQA_STATUS_ERR_PARSE = 5,
  SCANQA_STATUS_ERR_VALIDATION = 6,
  SCANQA_STATUS_ERR_CONFIG = 7,
  SCANQA_STATUS_ERR_PARAMETER = 8,
  SCANQA_STATUS_ERR_SHAPE = 9,
  SCANQA_STATUS_ERR_TRAINING = 10,
  SCANQA_STATUS_ERR_GENERATION = 11,
  SCANQA_STATUS_ERR_JSON = 12,
  SCANQA_STATUS_ERR_PANIC = 13,
} ScanqaStatus;

// A trained model with its vocabularies.
typedef struct ScanqaModel ScanqaModel;

// A loaded point-cloud scene.
typedef struct ScanqaScene ScanqaScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message (empty after a
// successful call).
//
// # Safety
// `buf` must be valid for `len` bytes or null; `needed` null or writable.
enum ScanqaStatus scanqa_last_error_message(char *buf, size_t len, size_t *needed);

// Library version as a static NUL-terminated string.
const char *scanqa_version(void);

// Loads an ASCII or binary PLY scene.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ScanqaStatus scanqa_scene_load_ply(const char *path, struct ScanqaScene **out);

// Writes the scene as binary little-endian PLY.
//
// # Safety
// `scene` must come from [`scanqa_scene_load_ply`]; `path` NUL-terminated.
enum ScanqaStatus scanqa_scene_export_ply(const struct ScanqaScene *scene, const char *path);

// Number of points in the scene, or 0 for a null handle.
//
// # Safety
// `scene` must be null or come from [`scanqa_scene_load_ply`].
size_t scanqa_scene_num_points(const struct ScanqaScene *scene);

// Copies the scene id.
//
// # Safety
// `scene` must come from [`scanqa_scene_load_ply`]; `buf` valid for `len`
// bytes or null; `needed` null or writable.
enum ScanqaStatus scanqa_scene_id(const struct ScanqaScene *scene,
                                  char *buf,
                                  size_t len,
                                  size_t *needed);

// # Safety
// `scene` must be null or come from [`scanqa_scene_load_ply`], and must not
// be used afterwards.
void scanqa_scene_free(struct ScanqaScene *scene);

// Loads a checkpoint directory written by `scanqa train`.
//
// # Safety
// `dir` must be NUL-terminated; `out` must be writable.
enum ScanqaStatus scanqa_model_load(const char *dir, struct ScanqaModel **out);

// Number of candidate answers of the model, or 0 for a null handle.
//
// # Safety
// `model` must be null or come from [`scanqa_model_load`].
size_t scanqa_model_num_answers(const struct ScanqaModel *model);

// Answers `question` about `scene` (ground-truth proposals from the
// scene's instance annotations). `scene` may be null only for a
// question-only model. The answer text is copied into `buf`; its logit is
// written to `*score` when `score` is not null.
//
// # Safety
// Handles must come from the matching loaders; `question` NUL-terminated;
// `buf` valid for `len` bytes or null; `needed` and `score` null or writable.
enum ScanqaStatus scanqa_model_answer(const struct ScanqaModel *model,
                                      const struct ScanqaScene *scene,
                                      const char *question,
                                      char *buf,
                                      size_t len,
                                      size_t *needed,
                                      double *score);

// # Safety
// `model` must be null or come from [`scanqa_model_load`], and must not be
// used afterwards.
void scanqa_model_free(struct ScanqaModel *model);

// Agreement score (0, 0.5 or 1) of `answer` against a record given as one
// JSON object in the dataset format.
//
// # Safety
// Strings must be NUL-terminated; `out` writable.
enum ScanqaStatus scanqa_accuracy(const char *answer, const char *record_json, double *out);

// Checks a question against the bundled easy-question patterns.
//
// # Safety
// `question` must be NUL-terminated; `out` writable.
enum ScanqaStatus scanqa_check_question(const char *question, enum ScanqaRejection *out);

// Name of the nearest of the 17 named colors.
//
// # Safety
// `buf` valid for `len` bytes or null; `needed` null or writable.
enum ScanqaStatus scanqa_nearest_color(uint8_t r,
                                       uint8_t g,
                                       uint8_t b,
                                       char *buf,
                                       size_t len,
                                       size_t *needed);

// Sinusoidal encoding of a 12-component box descriptor. Writes
// `12 * d_model` values to `out`, which must hold `out_len` doubles.
//
// # Safety
// `v` must point to 12 doubles; `out` to `out_len` writable doubles.
enum ScanqaStatus scanqa_positional_encode(const double *v,
                                           size_t d_model,
                                           double *out,
                                           size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCANQA_H */
