#ifndef JOBBERT_H
#define JOBBERT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `INPUT`, `NUMERIC` and `UNKNOWN_QUERIES` mirror CLI exit
 * codes 2, 3 and 4.
 */
typedef enum jb_status {
  JB_STATUS_OK = 0,
  JB_STATUS_NULL_ARGUMENT = 1,
  JB_STATUS_INVALID_UTF8 = 2,
  JB_STATUS_INPUT = 3,
  JB_STATUS_NUMERIC = 4,
  JB_STATUS_UNKNOWN_QUERIES = 5,
  JB_STATUS_BUFFER_TOO_SMALL = 6,
  JB_STATUS_PANIC = 7,
} jb_status;

/**
 * Which space a title embedding is returned in.
 */
typedef enum jb_space {
  /**
   * Before the title projection; comparable with skill-set vectors.
   */
  JB_SPACE_ENCODER = 0,
  /**
   * After the title projection; used for title matching.
   */
  JB_SPACE_PROJECTED = 1,
} jb_space;

/**
 * Opaque handle to a loaded checkpoint.
 */
typedef struct jb_model jb_model;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *jb_version(void);

/**
 * Message of the last failure on this thread, or an empty string. Owned by
 * the library and valid until the next call on this thread.
 */
const char *jb_last_error_message(void);

/**
 * Loads a checkpoint. On success `*out` receives a handle to release with
 * [`jb_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one write.
 */
enum jb_status jb_model_load(const char *path, struct jb_model **out);

/**
 * Releases a handle from [`jb_model_load`]. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a live handle not used afterwards.
 */
void jb_model_free(struct jb_model *model);

/**
 * Encoder dimension and projected dimension of a model.
 *
 * # Safety
 * `model` must be a live handle; `embed_dim` and `proj_dim` valid for one write.
 */
enum jb_status jb_model_dims(const struct jb_model *model, size_t *embed_dim, size_t *proj_dim);

/**
 * Unit-norm title embedding. `*written` always receives the vector length,
 * so a call with `out_len = 0` reports the size needed.
 *
 * # Safety
 * `model` must be a live handle, `title` a NUL-terminated string, `out` valid
 * for `out_len` writes and `written` for one write.
 */
enum jb_status jb_model_embed_title(const struct jb_model *model,
                                    const char *title,
                                    enum jb_space space,
                                    double *out,
                                    size_t out_len,
                                    size_t *written);

/**
 * Unit-norm embedding of a set of skill labels (duplicates count once).
 *
 * # Safety
 * `model` must be a live handle, `labels` an array of `n_labels`
 * NUL-terminated strings, `out` valid for `out_len` writes and `written` for
 * one write.
 */
enum jb_status jb_model_embed_skill_set(const struct jb_model *model,
                                        const char *const *labels,
                                        size_t n_labels,
                                        double *out,
                                        size_t out_len,
                                        size_t *written);

/**
 * Scores a TREC run file against a qrels file. `depth = 0` means full depth.
 * On success `*out_json` receives the JSON report, to release with
 * [`jb_string_free`].
 *
 * # Safety
 * Paths must be NUL-terminated strings, `ks` an array of `n_ks` values and
 * `out_json` valid for one write.
 */
enum jb_status jb_evaluate_files(const char *run_path,
                                 const char *qrels_path,
                                 const size_t *ks,
                                 size_t n_ks,
                                 size_t depth,
                                 char **out_json);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string from this library not freed before.
 */
void jb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JOBBERT_H */
