#pragma once

/* Generated with cbindgen:0.26.0 */

/* Generated by cbindgen from sentiscore-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every FFI entry point.
typedef enum SentiscoreStatus {
  // The call succeeded.
  SENTISCORE_STATUS_OK = 0,
  // A required pointer argument was null.
  SENTISCORE_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  SENTISCORE_STATUS_INVALID_UTF8 = 2,
  // A file could not be read or written.
  SENTISCORE_STATUS_IO_ERROR = 3,
  // A file exists but its contents could not be understood.
  SENTISCORE_STATUS_PARSE_ERROR = 4,
  // Model pieces disagree about their dimensions.
  SENTISCORE_STATUS_DIMENSION_MISMATCH = 5,
  // An argument was structurally valid but unusable (for example, a
  // text that cleans to nothing).
  SENTISCORE_STATUS_INVALID_ARGUMENT = 6,
  // An internal numeric failure.
  SENTISCORE_STATUS_INTERNAL_ERROR = 7,
  // A panic was caught at the boundary; the handle is still valid.
  SENTISCORE_STATUS_PANIC = 8,
} SentiscoreStatus;

// A loaded scoring model. Opaque: create with [`sentiscore_model_open`],
// release with [`sentiscore_model_free`].
typedef struct SentiscoreModel SentiscoreModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a trained model.
//
// `checkpoint_path` and `vocab_path` are required; `dictionary_path` and
// `stoplist_path` may be null to run without them. On success writes a
// handle to `out_model`; the caller owns it and must release it with
// [`sentiscore_model_free`]. On failure `*out_model` is set to null.
//
// # Safety
// Path arguments must be null or NUL-terminated strings. `out_model`
// must point to writable memory for one pointer.
enum SentiscoreStatus sentiscore_model_open(const char *checkpoint_path,
                                            const char *vocab_path,
                                            const char *dictionary_path,
                                            const char *stoplist_path,
                                            struct SentiscoreModel **out_model);

// Scores one UTF-8 text on the 0–5 rating scale.
//
// # Safety
// `model` must be a live handle from [`sentiscore_model_open`].
// `text_utf8` must be a NUL-terminated string. `out_score` must point to
// writable memory for one double.
enum SentiscoreStatus sentiscore_score(const struct SentiscoreModel *model,
                                       const char *text_utf8,
                                       double *out_score);

// Releases a model handle. Null is accepted and ignored. Passing the
// same non-null handle twice is undefined behavior.
//
// # Safety
// `model` must be null or a handle from [`sentiscore_model_open`] that
// has not been freed.
void sentiscore_model_free(struct SentiscoreModel *model);

// Copies the calling thread's most recent error message into `buffer`
// (NUL-terminated, truncated to `capacity`). Returns the full message
// length in bytes excluding the NUL, so calling with a null buffer or
// zero capacity sizes a follow-up call.
//
// # Safety
// `buffer` must be null or point to `capacity` writable bytes.
size_t sentiscore_last_error_message(char *buffer, size_t capacity);

// The library version as a static NUL-terminated string.
const char *sentiscore_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus
