/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef VSEARCH_H
#define VSEARCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum VsStatus {
  VS_STATUS_OK = 0,
  // A required pointer was null.
  VS_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  VS_STATUS_INVALID_UTF8 = 2,
  // The request or data was rejected.
  VS_STATUS_INVALID_INPUT = 3,
  // The model behind the request is not loaded.
  VS_STATUS_UNAVAILABLE = 4,
  // A referenced document does not exist.
  VS_STATUS_NOT_FOUND = 5,
  // The embedding store was built from a different ranker.
  VS_STATUS_STALE_STORE = 6,
  VS_STATUS_IO = 7,
  // A file or JSON payload could not be parsed.
  VS_STATUS_FORMAT = 8,
  VS_STATUS_INTERNAL = 9,
  // The library panicked; the engine should be discarded.
  VS_STATUS_PANIC = 10,
} VsStatus;

// Opaque engine handle.
typedef struct VsEngine VsEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads the engine described by a configuration file.
//
// # Safety
// `config_path` must be a NUL-terminated string and `out` a valid pointer
// to writable storage for one handle.
enum VsStatus vs_engine_open(const char *config_path, struct VsEngine **out);

// Releases an engine. Null is ignored.
//
// # Safety
// `engine` must come from [`vs_engine_open`] and not be used afterwards.
void vs_engine_free(struct VsEngine *engine);

// Runs one JSON request such as
// `{"endpoint":"autocomplete","prefix":"da"}` and returns the JSON
// response the HTTP API would send.
//
// # Safety
// `engine` must be a live handle, `request_json` a NUL-terminated string
// and `response_json` a valid pointer to writable storage.
enum VsStatus vs_engine_handle(const struct VsEngine *engine,
                               const char *request_json,
                               char **response_json);

// Model availability as a JSON object of booleans.
//
// # Safety
// As for [`vs_engine_handle`].
enum VsStatus vs_engine_health(const struct VsEngine *engine, char **health_json);

// NDCG@10 of relevance grades listed in ranked order.
//
// # Safety
// `grades` must point to `len` readable bytes (or be null with `len == 0`)
// and `out` to a writable double.
enum VsStatus vs_ndcg_at_10(const uint8_t *grades, size_t len, double *out);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void vs_string_free(char *s);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *vs_last_error(void);

// Library version, a static string.
const char *vs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VSEARCH_H */
