#ifndef CONTACT_COMPLEXITY_H
#define CONTACT_COMPLEXITY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Routing outcome of one contact.
typedef enum CcDecision {
  CC_DECISION_JUNIOR = 0,
  CC_DECISION_SENIOR = 1,
  CC_DECISION_PRODUCT_BASED = 2,
} CcDecision;

// Result of every fallible call.
typedef enum CcStatus {
  CC_STATUS_OK = 0,
  CC_STATUS_NULL_POINTER = 1,
  CC_STATUS_INVALID_UTF8 = 2,
  // Malformed transcript JSON, queue map or argument values.
  CC_STATUS_INVALID_INPUT = 3,
  // Model file missing fields, corrupted or of another version.
  CC_STATUS_MODEL = 4,
  // Distribution arguments outside the probability simplex.
  CC_STATUS_DOMAIN = 5,
  CC_STATUS_IO = 6,
  CC_STATUS_BUFFER_TOO_SMALL = 7,
  CC_STATUS_PANIC = 8,
} CcStatus;

// Opaque model handle.
typedef struct CcModel CcModel;

// Hypotheses and scores of one contact.
typedef struct CcScore {
  uint64_t length;
  double entropy;
  double skillfulness;
  double length_n;
  double entropy_n;
  double skillfulness_n;
  double c;
  double q;
} CcScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or null.
// The pointer stays valid until the next library call on the same thread.
const char *cc_last_error(void);

// Loads a model file. On success `*out` receives a handle owned by the caller.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CcStatus cc_model_load(const char *path, struct CcModel **out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must come from `cc_model_load` and not have been freed.
void cc_model_free(struct CcModel *model);

// Number of boosting rounds, i.e. the length of a boosting trace; 0 for null.
//
// # Safety
// `model` must be null or a live handle.
size_t cc_model_num_rounds(const struct CcModel *model);

// Number of SIC classes; 0 for null.
//
// # Safety
// `model` must be null or a live handle.
size_t cc_model_num_classes(const struct CcModel *model);

// Scores one transcript given as a JSON object in the corpus line format.
//
// # Safety
// `model` must be a live handle, `transcript_json` NUL-terminated and `out` valid.
enum CcStatus cc_model_score(const struct CcModel *model,
                             const char *transcript_json,
                             struct CcScore *out);

// Writes the boosting function `phi(1..M)` of a transcript into `phi`.
// `*len` receives `M`; when `capacity < M` nothing is written and
// `CC_STATUS_BUFFER_TOO_SMALL` is returned.
//
// # Safety
// `phi` must point to `capacity` writable doubles; other pointers as above.
enum CcStatus cc_model_trace(const struct CcModel *model,
                             const char *transcript_json,
                             double *phi,
                             size_t capacity,
                             size_t *len);

// Routes one transcript. `queue_map_csv` (`sic,queue` with header) may be
// null. For product-based decisions `*queue` receives the queue name, to be
// released with `cc_string_free`; otherwise it is set to null. `q` may be null.
//
// # Safety
// String arguments must be NUL-terminated; out pointers valid or, for `q`, null.
enum CcStatus cc_model_route(const struct CcModel *model,
                             const char *transcript_json,
                             double t_lo,
                             double t_hi,
                             const char *queue_map_csv,
                             const char *default_queue,
                             enum CcDecision *decision,
                             char **queue,
                             double *q);

// Shannon entropy in nats of a distribution of `n` entries.
//
// # Safety
// `p` must point to `n` readable doubles; `out` must be valid.
enum CcStatus cc_entropy(const double *p, size_t n, double *out);

// KL divergence `D(p || q)` in nats of two distributions of `n` entries.
//
// # Safety
// `p` and `q` must point to `n` readable doubles; `out` must be valid.
enum CcStatus cc_kl_divergence(const double *p, const double *q, size_t n, double *out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void cc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONTACT_COMPLEXITY_H */
