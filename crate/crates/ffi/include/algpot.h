#ifndef ALGPOT_H
#define ALGPOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AlgpotStatus {
  ALGPOT_STATUS_OK = 0,
  ALGPOT_STATUS_NULL_POINTER = 1,
  ALGPOT_STATUS_INVALID_UTF8 = 2,
  ALGPOT_STATUS_PARSE = 3,
  ALGPOT_STATUS_INVALID_ARGUMENT = 4,
  ALGPOT_STATUS_COMPUTATION = 5,
  ALGPOT_STATUS_PANIC = 6,
} AlgpotStatus;

/**
 * A parsed problem. Opaque to C.
 */
typedef struct AlgpotProblem AlgpotProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *algpot_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The returned
 * string is owned by the caller.
 */
char *algpot_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void algpot_string_free(char *s);

/**
 * Parses a problem file's text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum AlgpotStatus algpot_problem_parse(const char *text, struct AlgpotProblem **out);

/**
 * Builds the n-body problem. `masses` is a comma-separated list, or NULL
 * for equal unit masses.
 *
 * # Safety
 * `masses` must be NULL or NUL-terminated; `out` must be writable.
 */
enum AlgpotStatus algpot_problem_nbody(uintptr_t n,
                                       uintptr_t dim,
                                       const char *masses,
                                       struct AlgpotProblem **out);

/**
 * # Safety
 * `problem` must be NULL or a handle from this library, not yet freed.
 */
void algpot_problem_free(struct AlgpotProblem *problem);

/**
 * Number of position and extension variables.
 *
 * # Safety
 * `problem` must be a live handle; `n_out` and `s_out` may be NULL.
 */
enum AlgpotStatus algpot_problem_dimensions(const struct AlgpotProblem *problem,
                                            uintptr_t *n_out,
                                            uintptr_t *s_out);

/**
 * The problem in problem-file syntax. Caller frees the string.
 *
 * # Safety
 * `problem` must be a live handle.
 */
char *algpot_problem_text(const struct AlgpotProblem *problem);

/**
 * Runs the full pipeline. `json_out` receives the report (caller frees)
 * and `exit_code_out` the CLI exit code: 0, or 10 for an obstruction.
 *
 * # Safety
 * `problem` must be a live handle; the output pointers must be writable
 * or NULL.
 */
enum AlgpotStatus algpot_analyze(const struct AlgpotProblem *problem,
                                 uint64_t seed,
                                 uintptr_t random_starts,
                                 char **json_out,
                                 int32_t *exit_code_out);

/**
 * Exact table check of `(k, lambda)` with `lambda` a rational such as
 * `"-1/2"`. `matched_out` receives 1 when the pair is admissible.
 *
 * # Safety
 * `lambda` must be NUL-terminated; the output pointers must be writable
 * or NULL.
 */
enum AlgpotStatus algpot_check_pair(int64_t k,
                                    const char *lambda,
                                    int32_t *matched_out,
                                    char **json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALGPOT_H */
