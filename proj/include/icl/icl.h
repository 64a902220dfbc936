#ifndef ICL_H
#define ICL_H

/* In-context linear-regression lab: C surface over the C++ core.
 *
 * All inputs and outputs are JSON or CSV text. Functions return a status
 * code; on failure icl_last_error() (or icl_runner_error for runner calls)
 * describes what went wrong. Strings returned through char** are owned by
 * the caller and must be released with icl_string_free.
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

enum icl_status {
  ICL_OK = 0,
  ICL_ERR_PARSE = 2,        /* malformed JSON */
  ICL_ERR_INVALID = 3,      /* well-formed input violating a precondition */
  ICL_ERR_CHECK_FAILED = 4, /* run finished but an asserted bound failed */
  ICL_ERR_RUNTIME = 5       /* anything else */
};

typedef struct icl_runner icl_runner;

/* Parses and validates an experiment config; does not run it. */
int icl_runner_create(const char* config_json, icl_runner** out);

/* Executes the configured experiment, writing artifacts if the config names
 * an output directory. Returns ICL_ERR_CHECK_FAILED when the experiment's
 * built-in assertions do not hold. */
int icl_runner_run(icl_runner* runner);

/* JSON summary of the last run; valid until the runner is destroyed. */
const char* icl_runner_summary(const icl_runner* runner);

const char* icl_runner_error(const icl_runner* runner);

void icl_runner_destroy(icl_runner* runner);

/* Single-layer optimum for a covariance spec; returns {"b","A","s"}. */
int icl_closed_form_json(const char* spec_json, int n, char** out_json);

/* Extracts one layer's A (or Q for the full variant) from a weights dump as a
 * CSV grid; whitened != 0 conjugates by SigmaHalf from the embedded spec. */
int icl_heatmap_csv(const char* weights_json, int layer, int whitened,
                    char** out_csv);

/* Runs the exact-identity suite for the given seed; out_json reports each
 * check. Returns ICL_ERR_CHECK_FAILED if any bound fails. */
int icl_verify_json(unsigned long long seed, char** out_json);

void icl_set_threads(int n);

const char* icl_last_error(void);

void icl_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* ICL_H */
