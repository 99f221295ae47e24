#ifndef FEDSIM_H
#define FEDSIM_H

/* C API for the federated-learning simulator. All entry points return
 * FEDSIM_OK, FEDSIM_ERR_RUNTIME or FEDSIM_ERR_VALIDATION; on failure
 * fedsim_last_error() describes the problem (thread-local storage). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define FEDSIM_OK 0
#define FEDSIM_ERR_RUNTIME 1
#define FEDSIM_ERR_VALIDATION 2

typedef struct fedsim_config fedsim_config; /* opaque */

/* Parses an experiment config from text or file. On success *out owns a new
 * handle; release it with fedsim_config_free. */
int fedsim_config_parse(const char* text, fedsim_config** out);
int fedsim_config_load(const char* path, fedsim_config** out);
void fedsim_config_free(fedsim_config* cfg);

/* Reseeds every random concern from one base value: data=seed, model=seed+1,
 * selection=seed+2, latency=seed+3. */
int fedsim_config_set_seed(fedsim_config* cfg, uint64_t seed);
int fedsim_config_set_output_dir(fedsim_config* cfg, const char* dir);

/* Runs the experiment and writes metrics.csv, final_params.bin,
 * manifest.json and (unless disabled) events.tsv to the output directory. */
int fedsim_run(const fedsim_config* cfg);

/* Runs every cell of the grid file against the base config; artifacts land
 * in per-cell subdirectories of the output directory. *summary_out receives
 * a malloc'd summary table; free it with fedsim_string_free. */
int fedsim_run_grid(const fedsim_config* cfg, const char* grid_path, char** summary_out);

/* Per-client distribution report for one class on one sensor group. */
int fedsim_skew_report(const fedsim_config* cfg, const char* class_name, const char* sensor,
                       char** report_out);

/* Message of the most recent failure on this thread; empty string if none.
 * Valid until the next failing call. */
const char* fedsim_last_error(void);

void fedsim_string_free(char* s);

const char* fedsim_version(void);

#ifdef __cplusplus
}
#endif

#endif /* FEDSIM_H */
