#ifndef TOUGHOPT_H
#define TOUGHOPT_H

/* C interface to the fracture-toughness simulation and optimization engine.
 * All entry points are non-throwing; failures return a status code and leave
 * a human-readable message in topt_last_error() (thread local). */

#ifdef __cplusplus
extern "C" {
#endif

#define TOPT_OK 0
#define TOPT_E_CONFIG 1     /* unreadable or malformed configuration */
#define TOPT_E_INFEASIBLE 2 /* design violates the clearance constraint */
#define TOPT_E_SOLVE 3      /* simulation or optimization failed */
#define TOPT_E_IO 4         /* artifact or input file I/O failure */
#define TOPT_E_RESUME 5     /* checkpoint missing or from another config */
#define TOPT_E_INVALID 6    /* invalid arguments */

typedef struct topt_config topt_config;

const char* topt_version(void);
const char* topt_last_error(void);

/* Configuration lifecycle. Keys are "section.key" strings. */
topt_config* topt_config_new(void);
topt_config* topt_config_load(const char* path);
void topt_config_free(topt_config* cfg);
int topt_config_set(topt_config* cfg, const char* assignment); /* key=value */
/* Returns the stored value or NULL; the pointer lives until the next call
 * on the same config. */
const char* topt_config_get(topt_config* cfg, const char* key);
unsigned long long topt_config_hash(const topt_config* cfg);

/* Design feasibility of the configured design vector: clearance is the
 * minimum hull-to-hull gap of the periodic pattern (negative when
 * penetrating); feasible compares it against the configured minimum gap.
 * Clearance returns NaN and feasible -1 on error. */
double topt_design_clearance(const topt_config* cfg);
int topt_design_feasible(const topt_config* cfg);

/* One surfing simulation at the configured design and crack offset.
 * Writes trace.csv, toughness.csv, layout.txt and summary.txt into out_dir
 * (plus fields_NNNN.vtk when dump_fields != 0). Infeasible designs produce
 * no artifacts. */
int topt_simulate(const topt_config* cfg, const char* out_dir, int dump_fields);

/* Grid sweep over one or two design parameters ([sweep] section), every
 * configured scenario; writes sweep.csv. Infeasible or failed points are
 * recorded per row, not fatal. */
int topt_sweep(const topt_config* cfg, const char* out_dir, int workers);

/* Worst-case Bayesian-optimization campaign over the configured bounds.
 * Writes checkpoint.txt per iteration, convergence.csv, best_design.txt and
 * the incumbent's per-scenario traces under best/. resume_path may be NULL
 * or a checkpoint written by the same configuration. */
int topt_optimize(const topt_config* cfg, const char* out_dir, int workers,
                  const char* resume_path);

/* Recompute the toughness of an existing trace.csv under the configured
 * smoothing window; writes toughness.csv into out_dir. */
int topt_report(const topt_config* cfg, const char* trace_csv,
                const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* TOUGHOPT_H */
