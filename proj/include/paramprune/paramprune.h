#ifndef PARAMPRUNE_H
#define PARAMPRUNE_H

/* C interface to the parameter-reduction toolkit: opaque handles, integer
 * status codes, thread-local error text. Strings returned through char**
 * are heap-allocated and released with pp_string_free. */

#include <stdint.h>

#ifndef PP_API
#define PP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pp_status {
  PP_OK = 0,
  PP_ERROR_CONFIG = 2,
  PP_ERROR_NUMERICAL = 3
} pp_status;

typedef struct pp_model pp_model;
typedef struct pp_trajectories pp_trajectories;
typedef struct pp_dataset pp_dataset;
typedef struct pp_problem pp_problem;
typedef struct pp_trace pp_trace;

/* Message of the calling thread's last failed call; "" when none. */
PP_API const char* pp_last_error(void);

/* Caps the worker pool; n <= 0 restores PARAMPRUNE_THREADS / hardware. */
PP_API void pp_set_threads(int n);

PP_API void pp_string_free(char* s);

/* ---- model ------------------------------------------------------------- */
/* id_or_path: "puma560", "hexaglide", or a model json file. */
PP_API pp_status pp_model_build(const char* id_or_path, pp_model** out);
PP_API pp_status pp_model_save(const pp_model* m, const char* path);
PP_API int pp_model_dof(const pp_model* m);
PP_API int pp_model_param_count(const pp_model* m);
PP_API const char* pp_model_param_label(const pp_model* m, int i);
PP_API void pp_model_free(pp_model* m);

/* ---- excitation -------------------------------------------------------- */
/* config_json: overrides on the model's default excitation; NULL or "" keeps
 * the defaults. */
PP_API pp_status pp_trajectories_optimize(const pp_model* m, const char* config_json,
                                          uint64_t seed, pp_trajectories** out);
PP_API pp_status pp_trajectories_random(const pp_model* m, const char* config_json,
                                        uint64_t seed, pp_trajectories** out);
PP_API pp_status pp_trajectories_save(const pp_trajectories* t, const char* path);
PP_API pp_status pp_trajectories_load(const char* path, pp_trajectories** out);
PP_API int pp_trajectories_count(const pp_trajectories* t);
PP_API void pp_trajectories_free(pp_trajectories* t);

/* ---- dataset ------------------------------------------------------------ */
PP_API pp_status pp_dataset_sample(const pp_model* m, const pp_trajectories* t,
                                   const char* config_json, pp_dataset** out);
PP_API pp_status pp_dataset_save(const pp_dataset* d, const char* path);
PP_API pp_status pp_dataset_load(const char* path, pp_dataset** out);
PP_API long pp_dataset_samples(const pp_dataset* d);
PP_API void pp_dataset_free(pp_dataset* d);

/* ---- regression problem ------------------------------------------------- */
PP_API pp_status pp_problem_assemble(const pp_model* m, const pp_dataset* d,
                                     pp_problem** out);
PP_API pp_status pp_problem_save(const pp_problem* p, const char* path);
PP_API pp_status pp_problem_load(const char* path, pp_problem** out);
PP_API int pp_problem_n_phi(const pp_problem* p);
PP_API int pp_problem_rank(const pp_problem* p, double rel_tol);
PP_API void pp_problem_free(pp_problem* p);

/* ---- reduction ----------------------------------------------------------- */
/* heuristic: "qr" | "fs" | "be" | "fs2". */
PP_API pp_status pp_reduce(const pp_problem* p, const char* heuristic, double tol,
                           pp_trace** out);
/* Fills the per-k validation errors by refitting on the given problem. */
PP_API pp_status pp_trace_validate(pp_trace* t, const pp_problem* val);
PP_API pp_status pp_trace_to_json(const pp_trace* t, const pp_problem* p,
                                  char** out_json);
PP_API pp_status pp_trace_from_json(const char* json, const pp_problem* p,
                                    pp_trace** out);
/* Same parse keyed on the model's parameter labels; no problem needed. */
PP_API pp_status pp_trace_parse(const char* json, const pp_model* m,
                                pp_trace** out);
PP_API int pp_trace_stop_k(const pp_trace* t);
PP_API int pp_trace_overshoot_k(const pp_trace* t);
/* eps at model size k (1-based); negative values signal a bad k. */
PP_API double pp_trace_eps_est(const pp_trace* t, int k);
PP_API double pp_trace_eps_val(const pp_trace* t, int k);
PP_API void pp_trace_free(pp_trace* t);

/* ---- operation counts ---------------------------------------------------- */
/* Op-count report for the trace's k-model: full and reduced counts plus
 * reduction ratios for the inverse-dynamics and [M|delta] dags; with
 * emit_source != 0 the reduced straight-line listings are included. */
PP_API pp_status pp_opcount_json(const pp_model* m, const pp_trace* t, int k,
                                 int emit_source, char** out_json);

/* ---- pipeline ------------------------------------------------------------ */
/* Full run from a pipeline config json; returns the report manifest json. */
PP_API pp_status pp_pipeline_run(const char* config_json, char** out_report_json);
/* Rebuilds report artifacts from saved intermediates (no optimization). */
PP_API pp_status pp_report_from_artifacts(const char* model_ref,
                                          const char* const* trace_paths, int n_traces,
                                          const char* data_est_csv,
                                          const char* data_val_csv, double rank_tol,
                                          int selected_k, int ddm_stride,
                                          const char* out_dir,
                                          char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* PARAMPRUNE_H */
