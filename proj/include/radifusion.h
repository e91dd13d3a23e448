#ifndef RADIFUSION_H
#define RADIFUSION_H

/*
 * C interface to the longitudinal mammography risk library. Every entry
 * point returns a status code; on failure the thread-local message from
 * radif_last_error() says what went wrong. Strings handed back through
 * char** out-parameters are heap copies the caller releases with
 * radif_free(). Commands are driven by a JSON configuration using the
 * exact key set of radif_default_config(); unknown keys are rejected.
 */

#ifndef RADIF_API
#define RADIF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* status codes; they double as process exit codes in the CLI */
#define RADIF_OK 0
#define RADIF_EINVAL 1   /* bad argument or configuration */
#define RADIF_ERUNTIME 2 /* I/O failure or internal error */

RADIF_API const char* radif_version(void);

/* message for the most recent failing call on this thread; empty after a
 * success, stays valid until the next library call from the same thread */
RADIF_API const char* radif_last_error(void);

/* releases any string returned through a char** out-parameter */
RADIF_API void radif_free(char* text);

/* ------------------------------------------------------------- config */

/* JSON object naming every configuration field with its default value */
RADIF_API char* radif_default_config(void);

/* applies overlay_json on top of base_json (both JSON objects; the overlay
 * may name any subset of the keys) and returns the merged configuration */
RADIF_API int radif_merge_config(const char* base_json, const char* overlay_json, char** merged_out);

/* ----------------------------------------------------------- commands */
/* Each command validates its configuration, runs, writes its artifacts
 * under the configured out_dir (together with a resolved_config.json
 * snapshot that replays the run exactly), and returns a human-readable
 * summary. radif_eval returns the evaluation report as JSON. */

RADIF_API int radif_gen_synthetic(const char* config_json, char** summary_out);
RADIF_API int radif_preprocess(const char* config_json, char** summary_out);
RADIF_API int radif_extract_features(const char* config_json, char** summary_out);
RADIF_API int radif_train(const char* config_json, char** summary_out);
RADIF_API int radif_finetune_baf(const char* config_json, char** summary_out);
RADIF_API int radif_eval(const char* config_json, char** report_json_out);
RADIF_API int radif_bench_attention(const char* config_json, char** table_out);
RADIF_API int radif_export_attention(const char* config_json, char** summary_out);
RADIF_API int radif_describe(const char* config_json, char** text_out);

/* runs the finite-difference audit of every differentiable op; *all_ok_out
 * is 1 when the worst relative error stays under the shipping bound */
RADIF_API int radif_grad_check(const char* config_json, char** report_out, int* all_ok_out);

/* ------------------------------------------------- feature vocabulary */

RADIF_API int radif_feature_count(void);
RADIF_API int radif_feature_name(int index, char** name_out);

/* ----------------------------------------------------------- handles */

typedef struct radif_model radif_model;
typedef struct radif_dataset radif_dataset;

RADIF_API int radif_model_open(const char* model_dir, radif_model** out);
RADIF_API void radif_model_close(radif_model* model);

/* loads preprocessed videos joined with the extracted feature table */
RADIF_API int radif_dataset_open(const char* preprocessed_index, const char* features_csv,
                                 radif_dataset** out);
RADIF_API void radif_dataset_close(radif_dataset* dataset);
RADIF_API int radif_dataset_size(const radif_dataset* dataset, int* n_out);
RADIF_API int radif_dataset_id(const radif_dataset* dataset, int index, char** id_out);

/* scores one patient: fused malignancy probability, bilateral asymmetry
 * gamma in [0, 2], and the per-view probabilities ordered LCC, RCC,
 * LMLO, RMLO; any output pointer may be null when not wanted */
RADIF_API int radif_predict(const radif_model* model, const radif_dataset* dataset,
                            const char* patient_id, double* fused_out, double* gamma_out,
                            double view_probs_out[4]);

#ifdef __cplusplus
}
#endif

#endif /* RADIFUSION_H */
