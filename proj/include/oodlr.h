/* C interface to the oodlr library. All handles are opaque; every call that
 * can fail returns an ood_status and leaves a message for ood_last_error().
 * Strings returned through char** are owned by the caller and released with
 * ood_string_free. */
#ifndef OODLR_H
#define OODLR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define OOD_API __declspec(dllexport)
#else
#define OOD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ood_status {
  OOD_OK = 0,
  OOD_ERR_INVALID_ARGUMENT = 1,
  OOD_ERR_DATA = 2,
  OOD_ERR_IO = 3,
  OOD_ERR_INTERNAL = 4
} ood_status;

typedef struct ood_dataset ood_dataset;
typedef struct ood_model ood_model;
typedef struct ood_proxy ood_proxy;

/* Message for the most recent failure on this thread; empty after success. */
OOD_API const char *ood_last_error(void);
OOD_API const char *ood_version(void);
OOD_API void ood_string_free(char *s);
OOD_API void ood_scores_free(double *scores);

/* Datasets */
OOD_API ood_status ood_dataset_from_array(const double *values, size_t n, size_t dim,
                                          const uint32_t *labels, ood_dataset **out);
OOD_API ood_status ood_dataset_load_csv(const char *path, ood_dataset **out);
OOD_API ood_status ood_dataset_save_csv(const ood_dataset *ds, const char *path);
/* spec: {"generator": name, "n": count, "seed": u64, ...generator fields}.
 * Generators: gaussian, random_walk, sticky, semantic_background,
 * labeled_clusters. resolved_json (optional) receives the spec with every
 * default filled in. */
OOD_API ood_status ood_dataset_generate(const char *spec_json, ood_dataset **out,
                                        char **resolved_json);
OOD_API size_t ood_dataset_size(const ood_dataset *ds);
OOD_API size_t ood_dataset_dim(const ood_dataset *ds);
OOD_API int ood_dataset_labeled(const ood_dataset *ds);
OOD_API ood_status ood_dataset_row(const ood_dataset *ds, size_t i, double *buf,
                                   size_t buf_len);
OOD_API void ood_dataset_free(ood_dataset *ds);

/* Density models. spec_json: {"kind": "diag_gaussian"|"gmm"|"histogram"|
 * "markov", ...}; missing fields take their defaults. */
OOD_API ood_status ood_model_fit(const char *spec_json, const ood_dataset *ds,
                                 uint64_t seed, ood_model **out);
OOD_API ood_status ood_model_from_json(const char *json, ood_model **out);
OOD_API ood_status ood_model_to_json(const ood_model *m, char **out);
OOD_API ood_status ood_model_load(const char *path, ood_model **out);
OOD_API ood_status ood_model_save(const ood_model *m, const char *path);
OOD_API ood_status ood_model_log_density(const ood_model *m, const double *x,
                                         size_t dim, double *out);
/* Hinge-loss outlier-exposure fine-tune. config_json may be NULL; fields:
 * margin, epochs, step, batch_size, seed, sigma_floor. report_json
 * (optional) receives margin, loss trace and step halvings. */
OOD_API ood_status ood_model_finetune(const ood_model *m, const ood_dataset *in_ds,
                                      const ood_dataset *aux_ds, const char *config_json,
                                      ood_model **out, char **report_json);
OOD_API void ood_model_free(ood_model *m);

/* Proxies. spec_json: {"kind": ..., ...}. Inputs by kind:
 *   constant       level
 *   auxiliary      data = auxiliary OOD samples; model spec, seed
 *   background     data = in-distribution samples; mu, model spec, seed
 *   complexity     bits, lo, hi (or data to take lo/hi from)
 *   local          model = fitted local model, or data + model spec
 *   label          data = labeled training set; in_model; epochs, step, seed
 *   classifier_lr  data = in samples, data2 = out samples; in_model;
 *                  epochs, step, seed
 * Unused inputs may be NULL. */
OOD_API ood_status ood_proxy_build(const char *spec_json, const ood_dataset *data,
                                   const ood_dataset *data2, const ood_model *model,
                                   ood_proxy **out);
OOD_API ood_status ood_proxy_from_json(const char *json, ood_proxy **out);
OOD_API ood_status ood_proxy_to_json(const ood_proxy *p, char **out);
OOD_API ood_status ood_proxy_load(const char *path, ood_proxy **out);
OOD_API ood_status ood_proxy_save(const ood_proxy *p, const char *path);
OOD_API ood_status ood_proxy_log_density(const ood_proxy *p, const double *x,
                                         size_t dim, double *out);
/* 1 if the proxy log-density is normalized; posteriors computed from an
 * unnormalized proxy have no absolute scale. */
OOD_API int ood_proxy_normalized(const ood_proxy *p);
OOD_API void ood_proxy_free(ood_proxy *p);

/* Scoring. scores must hold ood_dataset_size(ds) values. */
OOD_API ood_status ood_score_dataset(const ood_model *in_model, const ood_proxy *proxy,
                                     const ood_dataset *ds, double *scores, size_t len);
OOD_API ood_status ood_posterior(double score, double alpha, double *out);
OOD_API ood_status ood_calibrate_threshold(const double *in_scores, size_t n,
                                           double level, double *theta);
OOD_API ood_status ood_scores_save_csv(const char *path, const double *scores, size_t n,
                                       double theta);
/* *scores is released with ood_scores_free. */
OOD_API ood_status ood_scores_load_csv(const char *path, double **scores, size_t *n);
OOD_API ood_status ood_auroc(const double *ood_scores, size_t n_ood,
                             const double *in_scores, size_t n_in, double *out);
/* EvalReport JSON; roc_csv (optional) receives fpr,tpr rows. */
OOD_API ood_status ood_evaluate(const double *ood_scores, size_t n_ood,
                                const double *in_scores, size_t n_in, double level,
                                char **report_json, char **roc_csv);

/* Experiments. Names: gaussian_falsehood, soap_bubble, expectation_sweep,
 * np_optimality, classifier_lr, outlier_exposure. params_json may be NULL. */
OOD_API ood_status ood_run_experiment(const char *name, const char *params_json,
                                      char **report_json);
OOD_API ood_status ood_default_benchmark_config(uint64_t seed, char **out);
OOD_API ood_status ood_run_benchmark(const char *config_json, char **report_json,
                                     char **table_csv);

/* Utilities */
OOD_API ood_status ood_write_file_atomic(const char *path, const char *contents);
OOD_API ood_status ood_read_file(const char *path, char **out);

#ifdef __cplusplus
}
#endif

#endif
