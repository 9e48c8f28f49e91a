#ifndef ENMDAP_H
#define ENMDAP_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum EnmdapStatus {
  ENMDAP_STATUS_OK = 0,
  ENMDAP_STATUS_NULL_POINTER = 1,
  ENMDAP_STATUS_INVALID_ARGUMENT = 2,
  ENMDAP_STATUS_SHAPE = 3,
  ENMDAP_STATUS_LABEL = 4,
  ENMDAP_STATUS_FORMAT = 5,
  ENMDAP_STATUS_CONFIG = 6,
  ENMDAP_STATUS_IO = 7,
  ENMDAP_STATUS_NON_FINITE_LOSS = 8,
  ENMDAP_STATUS_UTF8 = 9,
  ENMDAP_STATUS_PANIC = 10,
} EnmdapStatus;

// A single domain of feature rows, optionally labeled.
typedef struct EnmdapDataset EnmdapDataset;

// An ordered list of domains; the last one is the target.
typedef struct EnmdapDatasetList EnmdapDatasetList;

// A trained or loaded ensemble model.
typedef struct EnmdapModel EnmdapModel;

// Parameters of the Gaussian multi-domain generator.
typedef struct EnmdapSyntheticSpec {
  size_t n_domains;
  size_t n_classes;
  size_t dim;
  size_t samples_per_class;
  double class_separation;
  double domain_shift_scale;
  double noise_sigma;
  uint64_t seed;
} EnmdapSyntheticSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on the same thread.
const char *enmdap_last_error(void);

// Library version as a static NUL-terminated string.
const char *enmdap_version(void);

// Loads a dataset CSV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum EnmdapStatus enmdap_dataset_load(const char *path, struct EnmdapDataset **out);

// # Safety
// `ds` must be null or a handle from this library that has not been freed.
void enmdap_dataset_free(struct EnmdapDataset *ds);

// Row count, feature width, class count and whether labels are present.
//
// # Safety
// `ds` must be a live dataset handle; each out pointer may be null to skip it.
enum EnmdapStatus enmdap_dataset_shape(const struct EnmdapDataset *ds,
                                       size_t *rows,
                                       size_t *dim,
                                       size_t *n_classes,
                                       bool *labeled);

// Generates Gaussian domains; the last one is the target.
//
// # Safety
// `spec` must point to a valid spec and `out` must be writable.
enum EnmdapStatus enmdap_dataset_list_generate(const struct EnmdapSyntheticSpec *spec,
                                               struct EnmdapDatasetList **out);

// Loads or generates the domains named by a config file.
//
// # Safety
// `config_path` must be a NUL-terminated string and `out` writable.
enum EnmdapStatus enmdap_dataset_list_from_config(const char *config_path,
                                                  struct EnmdapDatasetList **out);

// # Safety
// `list` must be a live list handle.
enum EnmdapStatus enmdap_dataset_list_len(const struct EnmdapDatasetList *list, size_t *out);

// Copies domain `index` into a new dataset handle.
//
// # Safety
// `list` must be a live list handle and `out` writable.
enum EnmdapStatus enmdap_dataset_list_get(const struct EnmdapDatasetList *list,
                                          size_t index,
                                          struct EnmdapDataset **out);

// # Safety
// `list` must be null or a handle from this library that has not been freed.
void enmdap_dataset_list_free(struct EnmdapDatasetList *list);

// Trains the variant described by a config file on `datasets` (the target,
// last, must carry evaluation labels) and returns the model and target
// accuracy.
//
// # Safety
// `config_path` must be a NUL-terminated string, `datasets` a live list
// handle, `out_model` writable; `out_accuracy` may be null.
enum EnmdapStatus enmdap_train(const char *config_path,
                               const struct EnmdapDatasetList *datasets,
                               uint64_t seed,
                               struct EnmdapModel **out_model,
                               double *out_accuracy);

// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum EnmdapStatus enmdap_model_load(const char *path, struct EnmdapModel **out);

// # Safety
// `model` must be a live model handle and `path` a NUL-terminated string.
enum EnmdapStatus enmdap_model_save(const struct EnmdapModel *model, const char *path);

// # Safety
// `model` must be null or a handle from this library that has not been freed.
void enmdap_model_free(struct EnmdapModel *model);

// Writes one predicted class per row of `ds` into `out_labels`, which must
// hold at least `capacity` entries; fails when `capacity` is below the row
// count.
//
// # Safety
// `model` and `ds` must be live handles; `out_labels` must be writable for
// `capacity` elements.
enum EnmdapStatus enmdap_model_predict(const struct EnmdapModel *model,
                                       const struct EnmdapDataset *ds,
                                       size_t *out_labels,
                                       size_t capacity);

// Accuracy of the model's final classifier on a labeled dataset.
//
// # Safety
// `model` and `ds` must be live handles and `out` writable.
enum EnmdapStatus enmdap_model_evaluate(const struct EnmdapModel *model,
                                        const struct EnmdapDataset *ds,
                                        double *out);

// Label-wise moment divergence of order `k` between two labeled datasets.
//
// # Safety
// `a` and `b` must be live handles and `out` writable.
enum EnmdapStatus enmdap_lm_divergence(const struct EnmdapDataset *a,
                                       const struct EnmdapDataset *b,
                                       uint32_t k,
                                       double *out);

// Finite-sample term of the target error bound for `n_sources` sources.
//
// # Safety
// `alpha` and `n_samples` must each point to `n_sources` readable elements
// and `out` must be writable.
enum EnmdapStatus enmdap_eta_term(const double *alpha,
                                  const size_t *n_samples,
                                  size_t n_sources,
                                  size_t vc_dim,
                                  double delta,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENMDAP_H */
