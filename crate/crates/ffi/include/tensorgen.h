#ifndef TENSORGEN_H
#define TENSORGEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum TgStatus {
  TG_STATUS_OK = 0,
  TG_STATUS_NULL_POINTER = 1,
  TG_STATUS_INVALID_ARGUMENT = 2,
  TG_STATUS_IO = 3,
  TG_STATUS_PARSE = 4,
  TG_STATUS_DIMENSION_MISMATCH = 5,
  TG_STATUS_RANK_DEFICIENT = 6,
  TG_STATUS_NUMERICAL = 7,
  TG_STATUS_PANIC = 8,
} TgStatus;

// Independent-features baseline.
typedef struct TgBaseline TgBaseline;

// Binary data matrix with named features.
typedef struct TgDataset TgDataset;

// Naive Bayes mixture model.
typedef struct TgModel TgModel;

// Result of the classifier two-sample test. The positive class is the
// synthetic sample.
typedef struct TgEvalReport {
  double accuracy;
  double recall;
  double precision;
  double specificity;
  double mmd;
} TgEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *tg_last_error_message(void);

// Reads a headered 0/1 CSV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum TgStatus tg_dataset_load_csv(const char *path, struct TgDataset **out);

// Builds a dataset from a row-major `rows` x `cols` array of 0/1 bytes.
// Features are named `f0`, `f1`, ... Any other byte value is rejected.
//
// # Safety
// `values` must point to `rows * cols` readable bytes.
enum TgStatus tg_dataset_from_rows(const uint8_t *values,
                                   size_t rows,
                                   size_t cols,
                                   struct TgDataset **out);

// # Safety
// `data` must be a live dataset handle and `path` a NUL-terminated string.
enum TgStatus tg_dataset_save_csv(const struct TgDataset *data, const char *path);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live dataset handle.
size_t tg_dataset_rows(const struct TgDataset *data);

// Number of features, or 0 for a null handle.
//
// # Safety
// `data` must be null or a live dataset handle.
size_t tg_dataset_cols(const struct TgDataset *data);

// # Safety
// `data` must be null or a handle not yet freed.
void tg_dataset_free(struct TgDataset *data);

// Fits a `k`-component mixture: spectral initialisation then EM, with
// default options.
//
// # Safety
// `data` must be a live dataset handle and `out` a writable pointer.
enum TgStatus tg_model_fit(const struct TgDataset *data,
                           size_t k,
                           uint64_t seed,
                           struct TgModel **out);

// Reads a mixture `.nbm` file. Baseline files are rejected.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum TgStatus tg_model_load(const char *path, struct TgModel **out);

// # Safety
// `model` must be a live model handle and `path` a NUL-terminated string.
enum TgStatus tg_model_save(const struct TgModel *model, const char *path);

// Number of components, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t tg_model_k(const struct TgModel *model);

// Number of features, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t tg_model_d(const struct TgModel *model);

// Copies the `k` mixing weights into `out`; `len` must equal `k`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum TgStatus tg_model_weights(const struct TgModel *model, double *out, size_t len);

// Copies the `d` x `k` conditional probabilities into `out`, row-major
// (feature by feature); `len` must equal `d * k`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum TgStatus tg_model_cond_probs(const struct TgModel *model, double *out, size_t len);

// Draws `m` rows. The output depends only on the model, `m` and `seed`.
//
// # Safety
// `model` must be a live model handle and `out` a writable pointer.
enum TgStatus tg_model_sample(const struct TgModel *model,
                              size_t m,
                              uint64_t seed,
                              struct TgDataset **out);

// Total log-likelihood of `data` under `model`.
//
// # Safety
// Both handles must be live and `out` writable.
enum TgStatus tg_model_log_likelihood(const struct TgModel *model,
                                      const struct TgDataset *data,
                                      double *out);

// # Safety
// `model` must be null or a handle not yet freed.
void tg_model_free(struct TgModel *model);

// Fits the independent-features baseline (column frequencies).
//
// # Safety
// `data` must be a live dataset handle and `out` a writable pointer.
enum TgStatus tg_baseline_fit(const struct TgDataset *data, struct TgBaseline **out);

// # Safety
// `baseline` must be a live handle and `out` a writable pointer.
enum TgStatus tg_baseline_sample(const struct TgBaseline *baseline,
                                 size_t m,
                                 uint64_t seed,
                                 struct TgDataset **out);

// # Safety
// `baseline` must be null or a handle not yet freed.
void tg_baseline_free(struct TgBaseline *baseline);

// Classifier two-sample test with the default 200-tree forest and a 0.3
// test fraction. The positive class is `synth`.
//
// # Safety
// Both handles must be live and `out` writable.
enum TgStatus tg_evaluate(const struct TgDataset *real,
                          const struct TgDataset *synth,
                          uint64_t seed,
                          struct TgEvalReport *out);

// Unbiased squared MMD with a Gaussian kernel. A `bandwidth` of zero or
// less selects the median heuristic.
//
// # Safety
// Both handles must be live and `out` writable.
enum TgStatus tg_mmd_unbiased(const struct TgDataset *a,
                              const struct TgDataset *b,
                              double bandwidth,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TENSORGEN_H */
