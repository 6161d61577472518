#ifndef SPECSIDE_H
#define SPECSIDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpecStatus {
  SPEC_STATUS_OK = 0,
  SPEC_STATUS_NULL_POINTER = 1,
  SPEC_STATUS_PARAMETER = 2,
  SPEC_STATUS_PARSE = 3,
  SPEC_STATUS_IO = 4,
  SPEC_STATUS_NON_CONVERGENCE = 5,
  SPEC_STATUS_SAMPLING = 6,
  SPEC_STATUS_INVARIANT = 7,
  SPEC_STATUS_SIZE = 8,
  SPEC_STATUS_CONFIG = 9,
  SPEC_STATUS_DOMAIN = 10,
  SPEC_STATUS_UTF8 = 11,
  SPEC_STATUS_PANIC = 12,
} SpecStatus;

typedef enum SpecClassifier {
  SPEC_CLASSIFIER_LABELS_ONLY = 0,
  SPEC_CLASSIFIER_NAIVE_SPECTRAL = 1,
  SPEC_CLASSIFIER_MAJORITY = 2,
  SPEC_CLASSIFIER_MAJORITY_PP = 3,
  SPEC_CLASSIFIER_POLYTIME = 4,
  SPEC_CLASSIFIER_WALK = 5,
} SpecClassifier;

/**
 * A generated graph with its ground-truth clustering.
 */
typedef struct SpecInstance SpecInstance;

typedef struct SpecInstanceInfo {
  size_t n;
  size_t k;
  size_t d;
  double eps_measured;
  double phi_certified;
  double eta;
  /**
   * Number of middle vertices (uninformative construction only).
   */
  size_t middle;
} SpecInstanceInfo;

typedef struct SpecRefineSummary {
  size_t flagged;
  double objective;
  double certified_min_eig;
  double theta;
  size_t iterations;
  bool converged;
  double cross_edge_weight;
  size_t symmetric_difference;
} SpecRefineSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (nul
 * terminated, truncated to `len`). Returns the full message length
 * without the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t specside_last_error(char *buf, size_t len);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void specside_string_free(char *s);

/**
 * Generates a planted instance with `k` clusters of a `d`-regular graph.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum SpecStatus specside_generate_planted(size_t n,
                                          size_t k,
                                          size_t d,
                                          double eps,
                                          double eta,
                                          uint64_t seed,
                                          struct SpecInstance **out);

/**
 * Generates the two-cluster instance with uninformative middle vertices.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum SpecStatus specside_generate_uninformative_middle(size_t n,
                                                       size_t d,
                                                       double eps,
                                                       uint64_t seed,
                                                       struct SpecInstance **out);

/**
 * # Safety
 * `inst` must be null or a handle from this library, freed at most once.
 */
void specside_instance_free(struct SpecInstance *inst);

/**
 * # Safety
 * `inst` must be a live handle and `out` writable.
 */
enum SpecStatus specside_instance_info(const struct SpecInstance *inst,
                                       struct SpecInstanceInfo *out);

/**
 * Writes the ground-truth cluster ids into `out[0..len]`, `len == n`.
 *
 * # Safety
 * `inst` must be a live handle and `out` must hold `len` values.
 */
enum SpecStatus specside_instance_truth(const struct SpecInstance *inst, size_t *out, size_t len);

/**
 * Writes the instance graph in the text format to `path`.
 *
 * # Safety
 * `inst` must be a live handle and `path` a nul-terminated string.
 */
enum SpecStatus specside_instance_save_graph(const struct SpecInstance *inst, const char *path);

/**
 * Labels perturbed from the ground truth at rate `delta`.
 *
 * # Safety
 * `inst` must be a live handle and `out` must hold `len` values.
 */
enum SpecStatus specside_perturb_labels(const struct SpecInstance *inst,
                                        double delta,
                                        uint64_t seed,
                                        size_t *out,
                                        size_t len);

/**
 * Classifies every vertex of `inst` from the noisy labels `sigma` using
 * the exact inner-product oracle.
 *
 * # Safety
 * `inst` must be a live handle; `sigma` and `out` must hold `len` values.
 */
enum SpecStatus specside_classify(const struct SpecInstance *inst,
                                  enum SpecClassifier classifier,
                                  const size_t *sigma,
                                  double delta,
                                  uint64_t seed,
                                  size_t *out,
                                  size_t len);

/**
 * Fraction of `labels` differing from the ground truth, optionally after
 * the best relabeling.
 *
 * # Safety
 * `inst` must be a live handle, `labels` must hold `len` values and
 * `out` must be writable.
 */
enum SpecStatus specside_misclassification(const struct SpecInstance *inst,
                                           const size_t *labels,
                                           size_t len,
                                           bool matched,
                                           double *out);

/**
 * Reweights the edges flagged by `alpha` and repairs its partition.
 * Refined labels go to `out_labels`; `summary` receives the solver report
 * scored against the ground truth.
 *
 * # Safety
 * `inst` must be a live handle; `alpha` and `out_labels` must hold `len`
 * values; `summary` must be writable.
 */
enum SpecStatus specside_refine(const struct SpecInstance *inst,
                                const size_t *alpha,
                                size_t len,
                                size_t max_iter,
                                size_t *out_labels,
                                struct SpecRefineSummary *summary);

/**
 * Runs a sweep from a JSON config and returns the CSV text in `out_csv`
 * (release with [`specside_string_free`]). Setting warnings are returned
 * one per line in `out_warnings` when it is not null.
 *
 * # Safety
 * `config_json` must be a nul-terminated string; `out_csv` writable;
 * `out_warnings` null or writable.
 */
enum SpecStatus specside_sweep(const char *config_json, char **out_csv, char **out_warnings);

/**
 * Library version as a static nul-terminated string.
 */
const char *specside_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECSIDE_H */
