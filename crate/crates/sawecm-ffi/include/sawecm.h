/* C interface of the sawecm cubature library.
 *
 * Shared-point cubature rules with per-subspace nonnegative weights: build a
 * family of integrand sample matrices over a common set of integration
 * points, then solve with the greedy route (sequential empirical cubature) or
 * the l1/linear-programming route. All handles are opaque; every fallible
 * call returns a status code and leaves a human-readable message retrievable
 * with sawecm_last_error_message() on the calling thread.
 *
 * Indices returned through this interface are 1-based, matching the rule-file
 * format of the accompanying CLI.
 */

#ifndef SAWECM_H
#define SAWECM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct sawecm_family sawecm_family;
typedef struct sawecm_rule sawecm_rule;

typedef enum sawecm_status {
  SAWECM_OK = 0,
  /* Null pointer, non-finite data, or otherwise unusable argument. */
  SAWECM_INVALID_ARGUMENT = 1,
  /* Dimension mismatch between family members or query buffers. */
  SAWECM_SHAPE_MISMATCH = 2,
  /* The greedy selection exhausted its candidate pool. */
  SAWECM_NO_CONVERGENCE = 3,
  /* The LP solve ended infeasible, unbounded, or at its pivot limit. */
  SAWECM_LP_NOT_OPTIMAL = 4,
  SAWECM_INTERNAL = 5
} sawecm_status;

typedef enum sawecm_augment {
  /* Append the constant column only when the integral vector vanishes. */
  SAWECM_AUGMENT_AUTO = 0,
  SAWECM_AUGMENT_ALWAYS = 1,
  SAWECM_AUGMENT_NEVER = 2
} sawecm_augment;

typedef struct sawecm_options {
  /* SVD truncation tolerance in [0, 1]; 0 keeps everything above round-off. */
  double svd_tolerance;
  /* Nonzero: visit subspaces in a seeded random order instead of 1..k. */
  int32_t random_ordering;
  uint64_t ordering_seed;
  /* Ineffective iterations tolerated before the candidate set is enlarged. */
  size_t failure_threshold;
  /* Candidate rows with norm at or below this floor are skipped. */
  double low_norm_floor;
  /* One of sawecm_augment. */
  int32_t augment;
  /* LP route only: support threshold and pivot rule (nonzero = Dantzig). */
  double zero_floor;
  int32_t dantzig_pivot;
} sawecm_options;

/* Fills the defaults: svd_tolerance 0, natural ordering, threshold 10,
 * low-norm floor 1e-6, auto augmentation, zero floor 1e-10, Bland pivoting. */
void sawecm_options_default(sawecm_options *options);

/* Creates an empty family over `point_count` integration points with the
 * given strictly positive full-order weights. */
sawecm_status sawecm_family_new(size_t point_count, const double *weights,
                                sawecm_family **out_family);

/* Appends one subspace: `values` holds a point_count x column_count sample
 * matrix in column-major order. */
sawecm_status sawecm_family_add_subspace(sawecm_family *family,
                                         size_t column_count,
                                         const double *values);

size_t sawecm_family_point_count(const sawecm_family *family);
size_t sawecm_family_subspace_count(const sawecm_family *family);

void sawecm_family_free(sawecm_family *family);

/* Greedy route: sequential empirical cubature over the family. */
sawecm_status sawecm_solve_greedy(const sawecm_family *family,
                                  const sawecm_options *options,
                                  sawecm_rule **out_rule);

/* l1 route: block-diagonal standard-form LP solved by revised simplex. */
sawecm_status sawecm_solve_lp(const sawecm_family *family,
                              const sawecm_options *options,
                              sawecm_rule **out_rule);

/* Number of shared integration points card(E). */
size_t sawecm_rule_point_count(const sawecm_rule *rule);
size_t sawecm_rule_subspace_count(const sawecm_rule *rule);

/* Copies the 1-based shared point indices into `out` (capacity `len`, must
 * be at least card(E)). */
sawecm_status sawecm_rule_indices(const sawecm_rule *rule, size_t *out,
                                  size_t len);

/* Copies the weight vector of one subspace (0-based) into `out` (capacity
 * `len`, at least card(E)); inactive positions are exactly zero. */
sawecm_status sawecm_rule_weights(const sawecm_rule *rule, size_t subspace,
                                  double *out, size_t len);

/* Largest per-subspace relative integration residual of the rule against the
 * family it was built from. */
sawecm_status sawecm_rule_max_residual(const sawecm_rule *rule,
                                       const sawecm_family *family,
                                       double *out_residual);

void sawecm_rule_free(sawecm_rule *rule);

/* Message describing the most recent failure on this thread; empty string if
 * none. The pointer stays valid until the next failing call on the thread. */
const char *sawecm_last_error_message(void);

#ifdef __cplusplus
}
#endif

#endif /* SAWECM_H */
