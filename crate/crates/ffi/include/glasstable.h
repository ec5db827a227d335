#ifndef GLASSTABLE_H
#define GLASSTABLE_H

/* Generated by cbindgen from the glasstable-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Action classes for normalization calls.
typedef enum GtActionKind {
  GT_ACTION_KIND_FOLD = 0,
  GT_ACTION_KIND_CHECK = 1,
  GT_ACTION_KIND_CALL = 2,
  GT_ACTION_KIND_RAISE = 3,
} GtActionKind;

// Status codes shared by every function in this library.
typedef enum GtStatus {
  GT_STATUS_OK = 0,
  // A required pointer argument was null.
  GT_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  GT_STATUS_INVALID_UTF8 = 2,
  // Card text did not parse or contained duplicates.
  GT_STATUS_BAD_CARDS = 3,
  // Numeric or size constraints violated.
  GT_STATUS_BAD_INPUT = 4,
  // The quantity is mathematically undefined on this input.
  GT_STATUS_UNDEFINED = 5,
} GtStatus;

// Trait dimensions, in the fixed ontology order.
typedef enum GtTraitDim {
  GT_TRAIT_DIM_RISK_TOLERANCE = 0,
  GT_TRAIT_DIM_AGGRESSIVENESS = 1,
  GT_TRAIT_DIM_BLUFF_FREQUENCY = 2,
  GT_TRAIT_DIM_CALLING_STATION_TENDENCY = 3,
  GT_TRAIT_DIM_SHOWDOWN_PROPENSITY = 4,
} GtTraitDim;

// Opaque opponent profile handle.
typedef struct GtProfile GtProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Logit-space belief intervention: sigma(logit(p) + delta) for up,
// sigma(logit(p) - delta) for down. `p` is clamped away from 0 and 1
// before the logit, matching the core implementation.
//
// # Safety
// `out` must be a valid pointer to a double.
enum GtStatus gt_intervene(double p, double delta, bool up, double *out);

// Allocates a profile with every trait at the 0.5 prior. Free with
// `gt_profile_free`.
//
// # Safety
// `opponent_id` must be a valid NUL-terminated string.
struct GtProfile *gt_profile_new(const char *opponent_id);

// Releases a profile handle. Null is a no-op.
//
// # Safety
// `profile` must be a pointer returned by `gt_profile_new`, or null.
void gt_profile_free(struct GtProfile *profile);

// Reads one trait value.
//
// # Safety
// `profile` must be a live handle and `out` a valid pointer.
enum GtStatus gt_profile_get(const struct GtProfile *profile, enum GtTraitDim dim, double *out);

// Applies one bounded profile update: each proposed trait moves toward
// its proposal by at most the 0.05 step, clamped to [0, 1]. Dimensions
// not listed stay put.
//
// # Safety
// `profile` must be a live handle; `dims` and `values` must point to
// `len` readable elements each.
enum GtStatus gt_profile_update(struct GtProfile *profile,
                                const enum GtTraitDim *dims,
                                const double *values,
                                size_t len,
                                uint64_t hand_index);

// Street-adjusted equity for a hole pair against `n_opponents`, seeded
// Monte Carlo with exact river enumeration heads-up. Card text is
// space-separated, e.g. "Ah Kd".
//
// # Safety
// `hole` and `board` must be valid NUL-terminated strings; `out` a valid
// pointer.
enum GtStatus gt_equity(const char *hole,
                        const char *board,
                        size_t n_opponents,
                        uint32_t n_sims,
                        uint64_t seed,
                        double *out);

// Evaluates the best five-card hand from 5-7 cards of text. Higher packed
// rank beats lower; equal rank ties.
//
// # Safety
// `cards` must be a valid NUL-terminated string; `out` a valid pointer.
enum GtStatus gt_evaluate_hand(const char *cards, uint32_t *out);

// Maps a proposed action onto an engine-legal one under the given
// constraints; total, so any input yields a legal action.
//
// # Safety
// `out_kind` and `out_amount` must be valid pointers.
enum GtStatus gt_normalize_action(enum GtActionKind kind,
                                  uint64_t amount,
                                  uint64_t call_amount,
                                  uint64_t min_raise,
                                  uint64_t max_raise,
                                  bool raise_available,
                                  enum GtActionKind *out_kind,
                                  uint64_t *out_amount);

// Spearman rank correlation over two aligned series.
//
// # Safety
// `x` and `y` must point to `n` readable doubles; `out` must be valid.
enum GtStatus gt_spearman(const double *x, const double *y, size_t n, double *out);

// Quadratic-weighted Cohen's kappa over ordinal labels 1..=k.
//
// # Safety
// `a` and `b` must point to `n` readable bytes; `out` must be valid.
enum GtStatus gt_kappa_quadratic(const uint8_t *a,
                                 const uint8_t *b,
                                 size_t n,
                                 size_t k,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLASSTABLE_H */
