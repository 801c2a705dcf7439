#ifndef DFPO_H
#define DFPO_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DfpoStatus {
  DFPO_STATUS_OK = 0,
  DFPO_STATUS_NULL_POINTER = 1,
  DFPO_STATUS_INVALID_ARGUMENT = 2,
  DFPO_STATUS_INVALID_UTF8 = 3,
  /**
   * The evaluation itself failed: type mismatch, or a judged kind with no
   * judge available across the C boundary.
   */
  DFPO_STATUS_EVALUATION = 4,
  DFPO_STATUS_PANIC = 5,
} DfpoStatus;

/**
 * An evaluation spec tree for the reward router.
 */
typedef struct DfpoEvalSpec DfpoEvalSpec;

/**
 * A validated group of G rollouts (G >= 2).
 */
typedef struct DfpoRewardGroup DfpoRewardGroup;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library name and version, static storage.
 */
const char *dfpo_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated when `len > 0`). Returns the full message length in bytes
 * without the terminator, or 0 when the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
size_t dfpo_last_error_message(char *buf, size_t len);

/**
 * Builds a group from per-rollout rewards and segment lengths, all arrays of
 * length `len`. Solution rewards must be 0 or 1, draft rewards in [0, 1]
 * and 0 wherever the solution failed.
 *
 * # Safety
 * Each array must hold `len` readable elements; `out` must be writable.
 */
enum DfpoStatus dfpo_reward_group_new(const double *solution_rewards,
                                      const double *draft_rewards,
                                      const size_t *draft_lengths,
                                      const size_t *solution_lengths,
                                      size_t len,
                                      struct DfpoRewardGroup **out);

/**
 * Builds a group from binary outcomes and draft-quality values `rho`,
 * gating each draft reward by its outcome.
 *
 * # Safety
 * Each array must hold `len` readable elements; `out` must be writable.
 */
enum DfpoStatus dfpo_reward_group_from_outcomes(const bool *successes,
                                                const double *rhos,
                                                const size_t *draft_lengths,
                                                const size_t *solution_lengths,
                                                size_t len,
                                                struct DfpoRewardGroup **out);

/**
 * # Safety
 * `group` must be null or a handle from a `dfpo_reward_group_*`
 * constructor that has not been freed.
 */
void dfpo_reward_group_free(struct DfpoRewardGroup *group);

/**
 * Group size G, or 0 for a null handle.
 *
 * # Safety
 * `group` must be null or a live handle.
 */
size_t dfpo_reward_group_len(const struct DfpoRewardGroup *group);

/**
 * Writes draft advantages, solution advantages and the per-rollout bias
 * terms `(A_draft − A_solution) / (|d| + |y|)`. `masked` selects negative
 * sample masking for the draft advantages. Any output pointer may be null
 * to skip it; `len` must equal the group size.
 *
 * # Safety
 * `group` must be live; non-null outputs must hold `len` writable elements.
 */
enum DfpoStatus dfpo_advantages(const struct DfpoRewardGroup *group,
                                bool masked,
                                double *draft_out,
                                double *solution_out,
                                double *bias_out,
                                size_t len);

/**
 * Length-normalized draft-and-solution objective for one group.
 *
 * # Safety
 * `group` must be live and `out` writable.
 */
enum DfpoStatus dfpo_group_objective(const struct DfpoRewardGroup *group, bool masked, double *out);

/**
 * Solution-only baseline objective (no KL term).
 *
 * # Safety
 * `group` must be live and `out` writable.
 */
enum DfpoStatus dfpo_mgrpo_objective(const struct DfpoRewardGroup *group, double *out);

/**
 * Whether the three relative-advantage inequalities hold for this group
 * (unmasked draft advantages, tolerance 1e-10).
 *
 * # Safety
 * `group` must be live and `out` writable.
 */
enum DfpoStatus dfpo_check_relative_advantage(const struct DfpoRewardGroup *group, bool *out);

/**
 * Parses a spec tree from JSON, e.g. `{"kind":"eval_float_exact_match","params":{"tolerance":0.01}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum DfpoStatus dfpo_eval_spec_from_json(const char *json,
                                         struct DfpoEvalSpec **out);

/**
 * Routes a question category and answer-format hint through the bundled
 * table. Never fails on unknown inputs: they get the fallback spec.
 *
 * # Safety
 * Both strings must be NUL-terminated and `out` writable.
 */
enum DfpoStatus dfpo_eval_spec_route(const char *category,
                                     const char *format_hint,
                                     struct DfpoEvalSpec **out);

/**
 * # Safety
 * `spec` must be null or a live handle.
 */
void dfpo_eval_spec_free(struct DfpoEvalSpec *spec);

/**
 * Writes the spec's evaluation-function name into `buf` like
 * [`dfpo_last_error_message`] and returns its full length.
 *
 * # Safety
 * `spec` must be live; `buf` null or `len` writable bytes.
 */
size_t dfpo_eval_spec_kind(const struct DfpoEvalSpec *spec, char *buf, size_t len);

/**
 * Scores a predicted answer against the golden one, both JSON text.
 * LLM-judged kinds fail with `DFPO_STATUS_EVALUATION`.
 *
 * # Safety
 * `spec` must be live, the strings NUL-terminated, the outputs writable.
 */
enum DfpoStatus dfpo_evaluate(const struct DfpoEvalSpec *spec,
                              const char *predicted_json,
                              const char *golden_json,
                              double *score,
                              uint8_t *binary);

/**
 * Token-level F1 between two answer strings.
 *
 * # Safety
 * Both strings must be NUL-terminated and `out` writable.
 */
enum DfpoStatus dfpo_token_f1(const char *predicted, const char *golden, double *out);

/**
 * Efficiency-weighted accuracy `avg * sqrt(1 - mean_turns / max_turns)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DfpoStatus dfpo_i_avg(double avg, double mean_turns, size_t max_turns, double *out);

/**
 * Repetition score of a JSON array of `{"name": ..., "params": {...}}`
 * tool calls.
 *
 * # Safety
 * `actions_json` must be NUL-terminated and `out` writable.
 */
enum DfpoStatus dfpo_repetition_score(const char *actions_json, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DFPO_H */
