//! C ABI over the advantage, reward-router and metric routines.
//!
//! Every fallible call returns a [`DfpoStatus`]; on anything other than
//! `DFPO_STATUS_OK` a message for the calling thread can be read with
//! [`dfpo_last_error_message`]. Handles are opaque and must be released with
//! their matching `_free` function. Strings are NUL-terminated UTF-8, and
//! answers cross the boundary as JSON text (`"\"loc1\""`, `"42"`, `"[1,2]"`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dfpo_core::advantage::{
    bias_terms, check_relative_advantage, dfpo_objective, mgrpo_objective, AdvantageRule, AdvantageSet, RewardGroup,
};
use dfpo_core::metrics::{i_avg, repetition_score, ActionRecord};
use dfpo_core::router::{evaluate, token_f1, AnswerValue, EvalSpec, RouterTable};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfpoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    /// The evaluation itself failed: type mismatch, or a judged kind with no
    /// judge available across the C boundary.
    Evaluation = 4,
    Panic = 5,
}

/// A validated group of G rollouts (G >= 2).
pub struct DfpoRewardGroup {
    inner: RewardGroup,
}

/// An evaluation spec tree for the reward router.
pub struct DfpoEvalSpec {
    inner: EvalSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg.into()));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(DfpoStatus, String);

impl Fail {
    fn arg(msg: impl ToString) -> Self {
        Fail(DfpoStatus::InvalidArgument, msg.to_string())
    }
}

/// Runs `f`, records any failure for the thread and converts panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DfpoStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DfpoStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DfpoStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(DfpoStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|e| Fail(DfpoStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn json_arg<T: serde::de::DeserializeOwned>(p: *const c_char, name: &str) -> Result<T, Fail> {
    serde_json::from_str(str_arg(p, name)?).map_err(|e| Fail::arg(format!("{name}: {e}")))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Fail> {
    non_null(out, name)?;
    out.write(value);
    Ok(())
}

unsafe fn group<'a>(g: *const DfpoRewardGroup) -> Result<&'a RewardGroup, Fail> {
    non_null(g, "group")?;
    Ok(&(*g).inner)
}

/// Library name and version, static storage.
#[no_mangle]
pub extern "C" fn dfpo_version() -> *const c_char {
    concat!("dfpo-ffi ", env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated when `len > 0`). Returns the full message length in bytes
/// without the terminator, or 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dfpo_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_deref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a group from per-rollout rewards and segment lengths, all arrays of
/// length `len`. Solution rewards must be 0 or 1, draft rewards in [0, 1]
/// and 0 wherever the solution failed.
///
/// # Safety
/// Each array must hold `len` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_reward_group_new(
    solution_rewards: *const f64,
    draft_rewards: *const f64,
    draft_lengths: *const usize,
    solution_lengths: *const usize,
    len: usize,
    out: *mut *mut DfpoRewardGroup,
) -> DfpoStatus {
    guard(|| {
        non_null(out, "out")?;
        let g = RewardGroup::new(
            slice(solution_rewards, len, "solution_rewards")?.to_vec(),
            slice(draft_rewards, len, "draft_rewards")?.to_vec(),
            slice(draft_lengths, len, "draft_lengths")?.to_vec(),
            slice(solution_lengths, len, "solution_lengths")?.to_vec(),
        )
        .map_err(Fail::arg)?;
        write(out, Box::into_raw(Box::new(DfpoRewardGroup { inner: g })), "out")
    })
}

/// Builds a group from binary outcomes and draft-quality values `rho`,
/// gating each draft reward by its outcome.
///
/// # Safety
/// Each array must hold `len` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_reward_group_from_outcomes(
    successes: *const bool,
    rhos: *const f64,
    draft_lengths: *const usize,
    solution_lengths: *const usize,
    len: usize,
    out: *mut *mut DfpoRewardGroup,
) -> DfpoStatus {
    guard(|| {
        non_null(out, "out")?;
        let g = RewardGroup::from_outcomes(
            slice(successes, len, "successes")?,
            slice(rhos, len, "rhos")?,
            slice(draft_lengths, len, "draft_lengths")?.to_vec(),
            slice(solution_lengths, len, "solution_lengths")?.to_vec(),
        )
        .map_err(Fail::arg)?;
        write(out, Box::into_raw(Box::new(DfpoRewardGroup { inner: g })), "out")
    })
}

/// # Safety
/// `group` must be null or a handle from a `dfpo_reward_group_*`
/// constructor that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn dfpo_reward_group_free(group: *mut DfpoRewardGroup) {
    if !group.is_null() {
        drop(Box::from_raw(group));
    }
}

/// Group size G, or 0 for a null handle.
///
/// # Safety
/// `group` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfpo_reward_group_len(group: *const DfpoRewardGroup) -> usize {
    if group.is_null() {
        0
    } else {
        (*group).inner.len()
    }
}

/// Writes draft advantages, solution advantages and the per-rollout bias
/// terms `(A_draft − A_solution) / (|d| + |y|)`. `masked` selects negative
/// sample masking for the draft advantages. Any output pointer may be null
/// to skip it; `len` must equal the group size.
///
/// # Safety
/// `group` must be live; non-null outputs must hold `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn dfpo_advantages(
    group: *const DfpoRewardGroup,
    masked: bool,
    draft_out: *mut f64,
    solution_out: *mut f64,
    bias_out: *mut f64,
    len: usize,
) -> DfpoStatus {
    guard(|| {
        let g = self::group(group)?;
        if len != g.len() {
            return Err(Fail::arg(format!("len {len} does not match group size {}", g.len())));
        }
        let rule = if masked { AdvantageRule::Masked } else { AdvantageRule::Unmasked };
        let adv = AdvantageSet::compute(g, rule).map_err(Fail::arg)?;
        let bias = bias_terms(g, &adv).map_err(Fail::arg)?;
        for (out, src) in
            [(draft_out, &adv.draft_advantages), (solution_out, &adv.solution_advantages), (bias_out, &bias)]
        {
            if !out.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), out, len);
            }
        }
        Ok(())
    })
}

/// Length-normalized draft-and-solution objective for one group.
///
/// # Safety
/// `group` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_group_objective(
    group: *const DfpoRewardGroup,
    masked: bool,
    out: *mut f64,
) -> DfpoStatus {
    guard(|| {
        let g = self::group(group)?;
        let rule = if masked { AdvantageRule::Masked } else { AdvantageRule::Unmasked };
        let adv = AdvantageSet::compute(g, rule).map_err(Fail::arg)?;
        write(out, dfpo_objective(g, &adv).map_err(Fail::arg)?, "out")
    })
}

/// Solution-only baseline objective (no KL term).
///
/// # Safety
/// `group` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_mgrpo_objective(group: *const DfpoRewardGroup, out: *mut f64) -> DfpoStatus {
    guard(|| {
        let g = self::group(group)?;
        let adv = AdvantageSet::unmasked(g).map_err(Fail::arg)?;
        write(out, mgrpo_objective(g, &adv.solution_advantages, 0.0).map_err(Fail::arg)?, "out")
    })
}

/// Whether the three relative-advantage inequalities hold for this group
/// (unmasked draft advantages, tolerance 1e-10).
///
/// # Safety
/// `group` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_check_relative_advantage(group: *const DfpoRewardGroup, out: *mut bool) -> DfpoStatus {
    guard(|| {
        let g = self::group(group)?;
        write(out, check_relative_advantage(g).map_err(Fail::arg)?.all(), "out")
    })
}

/// Parses a spec tree from JSON, e.g. `{"kind":"eval_float_exact_match","params":{"tolerance":0.01}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_eval_spec_from_json(json: *const c_char, out: *mut *mut DfpoEvalSpec) -> DfpoStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec: EvalSpec = json_arg(json, "json")?;
        spec.validate().map_err(Fail::arg)?;
        write(out, Box::into_raw(Box::new(DfpoEvalSpec { inner: spec })), "out")
    })
}

/// Routes a question category and answer-format hint through the bundled
/// table. Never fails on unknown inputs: they get the fallback spec.
///
/// # Safety
/// Both strings must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_eval_spec_route(
    category: *const c_char,
    format_hint: *const c_char,
    out: *mut *mut DfpoEvalSpec,
) -> DfpoStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = RouterTable::builtin().route(str_arg(category, "category")?, str_arg(format_hint, "format_hint")?);
        write(out, Box::into_raw(Box::new(DfpoEvalSpec { inner: spec })), "out")
    })
}

/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dfpo_eval_spec_free(spec: *mut DfpoEvalSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Writes the spec's evaluation-function name into `buf` like
/// [`dfpo_last_error_message`] and returns its full length.
///
/// # Safety
/// `spec` must be live; `buf` null or `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dfpo_eval_spec_kind(spec: *const DfpoEvalSpec, buf: *mut c_char, len: usize) -> usize {
    if spec.is_null() {
        return 0;
    }
    let name = (*spec).inner.kind.name();
    if !buf.is_null() && len > 0 {
        let n = name.len().min(len - 1);
        ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
    }
    name.len()
}

/// Scores a predicted answer against the golden one, both JSON text.
/// LLM-judged kinds fail with `DFPO_STATUS_EVALUATION`.
///
/// # Safety
/// `spec` must be live, the strings NUL-terminated, the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_evaluate(
    spec: *const DfpoEvalSpec,
    predicted_json: *const c_char,
    golden_json: *const c_char,
    score: *mut f64,
    binary: *mut u8,
) -> DfpoStatus {
    guard(|| {
        non_null(spec, "spec")?;
        non_null(score, "score")?;
        non_null(binary, "binary")?;
        let predicted: AnswerValue = json_arg(predicted_json, "predicted_json")?;
        let golden: AnswerValue = json_arg(golden_json, "golden_json")?;
        let o = evaluate(&(*spec).inner, &predicted, &golden, None)
            .map_err(|e| Fail(DfpoStatus::Evaluation, e.to_string()))?;
        write(score, o.score, "score")?;
        write(binary, o.binary, "binary")
    })
}

/// Token-level F1 between two answer strings.
///
/// # Safety
/// Both strings must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_token_f1(predicted: *const c_char, golden: *const c_char, out: *mut f64) -> DfpoStatus {
    guard(|| write(out, token_f1(str_arg(predicted, "predicted")?, str_arg(golden, "golden")?), "out"))
}

/// Efficiency-weighted accuracy `avg * sqrt(1 - mean_turns / max_turns)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_i_avg(avg: f64, mean_turns: f64, max_turns: usize, out: *mut f64) -> DfpoStatus {
    guard(|| write(out, i_avg(avg, mean_turns, max_turns).map_err(Fail::arg)?, "out"))
}

/// Repetition score of a JSON array of `{"name": ..., "params": {...}}`
/// tool calls.
///
/// # Safety
/// `actions_json` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dfpo_repetition_score(actions_json: *const c_char, out: *mut f64) -> DfpoStatus {
    guard(|| {
        let actions: Vec<ActionRecord> = json_arg(actions_json, "actions_json")?;
        write(out, repetition_score(&actions).map_err(Fail::arg)?, "out")
    })
}
