//! C ABI surface over the core crate: belief interventions, bounded profile
//! updates, equity estimation, hand evaluation, action normalization, and
//! the two agreement metrics.
//!
//! Conventions: every function returns a `GtStatus`; results come back
//! through out-pointers; profile state lives behind an opaque handle that
//! must be released with `gt_profile_free`. No function panics across the
//! boundary.

use std::ffi::CStr;
use std::os::raw::c_char;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use glasstable::beliefs::{
    apply_bounded_update, intervene_value, Direction, OpponentProfile, ProfileProposal, Trait,
    PROFILE_STEP,
};
use glasstable::cards::{evaluate_hand, parse_cards};
use glasstable::engine::{normalize_action, Action, LegalActionSet};
use glasstable::equity::equity_for_street;
use glasstable::metrics::{cohens_kappa_quadratic, spearman_xy, MetricError};

/// Status codes shared by every function in this library.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Card text did not parse or contained duplicates.
    BadCards = 3,
    /// Numeric or size constraints violated.
    BadInput = 4,
    /// The quantity is mathematically undefined on this input.
    Undefined = 5,
}

/// Trait dimensions, in the fixed ontology order.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtTraitDim {
    RiskTolerance = 0,
    Aggressiveness = 1,
    BluffFrequency = 2,
    CallingStationTendency = 3,
    ShowdownPropensity = 4,
}

impl GtTraitDim {
    fn to_trait(self) -> Trait {
        match self {
            GtTraitDim::RiskTolerance => Trait::RiskTolerance,
            GtTraitDim::Aggressiveness => Trait::Aggressiveness,
            GtTraitDim::BluffFrequency => Trait::BluffFrequency,
            GtTraitDim::CallingStationTendency => Trait::CallingStationTendency,
            GtTraitDim::ShowdownPropensity => Trait::ShowdownPropensity,
        }
    }
}

/// Action classes for normalization calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtActionKind {
    Fold = 0,
    Check = 1,
    Call = 2,
    Raise = 3,
}

/// Opaque opponent profile handle.
pub struct GtProfile {
    inner: OpponentProfile,
}

/// Logit-space belief intervention: sigma(logit(p) + delta) for up,
/// sigma(logit(p) - delta) for down. `p` is clamped away from 0 and 1
/// before the logit, matching the core implementation.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn gt_intervene(
    p: f64,
    delta: f64,
    up: bool,
    out: *mut f64,
) -> GtStatus {
    if out.is_null() {
        return GtStatus::NullArgument;
    }
    if !p.is_finite() || !delta.is_finite() {
        return GtStatus::BadInput;
    }
    let dir = if up { Direction::Up } else { Direction::Down };
    *out = intervene_value(p, delta, dir);
    GtStatus::Ok
}

/// Allocates a profile with every trait at the 0.5 prior. Free with
/// `gt_profile_free`.
///
/// # Safety
/// `opponent_id` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gt_profile_new(opponent_id: *const c_char) -> *mut GtProfile {
    if opponent_id.is_null() {
        return std::ptr::null_mut();
    }
    let Ok(id) = CStr::from_ptr(opponent_id).to_str() else {
        return std::ptr::null_mut();
    };
    Box::into_raw(Box::new(GtProfile {
        inner: OpponentProfile::new(id),
    }))
}

/// Releases a profile handle. Null is a no-op.
///
/// # Safety
/// `profile` must be a pointer returned by `gt_profile_new`, or null.
#[no_mangle]
pub unsafe extern "C" fn gt_profile_free(profile: *mut GtProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Reads one trait value.
///
/// # Safety
/// `profile` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gt_profile_get(
    profile: *const GtProfile,
    dim: GtTraitDim,
    out: *mut f64,
) -> GtStatus {
    if profile.is_null() || out.is_null() {
        return GtStatus::NullArgument;
    }
    *out = (*profile).inner.traits.get(dim.to_trait());
    GtStatus::Ok
}

/// Applies one bounded profile update: each proposed trait moves toward
/// its proposal by at most the 0.05 step, clamped to [0, 1]. Dimensions
/// not listed stay put.
///
/// # Safety
/// `profile` must be a live handle; `dims` and `values` must point to
/// `len` readable elements each.
#[no_mangle]
pub unsafe extern "C" fn gt_profile_update(
    profile: *mut GtProfile,
    dims: *const GtTraitDim,
    values: *const f64,
    len: usize,
    hand_index: u64,
) -> GtStatus {
    if profile.is_null() || (len > 0 && (dims.is_null() || values.is_null())) {
        return GtStatus::NullArgument;
    }
    let mut proposal = ProfileProposal {
        traits: std::collections::BTreeMap::new(),
        summary: None,
        rationale: None,
    };
    for i in 0..len {
        let value = *values.add(i);
        if !value.is_finite() {
            return GtStatus::BadInput;
        }
        proposal.traits.insert((*dims.add(i)).to_trait(), value);
    }
    let handle = &mut *profile;
    handle.inner = apply_bounded_update(&handle.inner, &proposal, hand_index, PROFILE_STEP);
    GtStatus::Ok
}

/// Street-adjusted equity for a hole pair against `n_opponents`, seeded
/// Monte Carlo with exact river enumeration heads-up. Card text is
/// space-separated, e.g. "Ah Kd".
///
/// # Safety
/// `hole` and `board` must be valid NUL-terminated strings; `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn gt_equity(
    hole: *const c_char,
    board: *const c_char,
    n_opponents: usize,
    n_sims: u32,
    seed: u64,
    out: *mut f64,
) -> GtStatus {
    if hole.is_null() || board.is_null() || out.is_null() {
        return GtStatus::NullArgument;
    }
    let (Ok(hole_text), Ok(board_text)) =
        (CStr::from_ptr(hole).to_str(), CStr::from_ptr(board).to_str())
    else {
        return GtStatus::InvalidUtf8;
    };
    let Some(hole_cards) = parse_cards(hole_text) else {
        return GtStatus::BadCards;
    };
    let [a, b] = hole_cards.as_slice() else {
        return GtStatus::BadCards;
    };
    let board_cards = if board_text.trim().is_empty() {
        Vec::new()
    } else {
        match parse_cards(board_text) {
            Some(cards) => cards,
            None => return GtStatus::BadCards,
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match equity_for_street([*a, *b], &board_cards, n_opponents, n_sims, &mut rng) {
        Ok(estimate) => {
            *out = estimate.equity;
            GtStatus::Ok
        }
        Err(_) => GtStatus::BadInput,
    }
}

/// Evaluates the best five-card hand from 5-7 cards of text. Higher packed
/// rank beats lower; equal rank ties.
///
/// # Safety
/// `cards` must be a valid NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gt_evaluate_hand(cards: *const c_char, out: *mut u32) -> GtStatus {
    if cards.is_null() || out.is_null() {
        return GtStatus::NullArgument;
    }
    let Ok(text) = CStr::from_ptr(cards).to_str() else {
        return GtStatus::InvalidUtf8;
    };
    let Some(parsed) = parse_cards(text) else {
        return GtStatus::BadCards;
    };
    match evaluate_hand(&parsed) {
        Ok(rank) => {
            *out = rank.0;
            GtStatus::Ok
        }
        Err(_) => GtStatus::BadCards,
    }
}

/// Maps a proposed action onto an engine-legal one under the given
/// constraints; total, so any input yields a legal action.
///
/// # Safety
/// `out_kind` and `out_amount` must be valid pointers.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gt_normalize_action(
    kind: GtActionKind,
    amount: u64,
    call_amount: u64,
    min_raise: u64,
    max_raise: u64,
    raise_available: bool,
    out_kind: *mut GtActionKind,
    out_amount: *mut u64,
) -> GtStatus {
    if out_kind.is_null() || out_amount.is_null() {
        return GtStatus::NullArgument;
    }
    let proposed = match kind {
        GtActionKind::Fold => Action::Fold,
        GtActionKind::Check => Action::Check,
        GtActionKind::Call => Action::Call,
        GtActionKind::Raise => Action::Raise { to: amount },
    };
    let legal = LegalActionSet {
        can_fold: call_amount > 0,
        call_amount,
        min_raise,
        max_raise,
        raise_available,
    };
    let (k, a) = match normalize_action(proposed, &legal) {
        Action::Fold => (GtActionKind::Fold, 0),
        Action::Check => (GtActionKind::Check, 0),
        Action::Call => (GtActionKind::Call, call_amount),
        Action::Raise { to } => (GtActionKind::Raise, to),
    };
    *out_kind = k;
    *out_amount = a;
    GtStatus::Ok
}

fn metric_status(err: MetricError) -> GtStatus {
    match err {
        MetricError::Undefined { .. } => GtStatus::Undefined,
        _ => GtStatus::BadInput,
    }
}

/// Spearman rank correlation over two aligned series.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gt_spearman(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> GtStatus {
    if x.is_null() || y.is_null() || out.is_null() {
        return GtStatus::NullArgument;
    }
    let xs = std::slice::from_raw_parts(x, n);
    let ys = std::slice::from_raw_parts(y, n);
    match spearman_xy(xs, ys) {
        Ok(rho) => {
            *out = rho;
            GtStatus::Ok
        }
        Err(e) => metric_status(e),
    }
}

/// Quadratic-weighted Cohen's kappa over ordinal labels 1..=k.
///
/// # Safety
/// `a` and `b` must point to `n` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gt_kappa_quadratic(
    a: *const u8,
    b: *const u8,
    n: usize,
    k: usize,
    out: *mut f64,
) -> GtStatus {
    if a.is_null() || b.is_null() || out.is_null() {
        return GtStatus::NullArgument;
    }
    let left = std::slice::from_raw_parts(a, n);
    let right = std::slice::from_raw_parts(b, n);
    if left.iter().chain(right).any(|&v| v == 0 || v as usize > k) {
        return GtStatus::BadInput;
    }
    match cohens_kappa_quadratic(left, right, k) {
        Ok(kappa) => {
            *out = kappa;
            GtStatus::Ok
        }
        Err(e) => metric_status(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    #[test]
    fn intervene_round_trips_through_the_abi() {
        let mut up = 0.0;
        let mut back = 0.0;
        unsafe {
            assert_eq!(gt_intervene(0.5, 2.5, true, &mut up), GtStatus::Ok);
            assert!((up - 0.9241418199787566).abs() < 1e-12);
            assert_eq!(gt_intervene(up, 2.5, false, &mut back), GtStatus::Ok);
            assert!((back - 0.5).abs() < 1e-12);
            assert_eq!(
                gt_intervene(0.5, f64::NAN, true, &mut up),
                GtStatus::BadInput
            );
            assert_eq!(
                gt_intervene(0.5, 2.5, true, std::ptr::null_mut()),
                GtStatus::NullArgument
            );
        }
    }

    #[test]
    fn profile_handle_updates_stay_bounded() {
        let id = CString::new("villain").unwrap();
        unsafe {
            let profile = gt_profile_new(id.as_ptr());
            assert!(!profile.is_null());
            let mut value = 0.0;
            assert_eq!(
                gt_profile_get(profile, GtTraitDim::Aggressiveness, &mut value),
                GtStatus::Ok
            );
            assert_eq!(value, 0.5);

            let dims = [GtTraitDim::Aggressiveness];
            let proposals = [1.0f64];
            for step in 0..3 {
                assert_eq!(
                    gt_profile_update(profile, dims.as_ptr(), proposals.as_ptr(), 1, step),
                    GtStatus::Ok
                );
            }
            assert_eq!(
                gt_profile_get(profile, GtTraitDim::Aggressiveness, &mut value),
                GtStatus::Ok
            );
            assert!((value - 0.65).abs() < 1e-12, "three bounded steps from 0.5");
            assert_eq!(
                gt_profile_get(profile, GtTraitDim::BluffFrequency, &mut value),
                GtStatus::Ok
            );
            assert_eq!(value, 0.5, "unlisted dims stay put");
            gt_profile_free(profile);
            gt_profile_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn equity_and_hand_eval_parse_card_text() {
        let hole = CString::new("Ah Ad").unwrap();
        let board = CString::new("").unwrap();
        let river = CString::new("2c 7d 9h Jc Qs").unwrap();
        let mut first = 0.0;
        let mut second = 0.0;
        unsafe {
            assert_eq!(
                gt_equity(hole.as_ptr(), board.as_ptr(), 1, 2000, 9, &mut first),
                GtStatus::Ok
            );
            assert_eq!(
                gt_equity(hole.as_ptr(), board.as_ptr(), 1, 2000, 9, &mut second),
                GtStatus::Ok
            );
            assert_eq!(first, second, "same seed, same estimate");
            assert!(first > 0.75, "aces are a big favorite, got {first}");

            assert_eq!(
                gt_equity(hole.as_ptr(), river.as_ptr(), 1, 100, 9, &mut first),
                GtStatus::Ok
            );

            let straight = CString::new("5h 6c 7d 8s 9h").unwrap();
            let pair = CString::new("Ah Ad 2c 7d 9h").unwrap();
            let garbage = CString::new("Zz 6c").unwrap();
            let mut a = 0u32;
            let mut b = 0u32;
            assert_eq!(gt_evaluate_hand(straight.as_ptr(), &mut a), GtStatus::Ok);
            assert_eq!(gt_evaluate_hand(pair.as_ptr(), &mut b), GtStatus::Ok);
            assert!(a > b, "straight beats a pair");
            assert_eq!(gt_evaluate_hand(garbage.as_ptr(), &mut a), GtStatus::BadCards);
        }
    }

    #[test]
    fn normalization_and_metrics_match_core_behavior() {
        let mut kind = GtActionKind::Fold;
        let mut amount = 0u64;
        unsafe {
            // Raise above the cap clips; check facing a bet downgrades.
            assert_eq!(
                gt_normalize_action(
                    GtActionKind::Raise,
                    10_000,
                    50,
                    100,
                    900,
                    true,
                    &mut kind,
                    &mut amount
                ),
                GtStatus::Ok
            );
            assert_eq!((kind, amount), (GtActionKind::Raise, 900));
            assert_eq!(
                gt_normalize_action(
                    GtActionKind::Check,
                    0,
                    50,
                    100,
                    900,
                    true,
                    &mut kind,
                    &mut amount
                ),
                GtStatus::Ok
            );
            assert_eq!(kind, GtActionKind::Fold);

            let x = [1.0, 2.0, 3.0, 4.0];
            let y = [10.0, 20.0, 30.0, 40.0];
            let mut rho = 0.0;
            assert_eq!(gt_spearman(x.as_ptr(), y.as_ptr(), 4, &mut rho), GtStatus::Ok);
            assert_eq!(rho, 1.0);
            let flat = [5.0, 5.0, 5.0, 5.0];
            assert_eq!(
                gt_spearman(x.as_ptr(), flat.as_ptr(), 4, &mut rho),
                GtStatus::Undefined
            );

            let a = [1u8, 2, 3, 4, 5, 1, 2, 3, 4, 5];
            let b = [2u8, 3, 4, 5, 5, 2, 3, 4, 5, 5];
            let mut kappa = 0.0;
            assert_eq!(
                gt_kappa_quadratic(a.as_ptr(), b.as_ptr(), 10, 5, &mut kappa),
                GtStatus::Ok
            );
            assert!((kappa - 0.8).abs() < 1e-12);
            let bad = [0u8, 1, 2, 3, 4, 5, 1, 2, 3, 4];
            assert_eq!(
                gt_kappa_quadratic(bad.as_ptr(), b.as_ptr(), 10, 5, &mut kappa),
                GtStatus::BadInput
            );
        }
    }
}
