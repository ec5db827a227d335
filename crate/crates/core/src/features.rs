//! Environment-derived reference features: per-decision quantities (pot
//! odds, SPR, equity buckets, risk ratios) and long-run behavioral
//! statistics per opponent.
//!
//! Pot odds follow call/(pot+call), zero when there is nothing to call.
//! SPR is stack/pot, held as None when the pot is empty. Fold/call/raise
//! rates are computed over faced-bet decision points only, so the
//! check-vs-fold asymmetry never contaminates fold_rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Action, CoarseAction, LegalActionSet, Street};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandStrengthBucket {
    Weak,
    Medium,
    Strong,
}

impl HandStrengthBucket {
    pub fn label(self) -> &'static str {
        match self {
            HandStrengthBucket::Weak => "weak",
            HandStrengthBucket::Medium => "medium",
            HandStrengthBucket::Strong => "strong",
        }
    }
}

/// Equity cut points for the weak/medium/strong buckets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketThresholds {
    pub medium_min: f64,
    pub strong_min: f64,
}

impl Default for BucketThresholds {
    fn default() -> Self {
        BucketThresholds {
            medium_min: 0.40,
            strong_min: 0.65,
        }
    }
}

pub fn strength_bucket(equity: f64, t: &BucketThresholds) -> HandStrengthBucket {
    if equity >= t.strong_min {
        HandStrengthBucket::Strong
    } else if equity >= t.medium_min {
        HandStrengthBucket::Medium
    } else {
        HandStrengthBucket::Weak
    }
}

/// Risk thresholds for the high-risk action flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskThresholds {
    pub raise_over_pot: f64,
    pub raise_over_stack: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds {
            raise_over_pot: 0.75,
            raise_over_stack: 0.25,
        }
    }
}

/// The reference feature vector for one decision point. Raise ratios are
/// filled by [`finalize_with_action`] once the action is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFeatures {
    pub pot_odds: f64,
    /// Stack-to-pot ratio; None encodes an empty pot (unbounded ratio).
    pub spr: Option<f64>,
    pub equity: f64,
    pub equity_exact: bool,
    pub hand_strength_bucket: HandStrengthBucket,
    pub raise_over_pot: Option<f64>,
    pub raise_over_stack: Option<f64>,
    pub high_risk: bool,
}

/// Pre-action features for the acting seat.
pub fn decision_features(
    pot: u64,
    stack: u64,
    legal: &LegalActionSet,
    equity: f64,
    equity_exact: bool,
    buckets: &BucketThresholds,
) -> ReferenceFeatures {
    let call = legal.call_amount;
    let pot_odds = if call == 0 {
        0.0
    } else {
        call as f64 / (pot + call) as f64
    };
    let spr = if pot == 0 {
        None
    } else {
        Some(stack as f64 / pot as f64)
    };
    ReferenceFeatures {
        pot_odds,
        spr,
        equity,
        equity_exact,
        hand_strength_bucket: strength_bucket(equity, buckets),
        raise_over_pot: None,
        raise_over_stack: None,
        high_risk: false,
    }
}

/// Fills the action-dependent risk ratios. The raise size is the chips the
/// action adds on this street beyond what the seat had already committed.
pub fn finalize_with_action(
    mut features: ReferenceFeatures,
    action: Action,
    committed_street: u64,
    pot: u64,
    stack: u64,
    risk: &RiskThresholds,
) -> ReferenceFeatures {
    if let Action::Raise { to } = action {
        let added = to.saturating_sub(committed_street);
        let rop = if pot == 0 {
            0.0
        } else {
            added as f64 / pot as f64
        };
        let ros = if stack == 0 {
            0.0
        } else {
            added as f64 / stack as f64
        };
        features.raise_over_pot = Some(rop);
        features.raise_over_stack = Some(ros);
        features.high_risk = rop >= risk.raise_over_pot || ros >= risk.raise_over_stack;
    }
    features
}

/// Monotone counters for one opponent, accumulated across a battle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorCounters {
    pub hands_seen: u64,
    pub hands_voluntary: u64,
    pub hands_preflop_raise: u64,
    pub decision_points: u64,
    pub postflop_bets_raises: u64,
    pub postflop_calls: u64,
    pub faced_bet_points: u64,
    pub folds_vs_bet: u64,
    pub calls_vs_bet: u64,
    pub raises_vs_bet: u64,
    pub bluff_attempts: u64,
    pub bluff_successes: u64,
    pub showdowns: u64,
}

/// Derived rates over a counter span, plus the flags that mark capped
/// denominators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorStats {
    pub hands_seen: u64,
    pub vpip_proxy: f64,
    pub pfr: f64,
    pub aggression_factor: f64,
    pub af_zero_calls: bool,
    pub fold_rate: f64,
    pub call_rate: f64,
    pub raise_rate: f64,
    pub call_to_fold_ratio: f64,
    pub ctf_zero_folds: bool,
    pub bluff_attempt_rate: f64,
    pub bluff_success_rate: f64,
    pub showdown_rate: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("window covers zero hands")]
    EmptyWindow,
    #[error("window end precedes start")]
    InvertedWindow,
}

/// One decision by the observed player within a hand.
#[derive(Debug, Clone, Copy)]
pub struct ObservedDecision {
    pub street: Street,
    pub faced_bet: bool,
    pub action: Action,
    /// The actor's equity at the decision, from the environment's view.
    pub equity: f64,
    pub voluntary: bool,
}

/// Everything the stats tracker needs from one completed hand.
#[derive(Debug, Clone, Default)]
pub struct HandObservation {
    pub decisions: Vec<ObservedDecision>,
    pub reached_showdown: bool,
    pub won_without_showdown: bool,
}

/// Equity below this marks a bet/raise as a bluff attempt.
pub const BLUFF_EQUITY_MAX: f64 = 0.35;

/// Advances the counters with one completed hand for one opponent.
pub fn update_behavior_counters(
    counters: &mut BehaviorCounters,
    hand: &HandObservation,
    bluff_equity_max: f64,
) {
    counters.hands_seen += 1;
    let mut voluntary = false;
    let mut preflop_raise = false;
    let mut bluffed = false;
    for d in &hand.decisions {
        counters.decision_points += 1;
        let coarse = d.action.coarse();
        if d.voluntary {
            voluntary = true;
        }
        if d.street == Street::Preflop && coarse == CoarseAction::Raise {
            preflop_raise = true;
        }
        if d.street != Street::Preflop {
            match coarse {
                CoarseAction::Raise => counters.postflop_bets_raises += 1,
                CoarseAction::Call if d.faced_bet => counters.postflop_calls += 1,
                _ => {}
            }
        }
        if d.faced_bet {
            counters.faced_bet_points += 1;
            match coarse {
                CoarseAction::Fold => counters.folds_vs_bet += 1,
                CoarseAction::Call => counters.calls_vs_bet += 1,
                CoarseAction::Raise => counters.raises_vs_bet += 1,
            }
        }
        if coarse == CoarseAction::Raise && d.equity < bluff_equity_max {
            counters.bluff_attempts += 1;
            bluffed = true;
        }
    }
    if voluntary {
        counters.hands_voluntary += 1;
    }
    if preflop_raise {
        counters.hands_preflop_raise += 1;
    }
    if hand.reached_showdown {
        counters.showdowns += 1;
    }
    if bluffed && hand.won_without_showdown {
        counters.bluff_successes += 1;
    }
}

fn rate(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Rates over the whole counter span.
pub fn behavior_stats(c: &BehaviorCounters) -> BehaviorStats {
    let af_zero_calls = c.postflop_calls == 0;
    let ctf_zero_folds = c.folds_vs_bet == 0;
    BehaviorStats {
        hands_seen: c.hands_seen,
        vpip_proxy: rate(c.hands_voluntary, c.hands_seen),
        pfr: rate(c.hands_preflop_raise, c.hands_seen),
        aggression_factor: c.postflop_bets_raises as f64 / c.postflop_calls.max(1) as f64,
        af_zero_calls,
        fold_rate: rate(c.folds_vs_bet, c.faced_bet_points),
        call_rate: rate(c.calls_vs_bet, c.faced_bet_points),
        raise_rate: rate(c.raises_vs_bet, c.faced_bet_points),
        call_to_fold_ratio: c.calls_vs_bet as f64 / c.folds_vs_bet.max(1) as f64,
        ctf_zero_folds,
        bluff_attempt_rate: rate(c.bluff_attempts, c.decision_points),
        bluff_success_rate: rate(c.bluff_successes, c.bluff_attempts),
        showdown_rate: rate(c.showdowns, c.hands_seen),
    }
}

/// Rates over the counter difference `now - prev`. Errs on empty windows so
/// metrics skip rather than fabricate.
pub fn windowed_delta(
    now: &BehaviorCounters,
    prev: &BehaviorCounters,
) -> Result<BehaviorStats, FeatureError> {
    if now.hands_seen < prev.hands_seen {
        return Err(FeatureError::InvertedWindow);
    }
    if now.hands_seen == prev.hands_seen {
        return Err(FeatureError::EmptyWindow);
    }
    let diff = BehaviorCounters {
        hands_seen: now.hands_seen - prev.hands_seen,
        hands_voluntary: now.hands_voluntary - prev.hands_voluntary,
        hands_preflop_raise: now.hands_preflop_raise - prev.hands_preflop_raise,
        decision_points: now.decision_points - prev.decision_points,
        postflop_bets_raises: now.postflop_bets_raises - prev.postflop_bets_raises,
        postflop_calls: now.postflop_calls - prev.postflop_calls,
        faced_bet_points: now.faced_bet_points - prev.faced_bet_points,
        folds_vs_bet: now.folds_vs_bet - prev.folds_vs_bet,
        calls_vs_bet: now.calls_vs_bet - prev.calls_vs_bet,
        raises_vs_bet: now.raises_vs_bet - prev.raises_vs_bet,
        bluff_attempts: now.bluff_attempts - prev.bluff_attempts,
        bluff_successes: now.bluff_successes - prev.bluff_successes,
        showdowns: now.showdowns - prev.showdowns,
    };
    Ok(behavior_stats(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legal_call(amount: u64) -> LegalActionSet {
        LegalActionSet {
            can_fold: amount > 0,
            call_amount: amount,
            min_raise: 20,
            max_raise: 500,
            raise_available: true,
        }
    }

    #[test]
    fn pot_odds_definition() {
        let f = decision_features(
            30,
            200,
            &legal_call(10),
            0.5,
            false,
            &BucketThresholds::default(),
        );
        assert!((f.pot_odds - 0.25).abs() < 1e-12);
        let f0 = decision_features(
            30,
            200,
            &legal_call(0),
            0.5,
            false,
            &BucketThresholds::default(),
        );
        assert_eq!(f0.pot_odds, 0.0);
    }

    #[test]
    fn spr_is_none_on_empty_pot() {
        let f = decision_features(
            0,
            200,
            &legal_call(0),
            0.5,
            false,
            &BucketThresholds::default(),
        );
        assert_eq!(f.spr, None);
        let f2 = decision_features(
            100,
            200,
            &legal_call(0),
            0.5,
            false,
            &BucketThresholds::default(),
        );
        assert_eq!(f2.spr, Some(2.0));
    }

    #[test]
    fn bucket_thresholds_and_monotonicity() {
        let t = BucketThresholds::default();
        assert_eq!(strength_bucket(0.39, &t), HandStrengthBucket::Weak);
        assert_eq!(strength_bucket(0.40, &t), HandStrengthBucket::Medium);
        assert_eq!(strength_bucket(0.64, &t), HandStrengthBucket::Medium);
        assert_eq!(strength_bucket(0.65, &t), HandStrengthBucket::Strong);
        let mut prev = HandStrengthBucket::Weak;
        for i in 0..=100 {
            let b = strength_bucket(i as f64 / 100.0, &t);
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn raise_ratios_and_high_risk() {
        let f = decision_features(
            100,
            200,
            &legal_call(0),
            0.5,
            false,
            &BucketThresholds::default(),
        );
        let f = finalize_with_action(
            f,
            Action::Raise { to: 80 },
            0,
            100,
            200,
            &RiskThresholds::default(),
        );
        assert_eq!(f.raise_over_pot, Some(0.8));
        assert_eq!(f.raise_over_stack, Some(0.4));
        assert!(f.high_risk);
        let g = decision_features(
            100,
            200,
            &legal_call(0),
            0.5,
            false,
            &BucketThresholds::default(),
        );
        let g = finalize_with_action(g, Action::Call, 0, 100, 200, &RiskThresholds::default());
        assert_eq!(g.raise_over_pot, None);
        assert!(!g.high_risk);
    }

    fn obs(street: Street, faced: bool, action: Action, equity: f64) -> ObservedDecision {
        ObservedDecision {
            street,
            faced_bet: faced,
            action,
            equity,
            voluntary: matches!(action.coarse(), CoarseAction::Call | CoarseAction::Raise)
                && faced
                || matches!(action, Action::Raise { .. }),
        }
    }

    #[test]
    fn counters_advance_per_spec_examples() {
        let mut c = BehaviorCounters::default();
        // Raise preflop then fold flop, no showdown.
        let hand = HandObservation {
            decisions: vec![
                obs(Street::Preflop, true, Action::Raise { to: 30 }, 0.6),
                obs(Street::Flop, true, Action::Fold, 0.2),
            ],
            reached_showdown: false,
            won_without_showdown: false,
        };
        update_behavior_counters(&mut c, &hand, BLUFF_EQUITY_MAX);
        assert_eq!(c.hands_preflop_raise, 1);
        assert_eq!(c.folds_vs_bet, 1);
        assert_eq!(c.showdowns, 0);

        // 10 hands, 4 voluntary entries -> vpip 0.4.
        let mut c = BehaviorCounters::default();
        for i in 0..10 {
            let action = if i < 4 {
                Action::Call
            } else {
                Action::Fold
            };
            let hand = HandObservation {
                decisions: vec![obs(Street::Preflop, true, action, 0.5)],
                reached_showdown: false,
                won_without_showdown: false,
            };
            update_behavior_counters(&mut c, &hand, BLUFF_EQUITY_MAX);
        }
        let s = behavior_stats(&c);
        assert!((s.vpip_proxy - 0.4).abs() < 1e-12);
    }

    #[test]
    fn aggression_factor_zero_calls_is_capped_and_flagged() {
        let mut c = BehaviorCounters::default();
        let hand = HandObservation {
            decisions: vec![
                obs(Street::Flop, false, Action::Raise { to: 30 }, 0.7),
                obs(Street::Turn, false, Action::Raise { to: 60 }, 0.7),
                obs(Street::River, false, Action::Raise { to: 90 }, 0.7),
            ],
            reached_showdown: true,
            won_without_showdown: false,
        };
        update_behavior_counters(&mut c, &hand, BLUFF_EQUITY_MAX);
        let s = behavior_stats(&c);
        assert_eq!(s.aggression_factor, 3.0);
        assert!(s.af_zero_calls);
    }

    #[test]
    fn faced_bet_rates_partition() {
        let mut c = BehaviorCounters::default();
        let actions = [
            Action::Fold,
            Action::Call,
            Action::Call,
            Action::Raise { to: 40 },
        ];
        for a in actions {
            let hand = HandObservation {
                decisions: vec![obs(Street::Flop, true, a, 0.5)],
                reached_showdown: false,
                won_without_showdown: false,
            };
            update_behavior_counters(&mut c, &hand, BLUFF_EQUITY_MAX);
        }
        let s = behavior_stats(&c);
        assert!((s.fold_rate + s.call_rate + s.raise_rate - 1.0).abs() < 1e-12);
        assert!((s.fold_rate - 0.25).abs() < 1e-12);
        assert!((s.raise_rate - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bluff_counting() {
        let mut c = BehaviorCounters::default();
        let hand = HandObservation {
            decisions: vec![obs(Street::River, false, Action::Raise { to: 90 }, 0.1)],
            reached_showdown: false,
            won_without_showdown: true,
        };
        update_behavior_counters(&mut c, &hand, BLUFF_EQUITY_MAX);
        let s = behavior_stats(&c);
        assert_eq!(c.bluff_attempts, 1);
        assert_eq!(c.bluff_successes, 1);
        assert_eq!(s.bluff_success_rate, 1.0);
    }

    #[test]
    fn windowed_delta_exactness_and_empty_window() {
        let mut c0 = BehaviorCounters::default();
        for _ in 0..5 {
            let hand = HandObservation {
                decisions: vec![obs(Street::Flop, true, Action::Call, 0.5)],
                reached_showdown: false,
                won_without_showdown: false,
            };
            update_behavior_counters(&mut c0, &hand, BLUFF_EQUITY_MAX);
        }
        let snapshot = c0;
        for _ in 0..10 {
            let hand = HandObservation {
                decisions: vec![obs(Street::Flop, true, Action::Raise { to: 40 }, 0.5)],
                reached_showdown: false,
                won_without_showdown: false,
            };
            update_behavior_counters(&mut c0, &hand, BLUFF_EQUITY_MAX);
        }
        let w = windowed_delta(&c0, &snapshot).unwrap();
        assert_eq!(w.hands_seen, 10);
        assert!((w.raise_rate - 1.0).abs() < 1e-12);
        assert_eq!(
            windowed_delta(&snapshot, &snapshot).unwrap_err(),
            FeatureError::EmptyWindow
        );
    }
}
