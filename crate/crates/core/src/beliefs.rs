//! Second-person opponent profiles: the five-trait belief vector, bounded
//! per-hand updates, the logit-space intervention operator, and profile
//! ranking.
//!
//! Updates move each trait at most 0.05 toward the proposal per hand.
//! Interventions apply p' = sigmoid(logit(p) + delta) to one trait, with
//! inputs clamped away from {0, 1} before the logit (flagged when the clamp
//! fires).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// The fixed five-dimensional trait ontology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    RiskTolerance,
    Aggressiveness,
    BluffFrequency,
    CallingStationTendency,
    ShowdownPropensity,
}

impl Trait {
    pub const ALL: [Trait; 5] = [
        Trait::RiskTolerance,
        Trait::Aggressiveness,
        Trait::BluffFrequency,
        Trait::CallingStationTendency,
        Trait::ShowdownPropensity,
    ];

    /// The name used in prompts and parsed model output.
    pub fn prompt_name(self) -> &'static str {
        match self {
            Trait::RiskTolerance => "RiskTolerance",
            Trait::Aggressiveness => "Aggressiveness",
            Trait::BluffFrequency => "BluffFrequency",
            Trait::CallingStationTendency => "CallingStationTendency",
            Trait::ShowdownPropensity => "ShowdownPropensity",
        }
    }

    pub fn snake_name(self) -> &'static str {
        match self {
            Trait::RiskTolerance => "risk_tolerance",
            Trait::Aggressiveness => "aggressiveness",
            Trait::BluffFrequency => "bluff_frequency",
            Trait::CallingStationTendency => "calling_station_tendency",
            Trait::ShowdownPropensity => "showdown_propensity",
        }
    }

    pub fn from_prompt_name(s: &str) -> Option<Trait> {
        Trait::ALL
            .into_iter()
            .find(|t| t.prompt_name().eq_ignore_ascii_case(s.trim()))
    }

    pub fn from_snake_name(s: &str) -> Option<Trait> {
        Trait::ALL
            .into_iter()
            .find(|t| t.snake_name().eq_ignore_ascii_case(s.trim()))
    }
}

/// Five trait values, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitVector {
    pub risk_tolerance: f64,
    pub aggressiveness: f64,
    pub bluff_frequency: f64,
    pub calling_station_tendency: f64,
    pub showdown_propensity: f64,
}

impl Default for TraitVector {
    /// Uninformative prior: 0.5 on every dimension.
    fn default() -> Self {
        TraitVector::uniform(0.5)
    }
}

impl TraitVector {
    pub fn uniform(v: f64) -> TraitVector {
        TraitVector {
            risk_tolerance: v,
            aggressiveness: v,
            bluff_frequency: v,
            calling_station_tendency: v,
            showdown_propensity: v,
        }
    }

    pub fn get(&self, t: Trait) -> f64 {
        match t {
            Trait::RiskTolerance => self.risk_tolerance,
            Trait::Aggressiveness => self.aggressiveness,
            Trait::BluffFrequency => self.bluff_frequency,
            Trait::CallingStationTendency => self.calling_station_tendency,
            Trait::ShowdownPropensity => self.showdown_propensity,
        }
    }

    pub fn set(&mut self, t: Trait, v: f64) {
        match t {
            Trait::RiskTolerance => self.risk_tolerance = v,
            Trait::Aggressiveness => self.aggressiveness = v,
            Trait::BluffFrequency => self.bluff_frequency = v,
            Trait::CallingStationTendency => self.calling_station_tendency = v,
            Trait::ShowdownPropensity => self.showdown_propensity = v,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Trait, f64)> + '_ {
        Trait::ALL.into_iter().map(|t| (t, self.get(t)))
    }
}

/// One opponent's belief state: trait vector plus the qualitative texts,
/// with an append-only trait history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpponentProfile {
    pub opponent_id: String,
    pub traits: TraitVector,
    pub summary: String,
    pub rationale: String,
    pub updated_at_hand: u64,
    pub history: Vec<TraitVector>,
}

impl OpponentProfile {
    pub fn new(opponent_id: impl Into<String>) -> OpponentProfile {
        OpponentProfile {
            opponent_id: opponent_id.into(),
            traits: TraitVector::default(),
            summary: String::new(),
            rationale: String::new(),
            updated_at_hand: 0,
            history: vec![TraitVector::default()],
        }
    }
}

/// Maximum per-hand movement of a trait toward its proposal.
pub const PROFILE_STEP: f64 = 0.05;

/// A proposed update as parsed from model output, possibly partial.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileProposal {
    pub traits: BTreeMap<Trait, f64>,
    pub summary: Option<String>,
    pub rationale: Option<String>,
}

/// Moves each proposed trait toward its proposal by at most `step`, clamped
/// to [0, 1]. Traits absent from the proposal stay put. Returns the updated
/// profile; the caller logs the raw proposal separately.
pub fn apply_bounded_update(
    profile: &OpponentProfile,
    proposal: &ProfileProposal,
    hand_index: u64,
    step: f64,
) -> OpponentProfile {
    let mut traits = profile.traits;
    for (&t, &raw) in &proposal.traits {
        let target = raw.clamp(0.0, 1.0);
        let prior = traits.get(t);
        let delta = (target - prior).clamp(-step, step);
        traits.set(t, (prior + delta).clamp(0.0, 1.0));
    }
    let mut history = profile.history.clone();
    history.push(traits);
    OpponentProfile {
        opponent_id: profile.opponent_id.clone(),
        traits,
        summary: proposal
            .summary
            .clone()
            .unwrap_or_else(|| profile.summary.clone()),
        rationale: proposal
            .rationale
            .clone()
            .unwrap_or_else(|| profile.rationale.clone()),
        updated_at_hand: hand_index,
        history,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Some(Direction::Up),
            "down" => Some(Direction::Down),
            _ => None,
        }
    }
}

/// A single-trait logit-space perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub trait_dim: Trait,
    pub direction: Direction,
    pub delta: f64,
}

/// Inputs at exactly 0 or 1 are clamped to this distance from the boundary
/// before the logit.
pub const INTERVENE_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterventionOutcome {
    pub traits: TraitVector,
    pub before: f64,
    pub after: f64,
    /// True when the input had to be clamped away from {0, 1}.
    pub clamped: bool,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Applies p' = sigmoid(logit(p) + signed delta) to the targeted trait only.
pub fn intervene(traits: &TraitVector, spec: &InterventionSpec) -> InterventionOutcome {
    let before = traits.get(spec.trait_dim);
    let clamped_in = before.clamp(INTERVENE_CLAMP, 1.0 - INTERVENE_CLAMP);
    let signed = match spec.direction {
        Direction::Up => spec.delta,
        Direction::Down => -spec.delta,
    };
    let after = sigmoid(logit(clamped_in) + signed);
    let mut out = *traits;
    out.set(spec.trait_dim, after);
    InterventionOutcome {
        traits: out,
        before,
        after,
        clamped: clamped_in != before,
    }
}

/// Scalar form of [`intervene`] for rendered profile numbers.
pub fn intervene_value(p: f64, delta: f64, direction: Direction) -> f64 {
    let clamped = p.clamp(INTERVENE_CLAMP, 1.0 - INTERVENE_CLAMP);
    let signed = match direction {
        Direction::Up => delta,
        Direction::Down => -delta,
    };
    sigmoid(logit(clamped) + signed)
}

/// Average ranks with rank 1 for the highest value; ties share the mean of
/// the ranks they occupy.
pub fn average_ranks_desc(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Ranks profiles on one trait, rank 1 highest, average ties.
pub fn rank_profiles(profiles: &[&OpponentProfile], t: Trait) -> Vec<(String, f64)> {
    let values: Vec<f64> = profiles.iter().map(|p| p.traits.get(t)).collect();
    let ranks = average_ranks_desc(&values);
    profiles
        .iter()
        .zip(ranks)
        .map(|(p, r)| (p.opponent_id.clone(), r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(t: Trait, d: Direction, delta: f64) -> InterventionSpec {
        InterventionSpec {
            trait_dim: t,
            direction: d,
            delta,
        }
    }

    #[test]
    fn sigmoid_of_default_delta() {
        let traits = TraitVector::uniform(0.5);
        let out = intervene(&traits, &spec(Trait::Aggressiveness, Direction::Up, 2.5));
        assert!((out.after - 0.9241418199787566).abs() < 1e-12);
        let down = intervene(&traits, &spec(Trait::Aggressiveness, Direction::Down, 2.5));
        assert!((down.after - (1.0 - 0.9241418199787566)).abs() < 1e-12);
    }

    #[test]
    fn up_then_down_restores_interior_points() {
        for i in 1..=99 {
            let p = i as f64 / 100.0;
            let mut traits = TraitVector::uniform(0.5);
            traits.set(Trait::BluffFrequency, p);
            let up = intervene(&traits, &spec(Trait::BluffFrequency, Direction::Up, 2.5));
            let back = intervene(&up.traits, &spec(Trait::BluffFrequency, Direction::Down, 2.5));
            assert!(
                (back.after - p).abs() < 1e-12,
                "p={p} round-tripped to {}",
                back.after
            );
        }
    }

    #[test]
    fn only_the_target_trait_moves() {
        let mut traits = TraitVector::uniform(0.5);
        traits.set(Trait::RiskTolerance, 0.3);
        let out = intervene(&traits, &spec(Trait::Aggressiveness, Direction::Up, 2.5));
        assert_eq!(out.traits.risk_tolerance.to_bits(), traits.risk_tolerance.to_bits());
        assert_eq!(
            out.traits.showdown_propensity.to_bits(),
            traits.showdown_propensity.to_bits()
        );
        assert_ne!(out.traits.aggressiveness, traits.aggressiveness);
    }

    #[test]
    fn boundary_inputs_clamp_and_flag() {
        let mut traits = TraitVector::uniform(0.5);
        traits.set(Trait::RiskTolerance, 0.0);
        let out = intervene(&traits, &spec(Trait::RiskTolerance, Direction::Up, 2.5));
        assert!(out.clamped);
        assert!(out.after > 0.0 && out.after < 1.0);
        traits.set(Trait::RiskTolerance, 1.0);
        let out = intervene(&traits, &spec(Trait::RiskTolerance, Direction::Down, 2.5));
        assert!(out.clamped);
        assert!(out.after > 0.0 && out.after < 1.0);
    }

    #[test]
    fn intervene_is_strictly_monotone() {
        let s = spec(Trait::Aggressiveness, Direction::Up, 2.5);
        let mut prev = None;
        for i in 1..100 {
            let mut traits = TraitVector::uniform(0.5);
            traits.set(Trait::Aggressiveness, i as f64 / 100.0);
            let out = intervene(&traits, &s);
            if let Some(p) = prev {
                assert!(out.after > p);
            }
            prev = Some(out.after);
        }
    }

    #[test]
    fn bounded_update_examples() {
        let profile = OpponentProfile::new("opp");
        let mut proposal = ProfileProposal::default();
        proposal.traits.insert(Trait::Aggressiveness, 0.9);
        let updated = apply_bounded_update(&profile, &proposal, 1, PROFILE_STEP);
        assert!((updated.traits.aggressiveness - 0.55).abs() < 1e-12);

        proposal.traits.insert(Trait::Aggressiveness, 0.52);
        let p2 = apply_bounded_update(&profile, &proposal, 1, PROFILE_STEP);
        assert!((p2.traits.aggressiveness - 0.52).abs() < 1e-12);

        let mut near_top = OpponentProfile::new("opp");
        near_top.traits.set(Trait::RiskTolerance, 0.98);
        let mut prop = ProfileProposal::default();
        prop.traits.insert(Trait::RiskTolerance, 1.0);
        let once = apply_bounded_update(&near_top, &prop, 2, PROFILE_STEP);
        assert_eq!(once.traits.risk_tolerance, 1.0);
        let twice = apply_bounded_update(&once, &prop, 3, PROFILE_STEP);
        assert_eq!(twice.traits.risk_tolerance, 1.0);
    }

    #[test]
    fn bounded_update_is_a_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10_000 {
            let prior: f64 = rng.gen();
            let proposed: f64 = rng.gen();
            let mut profile = OpponentProfile::new("x");
            profile.traits.set(Trait::BluffFrequency, prior);
            let mut prop = ProfileProposal::default();
            prop.traits.insert(Trait::BluffFrequency, proposed);
            let after = apply_bounded_update(&profile, &prop, 1, PROFILE_STEP)
                .traits
                .bluff_frequency;
            assert!((after - prior).abs() <= PROFILE_STEP + 1e-12);
            assert!((0.0..=1.0).contains(&after));
            let residual = (after - proposed).abs();
            let bound = ((prior - proposed).abs() - PROFILE_STEP).max(0.0);
            assert!(residual <= bound + 1e-12);
        }
    }

    #[test]
    fn history_is_append_only() {
        let profile = OpponentProfile::new("opp");
        let mut prop = ProfileProposal::default();
        prop.traits.insert(Trait::Aggressiveness, 0.9);
        prop.summary = Some("raises often".into());
        prop.rationale = Some("three raises this window".into());
        let p1 = apply_bounded_update(&profile, &prop, 1, PROFILE_STEP);
        let p2 = apply_bounded_update(&p1, &prop, 2, PROFILE_STEP);
        assert_eq!(p2.history.len(), 3);
        assert_eq!(p2.history[0], profile.traits);
        assert_eq!(p2.summary, "raises often");
    }

    #[test]
    fn ranking_convention() {
        let mut a = OpponentProfile::new("a");
        a.traits.set(Trait::Aggressiveness, 0.9);
        let mut b = OpponentProfile::new("b");
        b.traits.set(Trait::Aggressiveness, 0.5);
        let mut c = OpponentProfile::new("c");
        c.traits.set(Trait::Aggressiveness, 0.1);
        let ranked = rank_profiles(&[&a, &b, &c], Trait::Aggressiveness);
        assert_eq!(
            ranked,
            vec![("a".into(), 1.0), ("b".into(), 2.0), ("c".into(), 3.0)]
        );

        let mut e1 = OpponentProfile::new("e1");
        e1.traits.set(Trait::Aggressiveness, 0.4);
        let mut e2 = OpponentProfile::new("e2");
        e2.traits.set(Trait::Aggressiveness, 0.4);
        let mut e3 = OpponentProfile::new("e3");
        e3.traits.set(Trait::Aggressiveness, 0.4);
        let tied = rank_profiles(&[&e1, &e2, &e3], Trait::Aggressiveness);
        assert!(tied.iter().all(|(_, r)| (*r - 2.0).abs() < 1e-12));
    }

    #[test]
    fn ranking_is_invariant_under_monotone_transforms() {
        let values = [0.9, 0.5, 0.1, 0.7];
        let transformed: Vec<f64> = values.iter().map(|v| v * v * 0.5 + 0.1).collect();
        assert_eq!(
            average_ranks_desc(&values),
            average_ranks_desc(&transformed)
        );
    }
}
